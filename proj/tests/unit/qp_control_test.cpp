#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "cldeepc/data_matrices.hpp"
#include "cldeepc/dense_qp.hpp"
#include "cldeepc/errors.hpp"
#include "cldeepc/qp_control.hpp"
#include "qp_oracle.hpp"
#include "random_systems.hpp"

namespace cldeepc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Matrix box_rows(Index n) {
  Matrix a(2 * n, n);
  a << Matrix::Identity(n, n), -Matrix::Identity(n, n);
  return a;
}

Vector box_bounds(const Vector& lo, const Vector& hi) {
  Vector b(2 * lo.size());
  b << hi, -lo;
  return b;
}

TEST(DenseQp, UnconstrainedMatchesLinearSolve) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 1 + trial % 8;
    const Matrix m = testing::random_matrix(rng, n, n);
    const Matrix h = m * m.transpose() + Matrix::Identity(n, n);
    const Vector g = testing::random_matrix(rng, n, 1);
    const DenseQpResult res = solve_dense_qp(h, g, Matrix(0, n), Vector(0));
    const Vector x = h.ldlt().solve(-g);
    EXPECT_LE((res.x - x).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(DenseQp, OneDimensionalClamp) {
  const Matrix h = Matrix::Constant(1, 1, 2.0);
  for (double target : {-3.0, 0.2, 5.0}) {
    const Vector g = Vector::Constant(1, -2.0 * target);
    const DenseQpResult res = solve_dense_qp(h, g, box_rows(1), box_bounds(Vector::Constant(1, -1), Vector::Constant(1, 1)));
    EXPECT_NEAR(res.x(0), std::clamp(target, -1.0, 1.0), 1e-12);
  }
}

TEST(DenseQp, RandomBoxAgainstBruteForce) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> width(0.1, 2.0);
  for (int trial = 0; trial < 30; ++trial) {
    const Index n = 5;
    const Matrix m = testing::random_matrix(rng, n, n);
    const Matrix h = m * m.transpose() + 0.1 * Matrix::Identity(n, n);
    const Vector g = testing::random_matrix(rng, n, 1, 3.0);
    Vector lo(n), hi(n);
    for (Index i = 0; i < n; ++i) {
      lo(i) = -width(rng);
      hi(i) = width(rng);
    }
    const Matrix a = box_rows(n);
    const Vector b = box_bounds(lo, hi);
    const DenseQpResult res = solve_dense_qp(h, g, a, b);
    ASSERT_EQ(res.status, DenseQpStatus::kOptimal);
    EXPECT_NEAR(res.objective, testing::box_qp_bruteforce(h, g, lo, hi), 1e-6);
    EXPECT_LE(kkt_residuals(h, g, a, b, res.x, res.multipliers).max(), 1e-8);
  }
}

TEST(DenseQp, DetectsInfeasibility) {
  const Matrix h = Matrix::Identity(1, 1);
  Matrix a(2, 1);
  a << 1, -1;
  const Vector b = (Vector(2) << -1, -1).finished();  // x <= -1 and x >= 1
  EXPECT_EQ(solve_dense_qp(h, Vector::Zero(1), a, b).status, DenseQpStatus::kInfeasible);
}

TEST(DenseQp, IterationLimitThrowsWithDiagnostics) {
  const Index n = 6;
  const Matrix h = Matrix::Identity(n, n);
  const Vector g = Vector::Constant(n, -10.0);
  DenseQpOptions opts;
  opts.max_iterations = 2;
  try {
    solve_dense_qp(h, g, box_rows(n), box_bounds(Vector::Constant(n, -1), Vector::Constant(n, 1)), opts);
    FAIL() << "expected SolverError";
  } catch (const SolverError& ex) {
    EXPECT_NE(std::string(ex.what()).find("iteration limit"), std::string::npos);
  }
}

TEST(DenseQp, RegularisesSemidefiniteHessian) {
  Matrix h = Matrix::Zero(2, 2);
  h(0, 0) = 1.0;
  const DenseQpResult res = solve_dense_qp(h, Vector::Constant(2, -1.0), box_rows(2),
                                           box_bounds(Vector::Constant(2, -1), Vector::Constant(2, 1)));
  EXPECT_NEAR(res.x(0), 1.0, 1e-9);
  EXPECT_NEAR(res.x(1), 1.0, 1e-9);
  Matrix bad = -Matrix::Identity(2, 2);
  EXPECT_THROW(solve_dense_qp(bad, Vector::Zero(2), Matrix(0, 2), Vector(0)), SolverError);
}

struct ScalarSetup {
  ControllerWeights w = ControllerWeights::uniform(1, 1, 1, 100.0, 0.0, 10.0);
  BoxConstraints wide = BoxConstraints::uniform(1, 1, 1e6, 1e6, 1e6);
};

TEST(TrackingQp, UnconstrainedScalarOptimum) {
  ScalarSetup s;
  const QpProblem qp = build_tracking_qp(Matrix::Ones(1, 1), Vector::Zero(1), Vector::Ones(1), s.w,
                                         s.wide, Vector::Zero(1));
  const ControlDecision d = solve_qp(qp);
  EXPECT_NEAR(d.u_next(0), 100.0 / 110.0, 1e-12);
  EXPECT_EQ(d.status, DecisionStatus::kFeasibleHard);
  EXPECT_EQ(d.output_slack_norm, 0.0);
}

TEST(TrackingQp, StaysAtPreviousInputWhenOnTarget) {
  ScalarSetup s;
  const Vector u_prev = Vector::Constant(1, 0.7);
  // Prediction at u = u_prev equals the reference.
  const QpProblem qp = build_tracking_qp(Matrix::Constant(1, 1, 2.0), Vector::Constant(1, 1.0),
                                         Vector::Constant(1, 1.0 + 2.0 * 0.7), s.w, s.wide, u_prev);
  EXPECT_NEAR(solve_qp(qp).u_next(0), 0.7, 1e-12);
}

TEST(TrackingQp, OutputBoundBinds) {
  ScalarSetup s;
  BoxConstraints c = BoxConstraints::uniform(1, 1, 1e6, 1e6, 0.5);
  const QpProblem qp = build_tracking_qp(Matrix::Ones(1, 1), Vector::Zero(1), Vector::Ones(1), s.w, c,
                                         Vector::Zero(1));
  const ControlDecision d = solve_qp(qp);
  EXPECT_NEAR(d.u_next(0), 0.5, 1e-12);
  EXPECT_NEAR(d.y_pred(0), 0.5, 1e-12);
}

TEST(TrackingQp, InfiniteBoundsDropRows) {
  ScalarSetup s;
  BoxConstraints c;
  c.du_max = Vector::Constant(1, kInf);
  c.u_max = Vector::Constant(1, 2.0);
  c.y_max = Vector::Constant(1, kInf);
  const QpProblem qp = build_tracking_qp(Matrix::Identity(3, 3), Vector::Zero(3), Vector::Ones(3),
                                         ControllerWeights::uniform(3, 1, 1, 1, 0, 1), c, Vector::Zero(1));
  EXPECT_EQ(qp.a_ineq.rows(), 6);
  for (auto k : qp.kinds) EXPECT_EQ(k, ConstraintKind::kInputBox);
}

TEST(TrackingQp, RejectsDimensionMismatch) {
  ScalarSetup s;
  EXPECT_THROW(build_tracking_qp(Matrix::Ones(2, 2), Vector::Zero(2), Vector::Zero(2), s.w, s.wide,
                                 Vector::Zero(1)),
               DimensionError);
}

TEST(TrackingQp, AffineEquivariance) {
  std::mt19937_64 rng(3);
  const int f = 6;
  const auto w = ControllerWeights::uniform(f, 1, 1, 100, 0, 10);
  const auto wide = BoxConstraints::uniform(1, 1, 1e9, 1e9, 1e9);
  const Matrix gu = block_toeplitz(Matrix::Constant(1, 1, 0.8), Matrix::Ones(1, 1), Matrix::Ones(1, 1),
                                   Matrix::Zero(1, 1), f);
  const Vector free = testing::random_matrix(rng, f, 1);
  const Vector ref = testing::random_matrix(rng, f, 1);
  const double c = 3.5;
  const ControlDecision a = solve_qp(build_tracking_qp(gu, free, ref, w, wide, Vector::Zero(1)));
  const ControlDecision b = solve_qp(build_tracking_qp(gu, free + Vector::Constant(f, c),
                                                       ref + Vector::Constant(f, c), w, wide, Vector::Zero(1)));
  EXPECT_LE((b.y_pred - a.y_pred - Vector::Constant(f, c)).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Softening, NeverUsedWhenHardFeasible) {
  ScalarSetup s;
  const QpProblem qp = build_tracking_qp(Matrix::Ones(1, 1), Vector::Zero(1), Vector::Ones(1), s.w,
                                         s.wide, Vector::Zero(1));
  const ControlDecision d = solve_tracking(qp, 1e15);
  EXPECT_EQ(d.status, DecisionStatus::kFeasibleHard);
  EXPECT_EQ(d.output_slack_norm, 0.0);
  EXPECT_EQ(d.rate_slack_norm, 0.0);
}

TEST(Softening, SlackAbsorbsForcedOutput) {
  ScalarSetup s;
  BoxConstraints c;
  c.du_max = Vector::Constant(1, 1e6);
  c.u_max = Vector::Constant(1, 1e6);
  c.y_max = Vector::Constant(1, 0.0);
  const QpProblem qp = build_tracking_qp(Matrix::Zero(1, 1), Vector::Constant(1, 2.0), Vector::Zero(1),
                                         s.w, c, Vector::Zero(1));
  EXPECT_EQ(solve_qp(qp).status, DecisionStatus::kInfeasible);
  const ControlDecision d = solve_tracking(qp, 1e15);
  EXPECT_EQ(d.status, DecisionStatus::kSoftenedOutputs);
  EXPECT_NEAR(d.output_slack_norm, 2.0, 1e-9);
}

TEST(Softening, InputAtFeasibilityBoundary) {
  ScalarSetup s;
  BoxConstraints c;
  c.du_max = Vector::Constant(1, 1e6);
  c.u_max = Vector::Constant(1, 1.0);
  c.y_max = Vector::Constant(1, 0.0);
  const QpProblem qp = build_tracking_qp(Matrix::Ones(1, 1), Vector::Constant(1, 2.0), Vector::Zero(1),
                                         s.w, c, Vector::Zero(1));
  const ControlDecision d = solve_tracking(qp, 1e15);
  EXPECT_NEAR(d.u_next(0), -1.0, 1e-9);
  EXPECT_NEAR(d.output_slack_norm, 1.0, 1e-9);
}

TEST(Softening, LargePenaltyGivesMinimalViolation) {
  // y = u + 5 per step, |u| <= 2, |y| <= 1: the least violation is 2 per step.
  const int f = 2;
  const auto w = ControllerWeights::uniform(f, 1, 1, 100, 0, 10);
  BoxConstraints c = BoxConstraints::uniform(1, 1, 1e6, 2.0, 1.0);
  const QpProblem qp = build_tracking_qp(Matrix::Identity(f, f), Vector::Constant(f, 5.0),
                                         Vector::Constant(f, 0.0), w, c, Vector::Zero(1));
  const ControlDecision d = solve_tracking(qp, 1e15);
  EXPECT_NEAR(d.output_slack_norm, std::sqrt(8.0), 1e-6);
  EXPECT_NEAR(d.u_plan(0), -2.0, 1e-6);
}

TEST(Softening, FallsBackToRateSlacks) {
  // u must reach 5 immediately (|u| box forces it) but the rate limit is 1.
  const auto w = ControllerWeights::uniform(1, 1, 1, 1, 0, 1);
  BoxConstraints c;
  c.du_max = Vector::Constant(1, 1.0);
  c.u_max = Vector::Constant(1, 10.0);
  c.y_max = Vector::Constant(1, 1e6);
  QpProblem qp = build_tracking_qp(Matrix::Ones(1, 1), Vector::Zero(1), Vector::Zero(1), w, c,
                                   Vector::Zero(1));
  // Extra hard input row u >= 5.
  qp.a_ineq.conservativeResize(qp.a_ineq.rows() + 1, Eigen::NoChange);
  qp.b_ineq.conservativeResize(qp.b_ineq.size() + 1);
  qp.a_ineq.bottomRows(1) << -1.0;
  qp.b_ineq(qp.b_ineq.size() - 1) = -5.0;
  qp.kinds.push_back(ConstraintKind::kInputBox);
  const ControlDecision d = solve_tracking(qp, 1e15);
  EXPECT_EQ(d.status, DecisionStatus::kSoftenedRates);
  EXPECT_NEAR(d.u_next(0), 5.0, 1e-6);
  EXPECT_NEAR(d.rate_slack_norm, 4.0, 1e-6);
}

TEST(Softening, ThrowsWhenInputBoxesConflict) {
  const auto w = ControllerWeights::uniform(1, 1, 1, 1, 0, 1);
  QpProblem qp = build_tracking_qp(Matrix::Ones(1, 1), Vector::Zero(1), Vector::Zero(1), w,
                                   BoxConstraints::uniform(1, 1, 10, 1, 10), Vector::Zero(1));
  qp.a_ineq.conservativeResize(qp.a_ineq.rows() + 1, Eigen::NoChange);
  qp.b_ineq.conservativeResize(qp.b_ineq.size() + 1);
  qp.a_ineq.bottomRows(1) << -1.0;
  qp.b_ineq(qp.b_ineq.size() - 1) = -5.0;
  qp.kinds.push_back(ConstraintKind::kInputBox);
  EXPECT_THROW(solve_tracking(qp, 1e15), SolverError);
}

TEST(OracleMpc, ZeroStateZeroReference) {
  const auto m = benchmark_system();
  const auto w = ControllerWeights::uniform(20, 1, 1, 100, 0, 10);
  const auto c = BoxConstraints::uniform(1, 1, 3.75, 15, 1000);
  const ControlDecision d = oracle_mpc_step(m, Vector::Zero(5), Vector::Zero(20), w, c, Vector::Zero(1));
  EXPECT_NEAR(d.u_next(0), 0.0, 1e-12);
}

TEST(OracleMpc, SameQpAsDataDrivenWithTrueMatrices) {
  const auto m = benchmark_system();
  const int f = 10;
  const auto w = ControllerWeights::uniform(f, 1, 1, 100, 0, 10);
  const auto c = BoxConstraints::uniform(1, 1, 3.75, 15, 1000);
  std::mt19937_64 rng(4);
  const Vector x = testing::random_matrix(rng, 5, 1);
  const Vector ref = Vector::Constant(f, 100.0);
  const Vector u_prev = Vector::Constant(1, 0.3);
  PredictorMatrices pm;
  pm.past = 5;
  pm.horizon = f;
  pm.inputs = pm.outputs = 1;
  pm.lu = extended_observability(m.a(), m.c(), f);  // "past" slot carries the state
  pm.ly = Matrix::Zero(f, 5);
  pm.gu = block_toeplitz(m.a(), m.b(), m.c(), m.d(), f);
  const ControlDecision a = oracle_mpc_step(m, x, ref, w, c, u_prev);
  const ControlDecision b = solve_tracking(build_tracking_qp(pm, x, Vector::Zero(5), ref, w, c, u_prev), 1e15);
  EXPECT_LE((a.u_plan - b.u_plan).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ControllerWeights, Validation) {
  EXPECT_THROW(ControllerWeights::uniform(2, 1, 1, -1, 0, 10), InvalidArgumentError);
  EXPECT_THROW(ControllerWeights::uniform(2, 1, 1, 1, 0, 0), InvalidArgumentError);
  EXPECT_THROW(ControllerWeights::uniform(2, 1, 1, 1, 0, 1, 0.0), InvalidArgumentError);
  EXPECT_THROW(BoxConstraints::uniform(1, 1, 0.0, 1, 1), InvalidArgumentError);
}

}  // namespace
}  // namespace cldeepc
