#include "cldeepc/qp_control.hpp"

#include <cmath>
#include <string>

#include "cldeepc/data_matrices.hpp"
#include "cldeepc/errors.hpp"

namespace cldeepc {

namespace {

bool is_psd(const Matrix& m, double tol) {
  if (m.rows() == 0) return true;
  Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
  const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
  return es.eigenvalues().minCoeff() >= -tol * scale;
}

// Block first-difference operator: (D u)_k = u_k - u_{k-1}, u_{-1} dropped.
Matrix difference_operator(int f, int r) {
  const Index n = static_cast<Index>(f) * r;
  Matrix d = Matrix::Identity(n, n);
  for (Index i = r; i < n; ++i) d(i, i - r) = -1.0;
  return d;
}

void append_rows(Matrix& a, Vector& b, std::vector<ConstraintKind>& kinds, const Matrix& rows,
                 const Vector& bound, ConstraintKind kind) {
  Index keep = 0;
  for (Index i = 0; i < rows.rows(); ++i)
    if (std::isfinite(bound(i))) ++keep;
  if (keep == 0) return;
  const Index old = a.rows();
  a.conservativeResize(old + keep, rows.cols());
  b.conservativeResize(old + keep);
  Index at = old;
  for (Index i = 0; i < rows.rows(); ++i) {
    if (!std::isfinite(bound(i))) continue;
    a.row(at) = rows.row(i);
    b(at) = bound(i);
    kinds.push_back(kind);
    ++at;
  }
}

Vector tile(const Vector& v, int times) {
  Vector out(v.size() * times);
  for (int i = 0; i < times; ++i) out.segment(i * v.size(), v.size()) = v;
  return out;
}

ControlDecision decision_from(const QpProblem& problem, const DenseQpResult& res,
                              const Matrix& h, const Vector& g, const Matrix& a, const Vector& b) {
  ControlDecision dec;
  const Index nu = problem.moves();
  dec.u_plan = res.x.head(nu);
  dec.u_next = dec.u_plan.head(problem.inputs);
  dec.y_pred = problem.output_map * dec.u_plan + problem.output_offset;
  dec.iterations = res.iterations;
  dec.kkt = kkt_residuals(h, g, a, b, res.x, res.multipliers);
  return dec;
}

// Stage with slacks on the rows whose kind is in `softened`.
DenseQpResult solve_softened(const QpProblem& problem, double lambda, double tol,
                             bool soften_rates, Matrix& h, Vector& g, Matrix& a, Vector& b,
                             std::vector<Index>& slack_rows) {
  const Index nu = problem.moves();
  slack_rows.clear();
  for (Index i = 0; i < problem.a_ineq.rows(); ++i) {
    const ConstraintKind kind = problem.kinds[static_cast<std::size_t>(i)];
    if (kind == ConstraintKind::kOutput || (soften_rates && kind == ConstraintKind::kInputRate))
      slack_rows.push_back(i);
  }
  const Index ns = static_cast<Index>(slack_rows.size());
  const Index n = nu + ns;
  const Index m = problem.a_ineq.rows();

  h = Matrix::Zero(n, n);
  h.topLeftCorner(nu, nu) = problem.hessian;
  h.bottomRightCorner(ns, ns).diagonal().setConstant(2.0 * lambda);
  g = Vector::Zero(n);
  g.head(nu) = problem.gradient;

  a = Matrix::Zero(m + ns, n);
  b = Vector::Zero(m + ns);
  a.topLeftCorner(m, nu) = problem.a_ineq;
  b.head(m) = problem.b_ineq;
  for (Index j = 0; j < ns; ++j) {
    a(slack_rows[j], nu + j) = -1.0;
    a(m + j, nu + j) = -1.0;
  }
  DenseQpOptions opts;
  opts.tolerance = tol;
  return solve_dense_qp(h, g, a, b, opts);
}

}  // namespace

ControllerWeights ControllerWeights::uniform(int f, int inputs, int outputs, double q, double r,
                                             double r_delta, double lambda_slack) {
  ControllerWeights w;
  const Index fl = static_cast<Index>(f) * outputs;
  const Index fr = static_cast<Index>(f) * inputs;
  w.q = q * Matrix::Identity(fl, fl);
  w.r = r * Matrix::Identity(fr, fr);
  w.r_delta = r_delta * Matrix::Identity(fr, fr);
  w.lambda_slack = lambda_slack;
  w.validate();
  return w;
}

void ControllerWeights::validate() const {
  if (q.rows() != q.cols() || r.rows() != r.cols() || r_delta.rows() != r_delta.cols() ||
      r.rows() != r_delta.rows())
    throw DimensionError("ControllerWeights: weight matrices must be square and conformal");
  if (!is_psd(q, 1e-12)) throw InvalidArgumentError("ControllerWeights: Q must be PSD");
  if (!is_psd(r, 1e-12)) throw InvalidArgumentError("ControllerWeights: R must be PSD");
  Eigen::LLT<Matrix> llt(0.5 * (r_delta + r_delta.transpose()));
  if (r_delta.rows() > 0 && llt.info() != Eigen::Success)
    throw InvalidArgumentError("ControllerWeights: R_delta must be positive definite");
  if (!(lambda_slack > 0.0)) throw InvalidArgumentError("ControllerWeights: lambda_slack must be > 0");
}

BoxConstraints BoxConstraints::uniform(int inputs, int outputs, double du_max, double u_max,
                                       double y_max) {
  BoxConstraints c;
  c.du_max = Vector::Constant(inputs, du_max);
  c.u_max = Vector::Constant(inputs, u_max);
  c.y_max = Vector::Constant(outputs, y_max);
  c.validate();
  return c;
}

void BoxConstraints::validate() const {
  for (const Vector* v : {&du_max, &u_max, &y_max})
    for (Index i = 0; i < v->size(); ++i)
      if (!((*v)(i) > 0.0)) throw InvalidArgumentError("BoxConstraints: bounds must be > 0");
}

const char* to_string(DecisionStatus status) {
  switch (status) {
    case DecisionStatus::kFeasibleHard: return "feasible-hard";
    case DecisionStatus::kSoftenedOutputs: return "softened-outputs";
    case DecisionStatus::kSoftenedRates: return "softened-rates";
    case DecisionStatus::kInfeasible: return "infeasible";
  }
  return "unknown";
}

QpProblem build_tracking_qp(const Matrix& gu, const Vector& free_response,
                            const Vector& reference, const ControllerWeights& weights,
                            const BoxConstraints& constraints, const Vector& u_prev) {
  const Index fl = gu.rows();
  const Index fr = gu.cols();
  const Index r = u_prev.size();
  const Index l = constraints.y_max.size();
  if (r == 0 || l == 0 || fr % r != 0 || fl % l != 0 || fr / r != fl / l)
    throw DimensionError("build_tracking_qp: Gu shape does not match input/output sizes");
  const int f = static_cast<int>(fr / r);
  if (free_response.size() != fl || reference.size() != fl)
    throw DimensionError("build_tracking_qp: free response and reference must have f*l rows");
  if (weights.q.rows() != fl || weights.r.rows() != fr || weights.r_delta.rows() != fr)
    throw DimensionError("build_tracking_qp: weights do not match the horizon");
  if (constraints.du_max.size() != r || constraints.u_max.size() != r)
    throw DimensionError("build_tracking_qp: input bounds must have r entries");

  QpProblem qp;
  qp.horizon = f;
  qp.inputs = static_cast<int>(r);
  qp.outputs = static_cast<int>(l);
  qp.output_map = gu;
  qp.output_offset = free_response;

  const Matrix dop = difference_operator(f, static_cast<int>(r));
  Vector d0 = Vector::Zero(fr);
  d0.head(r) = u_prev;

  const Matrix qg = weights.q * gu;
  qp.hessian = 2.0 * (gu.transpose() * qg + weights.r + dop.transpose() * weights.r_delta * dop);
  qp.hessian = 0.5 * (qp.hessian + qp.hessian.transpose()).eval();
  qp.gradient = 2.0 * (qg.transpose() * (free_response - reference) -
                       dop.transpose() * (weights.r_delta * d0));

  qp.a_ineq.resize(0, fr);
  qp.b_ineq.resize(0);
  const Vector du = tile(constraints.du_max, f);
  const Vector um = tile(constraints.u_max, f);
  const Vector ym = tile(constraints.y_max, f);
  append_rows(qp.a_ineq, qp.b_ineq, qp.kinds, dop, du + d0, ConstraintKind::kInputRate);
  append_rows(qp.a_ineq, qp.b_ineq, qp.kinds, -dop, du - d0, ConstraintKind::kInputRate);
  const Matrix eye = Matrix::Identity(fr, fr);
  append_rows(qp.a_ineq, qp.b_ineq, qp.kinds, eye, um, ConstraintKind::kInputBox);
  append_rows(qp.a_ineq, qp.b_ineq, qp.kinds, -eye, um, ConstraintKind::kInputBox);
  append_rows(qp.a_ineq, qp.b_ineq, qp.kinds, gu, ym - free_response, ConstraintKind::kOutput);
  append_rows(qp.a_ineq, qp.b_ineq, qp.kinds, -gu, ym + free_response, ConstraintKind::kOutput);
  return qp;
}

QpProblem build_tracking_qp(const PredictorMatrices& predictor, const Vector& u_past,
                            const Vector& y_past, const Vector& reference,
                            const ControllerWeights& weights, const BoxConstraints& constraints,
                            const Vector& u_prev) {
  if (u_past.size() != predictor.lu.cols() || y_past.size() != predictor.ly.cols())
    throw DimensionError("build_tracking_qp: past windows do not match the predictor");
  const Vector free = predictor.lu * u_past + predictor.ly * y_past;
  return build_tracking_qp(predictor.gu, free, reference, weights, constraints, u_prev);
}

ControlDecision solve_qp(const QpProblem& problem, double tol) {
  DenseQpOptions opts;
  opts.tolerance = tol;
  const DenseQpResult res =
      solve_dense_qp(problem.hessian, problem.gradient, problem.a_ineq, problem.b_ineq, opts);
  if (res.status == DenseQpStatus::kInfeasible) {
    ControlDecision dec;
    dec.status = DecisionStatus::kInfeasible;
    dec.iterations = res.iterations;
    return dec;
  }
  ControlDecision dec =
      decision_from(problem, res, problem.hessian, problem.gradient, problem.a_ineq, problem.b_ineq);
  dec.status = DecisionStatus::kFeasibleHard;
  return dec;
}

ControlDecision soften_and_resolve(const QpProblem& problem, double lambda_slack, double tol) {
  if (!(lambda_slack > 0.0)) throw InvalidArgumentError("soften_and_resolve: lambda must be > 0");
  Matrix h, a;
  Vector g, b;
  std::vector<Index> rows;
  for (const bool rates : {false, true}) {
    const DenseQpResult res = solve_softened(problem, lambda_slack, tol, rates, h, g, a, b, rows);
    if (res.status == DenseQpStatus::kInfeasible) continue;
    ControlDecision dec = decision_from(problem, res, h, g, a, b);
    dec.status = rates ? DecisionStatus::kSoftenedRates : DecisionStatus::kSoftenedOutputs;
    double out2 = 0.0, rate2 = 0.0;
    const Index nu = problem.moves();
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const double s = std::max(0.0, res.x(nu + static_cast<Index>(j)));
      if (problem.kinds[static_cast<std::size_t>(rows[j])] == ConstraintKind::kOutput)
        out2 += s * s;
      else
        rate2 += s * s;
    }
    dec.output_slack_norm = std::sqrt(out2);
    dec.rate_slack_norm = std::sqrt(rate2);
    return dec;
  }
  throw SolverError("soften_and_resolve: problem infeasible even with output and rate slacks");
}

ControlDecision solve_tracking(const QpProblem& problem, double lambda_slack, double tol) {
  ControlDecision dec = solve_qp(problem, tol);
  if (dec.status != DecisionStatus::kInfeasible) return dec;
  return soften_and_resolve(problem, lambda_slack, tol);
}

ControlDecision oracle_mpc_step(const StateSpaceModel& model, const Vector& x_hat,
                                const Vector& reference, const ControllerWeights& weights,
                                const BoxConstraints& constraints, const Vector& u_prev,
                                double tol) {
  const int l = model.outputs();
  if (x_hat.size() != model.states()) throw DimensionError("oracle_mpc_step: state size");
  if (reference.size() == 0 || reference.size() % l != 0)
    throw DimensionError("oracle_mpc_step: reference must have f*l entries");
  const int f = static_cast<int>(reference.size() / l);
  const Matrix tu = block_toeplitz(model.a(), model.b(), model.c(), model.d(), f);
  const Vector free = extended_observability(model.a(), model.c(), f) * x_hat;
  const QpProblem qp = build_tracking_qp(tu, free, reference, weights, constraints, u_prev);
  return solve_tracking(qp, weights.lambda_slack, tol);
}

}  // namespace cldeepc
