#pragma once

#include <vector>

#include "cldeepc/dense_qp.hpp"
#include "cldeepc/lti_plant.hpp"
#include "cldeepc/predictors.hpp"

namespace cldeepc {

/// Stacked-horizon weights of the tracking cost
/// |y^ - r|^2_Q + |u|^2_R + |du|^2_Rd, plus the slack penalty lambda.
struct ControllerWeights {
  Matrix q;        ///< fl x fl, PSD
  Matrix r;        ///< fr x fr, PSD
  Matrix r_delta;  ///< fr x fr, PD
  double lambda_slack = 1e15;

  static ControllerWeights uniform(int f, int inputs, int outputs, double q, double r,
                                   double r_delta, double lambda_slack = 1e15);
  void validate() const;
};

/// Symmetric per-channel boxes; an infinite bound drops its rows.
struct BoxConstraints {
  Vector du_max;
  Vector u_max;
  Vector y_max;

  static BoxConstraints uniform(int inputs, int outputs, double du_max, double u_max,
                                double y_max);
  void validate() const;
};

enum class ConstraintKind { kInputRate, kInputBox, kOutput, kSlack };

/// Condensed problem in the future inputs (and optional slacks):
/// min 1/2 z^T H z + g^T z  s.t.  A z <= b.
struct QpProblem {
  int horizon = 0, inputs = 0, outputs = 0;
  Matrix hessian;
  Vector gradient;
  Matrix a_ineq;
  Vector b_ineq;
  std::vector<ConstraintKind> kinds;
  /// y^ = output_map * u_future + output_offset
  Matrix output_map;
  Vector output_offset;

  Index moves() const noexcept { return static_cast<Index>(horizon) * inputs; }
};

enum class DecisionStatus { kFeasibleHard, kSoftenedOutputs, kSoftenedRates, kInfeasible };

const char* to_string(DecisionStatus status);

struct ControlDecision {
  Vector u_next;
  Vector u_plan;
  Vector y_pred;
  DecisionStatus status = DecisionStatus::kFeasibleHard;
  double output_slack_norm = 0.0;
  double rate_slack_norm = 0.0;
  int iterations = 0;
  KktResiduals kkt;
};

/// Tracking QP around y^ = gu u + free_response.
QpProblem build_tracking_qp(const Matrix& gu, const Vector& free_response,
                            const Vector& reference, const ControllerWeights& weights,
                            const BoxConstraints& constraints, const Vector& u_prev);

/// Tracking QP around y^ = Lu u_past + Ly y_past + Gu u.
QpProblem build_tracking_qp(const PredictorMatrices& predictor, const Vector& u_past,
                            const Vector& y_past, const Vector& reference,
                            const ControllerWeights& weights, const BoxConstraints& constraints,
                            const Vector& u_prev);

/// Hard solve. Returns status kInfeasible instead of throwing when the
/// constraint set is empty.
ControlDecision solve_qp(const QpProblem& problem, double tol = 1e-9);

/// Adds nonnegative slacks with cost lambda |s|^2 to the output rows, then
/// also to the input-rate rows if that is still infeasible. Throws
/// SolverError when both stages fail.
ControlDecision soften_and_resolve(const QpProblem& problem, double lambda_slack,
                                   double tol = 1e-9);

/// Hard first, softened only when the hard problem is infeasible.
ControlDecision solve_tracking(const QpProblem& problem, double lambda_slack, double tol = 1e-9);

/// MPC step on the true model: y^ = Gamma_f x_hat + T_f u.
ControlDecision oracle_mpc_step(const StateSpaceModel& model, const Vector& x_hat,
                                const Vector& reference, const ControllerWeights& weights,
                                const BoxConstraints& constraints, const Vector& u_prev,
                                double tol = 1e-9);

}  // namespace cldeepc
