#include "cldeepc/controllers.hpp"

#include <chrono>
#include <string>

#include "cldeepc/errors.hpp"

namespace cldeepc {

const char* to_string(ControllerKind kind) {
  switch (kind) {
    case ControllerKind::kDeePC: return "deepc";
    case ControllerKind::kClDeePC: return "cl-deepc";
    case ControllerKind::kOracle: return "oracle";
  }
  return "unknown";
}

ControllerKind parse_controller_kind(std::string_view text) {
  if (text == "deepc") return ControllerKind::kDeePC;
  if (text == "cl-deepc") return ControllerKind::kClDeePC;
  if (text == "oracle") return ControllerKind::kOracle;
  throw InvalidArgumentError("unknown controller kind '" + std::string(text) +
                             "' (expected deepc, cl-deepc or oracle)");
}

int identification_block(ControllerKind kind, int f) {
  return kind == ControllerKind::kDeePC ? f : 1;
}

Vector past_window(const std::vector<Vector>& signal, Index k, int p) {
  if (k < p || k > static_cast<Index>(signal.size()))
    throw InsufficientDataError("past_window: need samples [" + std::to_string(k - p) + ", " +
                                std::to_string(k) + ")");
  const Index dim = signal.empty() ? 0 : signal.front().size();
  Vector out(p * dim);
  for (int j = 0; j < p; ++j) out.segment(j * dim, dim) = signal[static_cast<std::size_t>(k - p + j)];
  return out;
}

PredictorMatrices fit_predictor(ControllerKind kind, const SignalLog& log, Index end, Index nbar,
                                int p, int f, const FitOptions& options, bool* ill_conditioned) {
  if (kind == ControllerKind::kOracle)
    throw InvalidArgumentError("fit_predictor: the oracle does not fit a predictor");
  const int s = identification_block(kind, f);
  const IvDataset data = build_dataset(log, end, nbar, p, s);
  const IvRegression reg = solve_iv_regression(data, options);
  if (!reg.coefficients.allFinite())
    throw IllConditionedError("fit_predictor: non-finite coefficients", reg.condition);
  if (ill_conditioned != nullptr) *ill_conditioned = reg.ill_conditioned;
  if (kind == ControllerKind::kDeePC) {
    PredictorMatrices out;
    out.past = p;
    out.horizon = f;
    out.inputs = data.inputs();
    out.outputs = data.outputs();
    out.lu = reg.coefficients.leftCols(p * out.inputs);
    out.gu = reg.coefficients.middleCols(p * out.inputs, f * out.inputs);
    out.ly = reg.coefficients.rightCols(p * out.outputs);
    return out;
  }
  const OneStepCoeffs coeffs =
      OneStepCoeffs::unpack(reg.coefficients, p, data.inputs(), data.outputs());
  return solve_final(assemble_tilde(coeffs, f));
}

PredictiveController::PredictiveController(ControllerSettings settings,
                                           std::optional<StateSpaceModel> model)
    : settings_(std::move(settings)), model_(std::move(model)) {
  if (settings_.kind == ControllerKind::kOracle && !model_)
    throw InvalidArgumentError("PredictiveController: the oracle needs the true model");
  if (settings_.p < 1 || settings_.f < 1)
    throw InvalidArgumentError("PredictiveController: p and f must be positive");
  settings_.weights.validate();
  settings_.constraints.validate();
}

PredictorMatrices PredictiveController::fit(const SignalLog& log, Index k) {
  // The window ends at k: every sample used precedes the first predicted one.
  if (k > static_cast<Index>(log.size()))
    throw InvalidArgumentError("PredictiveController: log shorter than the current step");
  bool ill = false;
  try {
    PredictorMatrices m = fit_predictor(settings_.kind, log, k, settings_.nbar, settings_.p,
                                        settings_.f, settings_.fit, &ill);
    if (ill) ++stats_.ill_conditioned_fits;
    stats_.last_window_end = k;
    return m;
  } catch (const InsufficientDataError&) {
    throw;
  } catch (const std::exception&) {
    if (!predictor_) throw;
    ++stats_.reused_predictors;
    return *predictor_;
  }
}

Vector PredictiveController::operator()(const ControlContext& ctx) {
  using clock = std::chrono::steady_clock;
  const auto t0 = settings_.record_timing ? clock::now() : clock::time_point{};
  const SignalLog& log = ctx.log;
  const Index k = ctx.step;
  if (k != static_cast<Index>(log.size()))
    throw InvalidArgumentError("PredictiveController: context step does not match the log");
  const Vector reference = ctx.reference_preview(settings_.f);
  const Vector u_prev =
      k > 0 ? log.u()[static_cast<std::size_t>(k - 1)] : Vector::Zero(log.inputs());

  if (settings_.kind == ControllerKind::kOracle) {
    decision_ = oracle_mpc_step(*model_, ctx.state, reference, settings_.weights,
                                settings_.constraints, u_prev, settings_.qp_tolerance);
  } else {
    predictor_ = fit(log, k);
    const Vector u_past = past_window(log.u(), k, settings_.p);
    const Vector y_past = past_window(log.y(), k, settings_.p);
    const QpProblem qp = build_tracking_qp(*predictor_, u_past, y_past, reference,
                                           settings_.weights, settings_.constraints, u_prev);
    decision_ = solve_tracking(qp, settings_.weights.lambda_slack, settings_.qp_tolerance);
  }
  if (decision_.status != DecisionStatus::kFeasibleHard) ++stats_.softened_solves;
  ++stats_.steps;
  if (settings_.record_timing)
    stats_.solve_ms += std::chrono::duration<double, std::milli>(clock::now() - t0).count();
  return decision_.u_next;
}

}  // namespace cldeepc
