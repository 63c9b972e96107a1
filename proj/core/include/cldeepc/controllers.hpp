#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "cldeepc/lti_plant.hpp"
#include "cldeepc/predictors.hpp"
#include "cldeepc/qp_control.hpp"

namespace cldeepc {

enum class ControllerKind { kDeePC, kClDeePC, kOracle };

const char* to_string(ControllerKind kind);
ControllerKind parse_controller_kind(std::string_view text);

/// Block length of the identification regression: f for DeePC, 1 otherwise.
int identification_block(ControllerKind kind, int f);

struct ControllerSettings {
  ControllerKind kind = ControllerKind::kClDeePC;
  Index nbar = 500;
  int p = 20;
  int f = 20;
  ControllerWeights weights;
  BoxConstraints constraints;
  FitOptions fit;
  double qp_tolerance = 1e-9;
  bool record_timing = false;
};

struct ControllerStats {
  Index steps = 0;
  Index softened_solves = 0;      ///< hard QP infeasible, slacks used
  Index ill_conditioned_fits = 0;  ///< minimum-norm solution used
  Index reused_predictors = 0;     ///< fit failed, previous predictor kept
  Index last_window_end = -1;      ///< one past the newest sample used
  double solve_ms = 0.0;           ///< summed only when timing is enabled
};

/// Receding-horizon controller that refits its predictor on the latest
/// nbar samples every step (data-driven kinds) or uses the true model and
/// state (oracle). Callable as a ControlLaw.
class PredictiveController {
 public:
  PredictiveController(ControllerSettings settings, std::optional<StateSpaceModel> model = {});

  Vector operator()(const ControlContext& ctx);

  const ControllerSettings& settings() const noexcept { return settings_; }
  const ControllerStats& stats() const noexcept { return stats_; }
  const std::optional<PredictorMatrices>& last_predictor() const noexcept { return predictor_; }
  const ControlDecision& last_decision() const noexcept { return decision_; }

 private:
  PredictorMatrices fit(const SignalLog& log, Index k);

  ControllerSettings settings_;
  std::optional<StateSpaceModel> model_;
  std::optional<PredictorMatrices> predictor_;
  ControlDecision decision_;
  ControllerStats stats_;
};

/// Predictor fitted by a data-driven controller kind on samples [end - nbar, end).
/// Sets *ill_conditioned when the minimum-norm solution was used.
PredictorMatrices fit_predictor(ControllerKind kind, const SignalLog& log, Index end, Index nbar,
                                int p, int f, const FitOptions& options,
                                bool* ill_conditioned = nullptr);

/// Stacked u_{k-p}..u_{k-1} (or y) from a log.
Vector past_window(const std::vector<Vector>& signal, Index k, int p);

}  // namespace cldeepc
