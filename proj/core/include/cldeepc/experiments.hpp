#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cldeepc/controllers.hpp"
#include "cldeepc/lti_plant.hpp"

namespace cldeepc {

struct ExperimentConfig {
  ControllerKind controller = ControllerKind::kClDeePC;
  Index nbar = 500;
  int p = 20;
  int f = 20;
  double q_weight = 100.0;
  double r_weight = 0.0;
  double r_delta_weight = 10.0;
  double lambda_slack = 1e15;
  double du_max = 3.75;
  double u_max = 15.0;
  double y_max = 1000.0;
  double noise_variance = 1.0;
  double input_variance = 1.0;
  Index steps = 1800;
  int realizations = 20;
  std::uint64_t base_seed = 1;
  std::string output_dir = "out";
  int threads = 0;  ///< 0: hardware concurrency
  bool record_timing = false;
  double max_condition = 1e12;

  void validate() const;
  int f_id() const { return identification_block(controller, f); }
  ControllerSettings controller_settings(ControllerKind kind, int outputs = 1,
                                         int inputs = 1) const;
};

/// Flat `key = value` text using the field names above; `#` starts a
/// comment. Unknown keys and malformed values throw InvalidArgumentError.
ExperimentConfig load_config(std::istream& in, ExperimentConfig base = {});
ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base = {});
void apply_config_entry(ExperimentConfig& config, std::string_view key, std::string_view value);
void write_config(std::ostream& out, const ExperimentConfig& config);

/// 100 for 100 samples, then 0 for 100 samples, repeated.
std::vector<double> square_wave_reference(Index steps, double high = 100.0,
                                          Index half_period = 100);

/// sqrt(sum (y - r)^2 / sum r^2) over samples k >= skip.
double j_rms(std::span<const double> y, std::span<const double> r, Index skip);

std::uint64_t noise_seed(const ExperimentConfig& config, int realization);
std::uint64_t input_seed(const ExperimentConfig& config, int realization);

struct TrackingRun {
  ControllerKind controller = ControllerKind::kClDeePC;
  int realization = 0;
  std::uint64_t seed = 0;
  Index closed_loop_start = 0;  ///< == nbar
  SignalLog log;
  double j_rms = 0.0;  ///< NaN when steps <= nbar
  ControllerStats stats;
  std::optional<PredictorMatrices> final_predictor;
};

/// nbar open-loop samples with Gaussian input, then `steps` adaptive
/// closed-loop samples tracking the square wave.
TrackingRun run_tracking(const ExperimentConfig& config, int realization = 0);

struct RealizationRecord {
  double axis_value = 0.0;
  std::uint64_t seed = 0;
  ControllerKind controller = ControllerKind::kClDeePC;
  double j_rms = 0.0;
  Index solve_failures = 0;
  std::optional<double> mean_solve_ms;
  std::string error;  ///< nonempty for a failed cell
};

struct PercentileRow {
  double axis_value = 0.0;
  ControllerKind controller = ControllerKind::kClDeePC;
  Index count = 0;
  std::array<double, 5> values{};  ///< 10th, 30th, 50th, 70th, 90th
};

struct BiasRecord {
  double nbar = 0.0;
  std::uint64_t seed = 0;
  ControllerKind controller = ControllerKind::kClDeePC;
  double error = 0.0;
};

struct CorrelationResult {
  ControllerKind controller = ControllerKind::kClDeePC;
  Index realizations = 0;
  Index columns = 0;
  Matrix mean;
  Matrix standard_error;
};

struct MetricsReport {
  std::string axis = "none";
  std::vector<RealizationRecord> realizations;
  std::vector<PercentileRow> percentiles;
  std::vector<BiasRecord> bias;
  std::vector<PercentileRow> bias_percentiles;
  std::vector<CorrelationResult> correlations;
};

inline constexpr std::array<double, 5> kPercentileLevels{10.0, 30.0, 50.0, 70.0, 90.0};

/// Linear interpolation between order statistics; q in [0, 100].
double percentile(std::vector<double> values, double q);
std::array<double, 5> percentile_summary(const std::vector<double>& values);

/// Mean and standard error over realizations of E_f [U_p; U_f]^T, each
/// built from the samples of one log starting at `start`.
CorrelationResult correlation_analysis(std::span<const SignalLog> logs, int p, int f_id,
                                       Index start);

/// |T^_f - T_f|_F for the future-input block of a predictor.
double tu_error(const PredictorMatrices& predictor, const StateSpaceModel& model);

enum class SweepAxis { kNbar, kNoise, kPf };
SweepAxis parse_sweep_axis(std::string_view text);
const char* to_string(SweepAxis axis);

inline constexpr std::array<ControllerKind, 3> kAllControllers{
    ControllerKind::kDeePC, ControllerKind::kClDeePC, ControllerKind::kOracle};

/// One run per (value, realization, controller), all controllers on shared
/// seeds. For kPf both p and f are set. A failed cell is recorded.
MetricsReport sweep(const ExperimentConfig& config, SweepAxis axis, std::span<const double> values,
                    std::span<const ControllerKind> controllers = kAllControllers);

/// |T^_f - T_f|_F per run, T^_f refitted on the final nbar samples (all
/// closed-loop), for each nbar and both data-driven controllers. Requires
/// steps >= nbar.
MetricsReport bias_analysis(const ExperimentConfig& config, std::span<const double> nbar_values);

/// Closed-loop correlation matrices for DeePC and CL-DeePC (f_ID per kind).
MetricsReport correlation_study(const ExperimentConfig& config);

/// Per-realization J_rms table and summary for a list of finished runs.
void append_runs(MetricsReport& report, double axis_value, std::span<const TrackingRun> runs);
void summarize(MetricsReport& report);

/// realizations.csv, percentiles.csv, bias.csv, bias_percentiles.csv and
/// correlation_<controller>_{mean,stderr}.csv in `dir`.
void emit_report(const MetricsReport& report, const std::filesystem::path& dir);

/// Runs fn(0..count-1) on up to `threads` workers (0: hardware
/// concurrency). The first exception is rethrown after all workers join.
void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn);

}  // namespace cldeepc
