#include "cldeepc/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <thread>

#include "cldeepc/data_matrices.hpp"
#include "cldeepc/errors.hpp"

namespace cldeepc {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<double> channel(const std::vector<Vector>& signal, Index from, Index to, Index ch = 0) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(std::max<Index>(0, to - from)));
  for (Index k = from; k < to; ++k) out.push_back(signal[static_cast<std::size_t>(k)](ch));
  return out;
}

int controller_rank(ControllerKind kind) {
  for (std::size_t i = 0; i < kAllControllers.size(); ++i)
    if (kAllControllers[i] == kind) return static_cast<int>(i);
  return static_cast<int>(kAllControllers.size());
}

}  // namespace

void ExperimentConfig::validate() const {
  if (p < 1 || f < 1) throw InvalidArgumentError("config: p and f must be positive");
  if (nbar < static_cast<Index>(p) + f + 1)
    throw InvalidArgumentError("config: nbar = " + std::to_string(nbar) +
                               " is below p + f + 1 = " + std::to_string(p + f + 1));
  if (steps <= 0) throw InvalidArgumentError("config: steps must be positive");
  if (realizations < 1) throw InvalidArgumentError("config: realizations must be positive");
  if (!(noise_variance >= 0.0) || !(input_variance >= 0.0))
    throw InvalidArgumentError("config: variances must be nonnegative");
  if (threads < 0) throw InvalidArgumentError("config: threads must be nonnegative");
  if (!(max_condition > 1.0)) throw InvalidArgumentError("config: max_condition must exceed 1");
  ControllerWeights::uniform(f, 1, 1, q_weight, r_weight, r_delta_weight, lambda_slack);
  BoxConstraints::uniform(1, 1, du_max, u_max, y_max);
}

ControllerSettings ExperimentConfig::controller_settings(ControllerKind kind, int outputs,
                                                         int inputs) const {
  ControllerSettings s;
  s.kind = kind;
  s.nbar = nbar;
  s.p = p;
  s.f = f;
  s.weights =
      ControllerWeights::uniform(f, inputs, outputs, q_weight, r_weight, r_delta_weight, lambda_slack);
  s.constraints = BoxConstraints::uniform(inputs, outputs, du_max, u_max, y_max);
  s.fit.max_condition = max_condition;
  s.fit.minimum_norm_fallback = true;
  s.record_timing = record_timing;
  return s;
}

std::vector<double> square_wave_reference(Index steps, double high, Index half_period) {
  if (steps <= 0) throw InvalidArgumentError("square_wave_reference: steps must be positive");
  if (half_period <= 0) throw InvalidArgumentError("square_wave_reference: half period must be positive");
  std::vector<double> out(static_cast<std::size_t>(steps));
  for (Index k = 0; k < steps; ++k) out[static_cast<std::size_t>(k)] = (k / half_period) % 2 == 0 ? high : 0.0;
  return out;
}

double j_rms(std::span<const double> y, std::span<const double> r, Index skip) {
  if (y.size() != r.size()) throw DimensionError("j_rms: y and r differ in length");
  if (skip < 0 || skip >= static_cast<Index>(y.size()))
    throw InvalidArgumentError("j_rms: skip must be below the signal length");
  double num = 0.0, den = 0.0;
  for (std::size_t k = static_cast<std::size_t>(skip); k < y.size(); ++k) {
    num += (y[k] - r[k]) * (y[k] - r[k]);
    den += r[k] * r[k];
  }
  if (den == 0.0) throw InvalidArgumentError("j_rms: reference has zero energy");
  return std::sqrt(num / den);
}

std::uint64_t noise_seed(const ExperimentConfig& config, int realization) {
  return config.base_seed + static_cast<std::uint64_t>(realization);
}

std::uint64_t input_seed(const ExperimentConfig& config, int realization) {
  return config.base_seed + 1000000ULL + static_cast<std::uint64_t>(realization);
}

TrackingRun run_tracking(const ExperimentConfig& config, int realization) {
  config.validate();
  const StateSpaceModel model = benchmark_system();
  const int n = model.states(), r = model.inputs(), l = model.outputs();

  TrackingRun run;
  run.controller = config.controller;
  run.realization = realization;
  run.seed = noise_seed(config, realization);
  run.closed_loop_start = config.nbar;

  Simulator sim(model, NoiseProcess(run.seed, config.noise_variance, l), Vector::Zero(n));
  NoiseProcess excitation(input_seed(config, realization), config.input_variance, r);
  const Vector r_zero = Vector::Zero(l);
  for (Index k = 0; k < config.nbar; ++k) sim.advance(excitation.draw(), r_zero);

  const std::vector<double> wave = square_wave_reference(config.steps + config.f);
  std::vector<Vector> reference;
  reference.reserve(wave.size());
  for (double v : wave) reference.push_back(Vector::Constant(l, v));

  std::optional<StateSpaceModel> oracle_model;
  if (config.controller == ControllerKind::kOracle) oracle_model = model;
  PredictiveController controller(config.controller_settings(config.controller, l, r),
                                  oracle_model);
  run_closed_loop(sim, std::ref(controller), reference, config.steps);

  run.stats = controller.stats();
  run.final_predictor = controller.last_predictor();
  run.log = std::move(sim).take_log();

  const Index total = static_cast<Index>(run.log.size());
  if (config.steps > config.nbar) {
    const std::vector<double> y = channel(run.log.y(), config.nbar, total);
    run.j_rms = j_rms(y, std::span<const double>(wave).first(y.size()), config.nbar);
  } else {
    run.j_rms = kNaN;
  }
  return run;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const double pos = std::clamp(q, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return values[lo] + w * (values[hi] - values[lo]);
}

std::array<double, 5> percentile_summary(const std::vector<double>& values) {
  std::array<double, 5> out{};
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = percentile(values, kPercentileLevels[i]);
  return out;
}

CorrelationResult correlation_analysis(std::span<const SignalLog> logs, int p, int f_id,
                                       Index start) {
  if (logs.empty()) throw InvalidArgumentError("correlation_analysis: no logs");
  if (p < 1 || f_id < 1) throw InvalidArgumentError("correlation_analysis: p and f_ID must be positive");
  CorrelationResult out;
  Matrix sum, sum_sq;
  for (const SignalLog& log : logs) {
    const Index n_cols = static_cast<Index>(log.size()) - start - p - f_id + 1;
    if (start < 0 || n_cols < 1)
      throw InsufficientDataError("correlation_analysis: only " +
                                  std::to_string(static_cast<Index>(log.size()) - start) +
                                  " closed-loop samples, need at least p + f_ID = " +
                                  std::to_string(p + f_id));
    const Matrix ef = block_hankel(log.e(), start + p, f_id, n_cols).matrix();
    Matrix u(static_cast<Index>(p + f_id) * log.inputs(), n_cols);
    u.topRows(static_cast<Index>(p) * log.inputs()) = block_hankel(log.u(), start, p, n_cols).matrix();
    u.bottomRows(static_cast<Index>(f_id) * log.inputs()) =
        block_hankel(log.u(), start + p, f_id, n_cols).matrix();
    const Matrix c = ef * u.transpose();
    if (sum.size() == 0) {
      sum = Matrix::Zero(c.rows(), c.cols());
      sum_sq = Matrix::Zero(c.rows(), c.cols());
      out.columns = n_cols;
    } else if (c.rows() != sum.rows() || c.cols() != sum.cols()) {
      throw DimensionError("correlation_analysis: logs differ in channel counts");
    }
    sum += c;
    sum_sq += c.cwiseAbs2();
    out.columns = std::min(out.columns, n_cols);
  }
  const double count = static_cast<double>(logs.size());
  out.realizations = static_cast<Index>(logs.size());
  out.mean = sum / count;
  if (logs.size() > 1) {
    const Matrix var = ((sum_sq - count * out.mean.cwiseAbs2()) / (count - 1.0)).cwiseMax(0.0);
    out.standard_error = (var / count).cwiseSqrt();
  } else {
    out.standard_error = Matrix::Zero(out.mean.rows(), out.mean.cols());
  }
  return out;
}

double tu_error(const PredictorMatrices& predictor, const StateSpaceModel& model) {
  const Matrix tu = block_toeplitz(model.a(), model.b(), model.c(), model.d(), predictor.horizon);
  if (tu.rows() != predictor.gu.rows() || tu.cols() != predictor.gu.cols())
    throw DimensionError("tu_error: predictor does not match the model");
  return (predictor.gu - tu).norm();
}

SweepAxis parse_sweep_axis(std::string_view text) {
  if (text == "nbar") return SweepAxis::kNbar;
  if (text == "noise" || text == "noise_var") return SweepAxis::kNoise;
  if (text == "pf") return SweepAxis::kPf;
  throw InvalidArgumentError("unknown sweep axis '" + std::string(text) +
                             "' (expected nbar, noise or pf)");
}

const char* to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kNbar: return "nbar";
    case SweepAxis::kNoise: return "noise";
    case SweepAxis::kPf: return "pf";
  }
  return "unknown";
}

void append_runs(MetricsReport& report, double axis_value, std::span<const TrackingRun> runs) {
  for (const TrackingRun& run : runs) {
    RealizationRecord rec;
    rec.axis_value = axis_value;
    rec.seed = run.seed;
    rec.controller = run.controller;
    rec.j_rms = run.j_rms;
    rec.solve_failures = run.stats.softened_solves;
    if (run.stats.steps > 0 && run.stats.solve_ms > 0.0)
      rec.mean_solve_ms = run.stats.solve_ms / static_cast<double>(run.stats.steps);
    report.realizations.push_back(std::move(rec));
  }
}

void summarize(MetricsReport& report) {
  using Key = std::pair<double, int>;
  std::map<Key, std::vector<double>> jr, bias;
  for (const RealizationRecord& rec : report.realizations) {
    auto& bucket = jr[{rec.axis_value, controller_rank(rec.controller)}];
    if (rec.error.empty() && std::isfinite(rec.j_rms)) bucket.push_back(rec.j_rms);
  }
  for (const BiasRecord& rec : report.bias) {
    auto& bucket = bias[{rec.nbar, controller_rank(rec.controller)}];
    if (std::isfinite(rec.error)) bucket.push_back(rec.error);
  }
  auto fill = [](const std::map<Key, std::vector<double>>& groups, std::vector<PercentileRow>& rows) {
    rows.clear();
    for (const auto& [key, vals] : groups) {
      PercentileRow row;
      row.axis_value = key.first;
      row.controller = kAllControllers[static_cast<std::size_t>(key.second)];
      row.count = static_cast<Index>(vals.size());
      row.values = percentile_summary(vals);
      rows.push_back(row);
    }
  };
  fill(jr, report.percentiles);
  fill(bias, report.bias_percentiles);
}

MetricsReport sweep(const ExperimentConfig& config, SweepAxis axis, std::span<const double> values,
                    std::span<const ControllerKind> controllers) {
  if (values.empty()) throw InvalidArgumentError("sweep: no axis values");
  if (controllers.empty()) throw InvalidArgumentError("sweep: no controllers");
  std::vector<ExperimentConfig> cells;
  for (double v : values) {
    ExperimentConfig c = config;
    switch (axis) {
      case SweepAxis::kNbar:
        if (v < 1.0 || v != std::floor(v)) throw InvalidArgumentError("sweep: nbar values must be positive integers");
        c.nbar = static_cast<Index>(v);
        break;
      case SweepAxis::kNoise:
        c.noise_variance = v;
        break;
      case SweepAxis::kPf:
        if (v < 1.0 || v != std::floor(v)) throw InvalidArgumentError("sweep: pf values must be positive integers");
        c.p = c.f = static_cast<int>(v);
        break;
    }
    c.validate();
    cells.push_back(c);
  }

  const std::size_t nc = controllers.size();
  const std::size_t nr = static_cast<std::size_t>(config.realizations);
  const std::size_t total = cells.size() * nr * nc;
  std::vector<RealizationRecord> records(total);
  parallel_for(total, config.threads, [&](std::size_t idx) {
    const std::size_t vi = idx / (nr * nc);
    const int real = static_cast<int>((idx / nc) % nr);
    ExperimentConfig c = cells[vi];
    c.controller = controllers[idx % nc];
    RealizationRecord& rec = records[idx];
    rec.axis_value = values[vi];
    rec.seed = noise_seed(c, real);
    rec.controller = c.controller;
    try {
      const TrackingRun run = run_tracking(c, real);
      rec.j_rms = run.j_rms;
      rec.solve_failures = run.stats.softened_solves;
      if (c.record_timing && run.stats.steps > 0)
        rec.mean_solve_ms = run.stats.solve_ms / static_cast<double>(run.stats.steps);
    } catch (const std::exception& ex) {
      rec.j_rms = kNaN;
      rec.error = ex.what();
    }
  });

  MetricsReport report;
  report.axis = to_string(axis);
  report.realizations = std::move(records);
  std::stable_sort(report.realizations.begin(), report.realizations.end(),
                   [](const RealizationRecord& a, const RealizationRecord& b) {
                     if (a.axis_value != b.axis_value) return a.axis_value < b.axis_value;
                     if (a.controller != b.controller)
                       return controller_rank(a.controller) < controller_rank(b.controller);
                     return a.seed < b.seed;
                   });
  summarize(report);
  return report;
}

MetricsReport bias_analysis(const ExperimentConfig& config, std::span<const double> nbar_values) {
  if (nbar_values.empty()) throw InvalidArgumentError("bias_analysis: no nbar values");
  constexpr std::array<ControllerKind, 2> kinds{ControllerKind::kDeePC, ControllerKind::kClDeePC};
  std::vector<ExperimentConfig> cells;
  for (double v : nbar_values) {
    if (v < 1.0 || v != std::floor(v)) throw InvalidArgumentError("bias_analysis: nbar values must be positive integers");
    ExperimentConfig c = config;
    c.nbar = static_cast<Index>(v);
    c.validate();
    if (c.steps < c.nbar)
      throw InvalidArgumentError("bias_analysis: steps = " + std::to_string(c.steps) +
                                 " is below nbar = " + std::to_string(c.nbar) +
                                 "; the final window would include open-loop data");
    cells.push_back(c);
  }
  const StateSpaceModel model = benchmark_system();
  const std::size_t nr = static_cast<std::size_t>(config.realizations);
  const std::size_t total = cells.size() * nr * kinds.size();
  std::vector<BiasRecord> bias(total);
  std::vector<RealizationRecord> records(total);
  parallel_for(total, config.threads, [&](std::size_t idx) {
    const std::size_t vi = idx / (nr * kinds.size());
    const int real = static_cast<int>((idx / kinds.size()) % nr);
    ExperimentConfig c = cells[vi];
    c.controller = kinds[idx % kinds.size()];
    const ControllerSettings settings = c.controller_settings(c.controller);
    BiasRecord& b = bias[idx];
    RealizationRecord& rec = records[idx];
    b.nbar = rec.axis_value = static_cast<double>(c.nbar);
    b.seed = rec.seed = noise_seed(c, real);
    b.controller = rec.controller = c.controller;
    try {
      const TrackingRun run = run_tracking(c, real);
      rec.j_rms = run.j_rms;
      rec.solve_failures = run.stats.softened_solves;
      const PredictorMatrices est = fit_predictor(c.controller, run.log,
                                                  static_cast<Index>(run.log.size()), c.nbar, c.p,
                                                  c.f, settings.fit);
      b.error = tu_error(est, model);
    } catch (const std::exception& ex) {
      rec.j_rms = kNaN;
      rec.error = ex.what();
      b.error = kNaN;
    }
  });
  MetricsReport report;
  report.axis = "nbar";
  report.realizations = std::move(records);
  report.bias = std::move(bias);
  summarize(report);
  return report;
}

MetricsReport correlation_study(const ExperimentConfig& config) {
  constexpr std::array<ControllerKind, 2> kinds{ControllerKind::kDeePC, ControllerKind::kClDeePC};
  const std::size_t nr = static_cast<std::size_t>(config.realizations);
  std::vector<TrackingRun> runs(nr * kinds.size());
  parallel_for(runs.size(), config.threads, [&](std::size_t idx) {
    ExperimentConfig c = config;
    c.controller = kinds[idx % kinds.size()];
    runs[idx] = run_tracking(c, static_cast<int>(idx / kinds.size()));
  });
  MetricsReport report;
  report.axis = "none";
  append_runs(report, 0.0, runs);
  for (std::size_t ki = 0; ki < kinds.size(); ++ki) {
    std::vector<SignalLog> logs;
    for (std::size_t i = ki; i < runs.size(); i += kinds.size()) logs.push_back(runs[i].log);
    CorrelationResult cr = correlation_analysis(logs, config.p,
                                                identification_block(kinds[ki], config.f), config.nbar);
    cr.controller = kinds[ki];
    report.correlations.push_back(std::move(cr));
  }
  std::stable_sort(report.realizations.begin(), report.realizations.end(),
                   [](const RealizationRecord& a, const RealizationRecord& b) {
                     if (a.controller != b.controller)
                       return controller_rank(a.controller) < controller_rank(b.controller);
                     return a.seed < b.seed;
                   });
  summarize(report);
  return report;
}

void parallel_for(std::size_t count, int threads, const std::function<void(std::size_t)>& fn) {
  if (count == 0) return;
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr first;
  std::mutex guard;
  auto body = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(guard);
        if (!first) first = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    body();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(body);
  }
  if (first) std::rethrow_exception(first);
}

}  // namespace cldeepc
