#include "cldeepc/experiments.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

#include "cldeepc/errors.hpp"

namespace cldeepc {

namespace {

// Shortest round-trip representation, independent of stream state.
std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("emit_report: cannot open " + path.string() + " for writing");
  return out;
}

void close_csv(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw std::runtime_error("emit_report: write to " + path.string() + " failed");
}

void write_percentiles(const std::filesystem::path& path, const char* axis,
                       const std::vector<PercentileRow>& rows) {
  std::ofstream out = open_csv(path);
  out << axis << ",controller,count,p10,p30,p50,p70,p90\n";
  for (const PercentileRow& row : rows) {
    out << fmt(row.axis_value) << ',' << to_string(row.controller) << ',' << row.count;
    for (double v : row.values) out << ',' << fmt(v);
    out << '\n';
  }
  close_csv(out, path);
}

void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out = open_csv(path);
  out << "row,col,value\n";
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) out << i << ',' << j << ',' << fmt(m(i, j)) << '\n';
  close_csv(out, path);
}

}  // namespace

void emit_report(const MetricsReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("emit_report: cannot create " + dir.string() + ": " + ec.message());

  {
    const auto path = dir / "realizations.csv";
    std::ofstream out = open_csv(path);
    out << "axis_value,seed,controller,j_rms,solve_failures,mean_solve_ms\n";
    for (const RealizationRecord& rec : report.realizations) {
      out << fmt(rec.axis_value) << ',' << rec.seed << ',' << to_string(rec.controller) << ','
          << fmt(rec.j_rms) << ',' << rec.solve_failures << ',';
      if (rec.mean_solve_ms) out << fmt(*rec.mean_solve_ms);
      out << '\n';
    }
    close_csv(out, path);
  }
  write_percentiles(dir / "percentiles.csv", "axis_value", report.percentiles);
  {
    const auto path = dir / "bias.csv";
    std::ofstream out = open_csv(path);
    out << "nbar,seed,controller,tu_error\n";
    for (const BiasRecord& rec : report.bias)
      out << fmt(rec.nbar) << ',' << rec.seed << ',' << to_string(rec.controller) << ','
          << fmt(rec.error) << '\n';
    close_csv(out, path);
  }
  write_percentiles(dir / "bias_percentiles.csv", "nbar", report.bias_percentiles);
  for (const CorrelationResult& cr : report.correlations) {
    const std::string stem = std::string("correlation_") + to_string(cr.controller);
    write_matrix(dir / (stem + "_mean.csv"), cr.mean);
    write_matrix(dir / (stem + "_stderr.csv"), cr.standard_error);
  }
}

}  // namespace cldeepc
