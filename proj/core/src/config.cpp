#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "cldeepc/errors.hpp"
#include "cldeepc/experiments.hpp"

namespace cldeepc {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
    throw InvalidArgumentError("config: bad value '" + std::string(value) + "' for " +
                               std::string(key));
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw InvalidArgumentError("config: bad boolean '" + std::string(value) + "' for " +
                             std::string(key));
}

}  // namespace

void apply_config_entry(ExperimentConfig& c, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  if (key == "controller") c.controller = parse_controller_kind(value);
  else if (key == "nbar") c.nbar = parse_number<Index>(key, value);
  else if (key == "p") c.p = parse_number<int>(key, value);
  else if (key == "f") c.f = parse_number<int>(key, value);
  else if (key == "q_weight") c.q_weight = parse_number<double>(key, value);
  else if (key == "r_weight") c.r_weight = parse_number<double>(key, value);
  else if (key == "r_delta_weight") c.r_delta_weight = parse_number<double>(key, value);
  else if (key == "lambda_slack") c.lambda_slack = parse_number<double>(key, value);
  else if (key == "du_max") c.du_max = parse_number<double>(key, value);
  else if (key == "u_max") c.u_max = parse_number<double>(key, value);
  else if (key == "y_max") c.y_max = parse_number<double>(key, value);
  else if (key == "noise_variance") c.noise_variance = parse_number<double>(key, value);
  else if (key == "input_variance") c.input_variance = parse_number<double>(key, value);
  else if (key == "steps") c.steps = parse_number<Index>(key, value);
  else if (key == "realizations") c.realizations = parse_number<int>(key, value);
  else if (key == "base_seed") c.base_seed = parse_number<std::uint64_t>(key, value);
  else if (key == "output_dir") c.output_dir = std::string(value);
  else if (key == "threads") c.threads = parse_number<int>(key, value);
  else if (key == "record_timing") c.record_timing = parse_bool(key, value);
  else if (key == "max_condition") c.max_condition = parse_number<double>(key, value);
  else throw InvalidArgumentError("config: unknown key '" + std::string(key) + "'");
}

ExperimentConfig load_config(std::istream& in, ExperimentConfig base) {
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos)
      throw InvalidArgumentError("config: line " + std::to_string(number) + " has no '='");
    apply_config_entry(base, view.substr(0, eq), view.substr(eq + 1));
  }
  return base;
}

ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw InvalidArgumentError("config: cannot read " + path.string());
  return load_config(in, std::move(base));
}

void write_config(std::ostream& out, const ExperimentConfig& c) {
  out << "controller = " << to_string(c.controller) << '\n'
      << "nbar = " << c.nbar << '\n'
      << "p = " << c.p << '\n'
      << "f = " << c.f << '\n'
      << "q_weight = " << c.q_weight << '\n'
      << "r_weight = " << c.r_weight << '\n'
      << "r_delta_weight = " << c.r_delta_weight << '\n'
      << "lambda_slack = " << c.lambda_slack << '\n'
      << "du_max = " << c.du_max << '\n'
      << "u_max = " << c.u_max << '\n'
      << "y_max = " << c.y_max << '\n'
      << "noise_variance = " << c.noise_variance << '\n'
      << "input_variance = " << c.input_variance << '\n'
      << "steps = " << c.steps << '\n'
      << "realizations = " << c.realizations << '\n'
      << "base_seed = " << c.base_seed << '\n'
      << "output_dir = " << c.output_dir << '\n'
      << "threads = " << c.threads << '\n'
      << "record_timing = " << (c.record_timing ? "true" : "false") << '\n'
      << "max_condition = " << c.max_condition << '\n';
}

}  // namespace cldeepc
