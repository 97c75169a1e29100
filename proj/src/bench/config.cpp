#include "cmelr/bench.hpp"
#include "cmelr/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace cmelr {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> items;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) items.push_back(item);
  }
  return items;
}

double to_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != value.size() || used == 0) throw Error(ErrorCode::InvalidInput, key + ": not a number '" + value + "'");
  return out;
}

long long to_integer(const std::string& key, const std::string& value) {
  // Accepts 1e4 style as long as it is integral.
  const double v = to_double(key, value);
  if (v != std::floor(v)) throw Error(ErrorCode::InvalidInput, key + ": not an integer '" + value + "'");
  return static_cast<long long>(v);
}

bool is_lambda_rule(const std::string& rule) { return rule == "n^-1/2" || rule == "n^{-1/2}"; }

}  // namespace

void ExperimentConfig::validate() const {
  if (n_grid.empty() || maturities.empty()) throw Error(ErrorCode::InvalidCount, "n_grid and maturities must be non-empty");
  if (n_grid.size() > 4 || maturities.size() > 4) {
    throw Error(ErrorCode::IndexOutOfRange, "the seed scheme supports at most 4 path counts and 4 maturities");
  }
  for (auto n : n_grid)
    if (n < 2) throw Error(ErrorCode::InvalidCount, "path counts must be >= 2");
  for (double t : maturities)
    if (!(t > 0.0)) throw Error(ErrorCode::InvalidMaturity, "maturities must be > 0");
  if (moneyness_count < 2) throw Error(ErrorCode::InvalidCount, "moneyness_count must be >= 2");
  if (replications < 1) throw Error(ErrorCode::InvalidCount, "replications must be >= 1");
  if (!(epsilon > 0.0)) throw Error(ErrorCode::InvalidTolerance, "epsilon must be > 0");
  if (!is_lambda_rule(lambda_rule)) throw Error(ErrorCode::InvalidInput, "unsupported lambda_rule '" + lambda_rule + "'");
  if (methods.empty()) throw Error(ErrorCode::InvalidCount, "at least one method is required");
  for (auto m : methods) {
    if (m != PricingMethod::CmeLowRank && m != PricingMethod::LongstaffSchwartz) {
      throw Error(ErrorCode::InvalidInput, "bench methods are cme_lr and ls");
    }
  }
  if (reference_paths < 2) throw Error(ErrorCode::InvalidCount, "reference_paths must be >= 2");
  heston.validate();
}

double ExperimentConfig::lambda_for(Eigen::Index n) const { return 1.0 / std::sqrt(static_cast<double>(n)); }

void apply_config_value(ExperimentConfig& config, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "n_grid") {
    config.n_grid.clear();
    for (const auto& item : split_list(value)) config.n_grid.push_back(to_integer(key, item));
  } else if (key == "maturities") {
    config.maturities.clear();
    for (const auto& item : split_list(value)) config.maturities.push_back(to_double(key, item));
  } else if (key == "moneyness_count") {
    config.moneyness_count = static_cast<int>(to_integer(key, value));
  } else if (key == "replications") {
    config.replications = static_cast<int>(to_integer(key, value));
  } else if (key == "lambda_rule") {
    config.lambda_rule = value;
  } else if (key == "epsilon") {
    config.epsilon = to_double(key, value);
  } else if (key == "tolerance_policy") {
    config.policy = tolerance_policy_from_string(value);
  } else if (key == "methods") {
    config.methods.clear();
    for (const auto& item : split_list(value)) config.methods.push_back(pricing_method_from_string(item));
  } else if (key == "output_dir") {
    config.output_dir = value;
  } else if (key == "reference_paths") {
    config.reference_paths = to_integer(key, value);
  } else if (key == "reference_file") {
    config.reference_file = value;
  } else if (key == "s0") {
    config.heston.s0 = to_double(key, value);
  } else if (key == "v0") {
    config.heston.v0 = to_double(key, value);
  } else if (key == "r") {
    config.heston.r = to_double(key, value);
  } else if (key == "kappa") {
    config.heston.kappa = to_double(key, value);
  } else if (key == "theta") {
    config.heston.theta = to_double(key, value);
  } else if (key == "xi") {
    config.heston.xi = to_double(key, value);
  } else if (key == "rho") {
    config.heston.rho = to_double(key, value);
  } else {
    throw Error(ErrorCode::InvalidInput, "unknown config key '" + key + "'");
  }
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  std::stringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::InvalidInput, "config line " + std::to_string(line_no) + ": expected key = value");
    }
    apply_config_value(base, trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& file, ExperimentConfig base) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + file.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str(), std::move(base));
}

std::vector<double> log_moneyness_grid(int count) {
  if (count < 2) throw Error(ErrorCode::InvalidCount, "strike count must be >= 2");
  std::vector<double> m(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) m[static_cast<std::size_t>(i)] = -2.0 + 4.0 * i / (count - 1);
  return m;
}

std::vector<double> strike_grid(double s0, double v0, double maturity, int count) {
  if (!(s0 > 0.0) || !(v0 >= 0.0) || !(maturity > 0.0)) throw Error(ErrorCode::InvalidInput, "strike grid inputs out of range");
  std::vector<double> strikes;
  const double scale = std::sqrt(v0) * std::sqrt(maturity);
  for (double m : log_moneyness_grid(count)) strikes.push_back(s0 * std::exp(m * scale));
  return strikes;
}

}  // namespace cmelr
