#include "cmelr/market.hpp"

#include "cmelr/errors.hpp"
#include "cmelr/rng.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace cmelr {
namespace {

static_assert(std::endian::native == std::endian::little, "path files assume a little-endian host");

constexpr std::array<char, 4> kMagic = {'C', 'M', 'P', 'S'};
constexpr std::uint32_t kVersion = 1;

struct StepCoefficients {
  double dt;
  double sqrt_dt;
  double r;
  double kappa;
  double theta;
  double xi;
  double rho;
  double rho_bar;
};

StepCoefficients coefficients(const HestonParams& p, double dt) {
  return {dt, std::sqrt(dt), p.r, p.kappa, p.theta, p.xi, p.rho, std::sqrt(std::max(0.0, 1.0 - p.rho * p.rho))};
}

// One full-truncation Euler step. z_v drives the variance, z_s = rho z_v + rho_bar z_perp the price.
inline void euler_step(const StepCoefficients& c, double z_v, double z_perp, double& log_s, double& v) {
  const double v_plus = std::max(v, 0.0);
  const double vol = std::sqrt(v_plus) * c.sqrt_dt;
  const double z_s = c.rho * z_v + c.rho_bar * z_perp;
  log_s += (c.r - 0.5 * v_plus) * c.dt + vol * z_s;
  v = std::max(v + c.kappa * (c.theta - v_plus) * c.dt + c.xi * vol * z_v, kVarianceFloor);
}

void check_inputs(const HestonParams& params, Eigen::Index n_paths, double maturity, int n_steps) {
  params.validate();
  if (n_paths < 1) throw Error(ErrorCode::InvalidParams, "n_paths must be >= 1");
  if (!(maturity > 0.0) || !std::isfinite(maturity)) throw Error(ErrorCode::InvalidMaturity, "maturity must be > 0");
  if (n_steps < 1) throw Error(ErrorCode::InvalidParams, "n_steps must be >= 1");
}

PathSet allocate(const HestonParams& params, Eigen::Index n_paths, double maturity, int n_steps,
                 std::uint64_t seed) {
  PathSet paths;
  paths.log_prices.resize(n_paths, n_steps + 1);
  paths.variances.resize(n_paths, n_steps + 1);
  paths.log_prices.col(0).setConstant(std::log(params.s0));
  paths.variances.col(0).setConstant(std::max(params.v0, kVarianceFloor));
  paths.dt = maturity / n_steps;
  paths.rate = params.r;
  paths.seed = seed;
  return paths;
}

void simulate_path(const StepCoefficients& c, const NormalStream& stream, int n_steps, PathSet& paths,
                   Eigen::Index i) {
  double log_s = paths.log_prices(i, 0);
  double v = paths.variances(i, 0);
  for (int k = 0; k < n_steps; ++k) {
    const auto [z_v, z_perp] = stream.normal_pair(static_cast<std::uint64_t>(k));
    euler_step(c, z_v, z_perp, log_s, v);
    paths.log_prices(i, k + 1) = log_s;
    paths.variances(i, k + 1) = v;
  }
}

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw Error(ErrorCode::IoError, "truncated path file");
  return value;
}

}  // namespace

void HestonParams::validate() const {
  if (!(s0 > 0.0)) throw Error(ErrorCode::InvalidParams, "s0 must be > 0");
  if (!(v0 >= 0.0)) throw Error(ErrorCode::InvalidParams, "v0 must be >= 0");
  if (!std::isfinite(r)) throw Error(ErrorCode::InvalidParams, "r must be finite");
  if (!(kappa >= 0.0)) throw Error(ErrorCode::InvalidParams, "kappa must be >= 0");
  if (!(theta >= 0.0)) throw Error(ErrorCode::InvalidParams, "theta must be >= 0");
  if (!(xi >= 0.0)) throw Error(ErrorCode::InvalidParams, "xi must be >= 0");
  if (!(rho >= -1.0 && rho <= 1.0)) throw Error(ErrorCode::InvalidParams, "rho must lie in [-1, 1]");
}

int monitoring_steps(double maturity) {
  if (!(maturity > 0.0) || !std::isfinite(maturity)) throw Error(ErrorCode::InvalidMaturity, "maturity must be > 0");
  return std::max(20, static_cast<int>(std::floor(52.0 * maturity)));
}

std::uint64_t experiment_seed(std::uint64_t rep, std::uint64_t n_index, std::uint64_t t_index) {
  if (n_index >= 4 || t_index >= 4) throw Error(ErrorCode::IndexOutOfRange, "grid indices must be < 4");
  return rep * 16 + n_index * 4 + t_index;
}

PathSet simulate_heston(const HestonParams& params, Eigen::Index n_paths, double maturity, std::uint64_t seed) {
  return simulate_heston(params, n_paths, maturity, monitoring_steps(maturity), seed);
}

PathSet simulate_heston(const HestonParams& params, Eigen::Index n_paths, double maturity, int n_steps,
                        std::uint64_t seed) {
  check_inputs(params, n_paths, maturity, n_steps);
  PathSet paths = allocate(params, n_paths, maturity, n_steps, seed);
  const StepCoefficients c = coefficients(params, paths.dt);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n_paths; ++i) {
    simulate_path(c, NormalStream(seed, static_cast<std::uint64_t>(i)), n_steps, paths, i);
  }
  return paths;
}

Eigen::VectorXd simulate_heston_terminal(const HestonParams& params, Eigen::Index n_paths, double maturity,
                                         int n_steps, std::uint64_t seed) {
  check_inputs(params, n_paths, maturity, n_steps);
  const StepCoefficients c = coefficients(params, maturity / n_steps);
  const double log_s0 = std::log(params.s0);
  const double v0 = std::max(params.v0, kVarianceFloor);
  Eigen::VectorXd out(n_paths);
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < n_paths; ++i) {
    const NormalStream stream(seed, static_cast<std::uint64_t>(i));
    double log_s = log_s0;
    double v = v0;
    for (int k = 0; k < n_steps; ++k) {
      const auto [z_v, z_perp] = stream.normal_pair(static_cast<std::uint64_t>(k));
      euler_step(c, z_v, z_perp, log_s, v);
    }
    out[i] = log_s;
  }
  return out;
}

namespace serial {

PathSet simulate_heston(const HestonParams& params, Eigen::Index n_paths, double maturity, int n_steps,
                        std::uint64_t seed) {
  check_inputs(params, n_paths, maturity, n_steps);
  PathSet paths = allocate(params, n_paths, maturity, n_steps, seed);
  const StepCoefficients c = coefficients(params, paths.dt);
  for (Eigen::Index i = 0; i < n_paths; ++i) {
    simulate_path(c, NormalStream(seed, static_cast<std::uint64_t>(i)), n_steps, paths, i);
  }
  return paths;
}

}  // namespace serial

void save_paths(const PathSet& paths, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + file.string());
  out.write(kMagic.data(), kMagic.size());
  write_pod(out, kVersion);
  write_pod(out, static_cast<std::uint32_t>(paths.n_paths()));
  write_pod(out, static_cast<std::uint32_t>(paths.n_steps()));
  write_pod(out, paths.dt);
  write_pod(out, paths.rate);
  write_pod(out, paths.seed);
  const auto bytes = static_cast<std::streamsize>(sizeof(double) * paths.log_prices.size());
  out.write(reinterpret_cast<const char*>(paths.log_prices.data()), bytes);
  out.write(reinterpret_cast<const char*>(paths.variances.data()), bytes);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + file.string());
}

PathSet load_paths(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + file.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw Error(ErrorCode::IoError, "not a path file: " + file.string());
  if (read_pod<std::uint32_t>(in) != kVersion) throw Error(ErrorCode::IoError, "unsupported path file version");
  const auto n_paths = read_pod<std::uint32_t>(in);
  const auto n_steps = read_pod<std::uint32_t>(in);
  if (n_paths == 0 || n_steps == 0) throw Error(ErrorCode::IoError, "empty path file");
  PathSet paths;
  paths.dt = read_pod<double>(in);
  paths.rate = read_pod<double>(in);
  paths.seed = read_pod<std::uint64_t>(in);
  paths.log_prices.resize(n_paths, n_steps + 1);
  paths.variances.resize(n_paths, n_steps + 1);
  const auto bytes = static_cast<std::streamsize>(sizeof(double) * paths.log_prices.size());
  in.read(reinterpret_cast<char*>(paths.log_prices.data()), bytes);
  in.read(reinterpret_cast<char*>(paths.variances.data()), bytes);
  if (!in) throw Error(ErrorCode::IoError, "truncated path file");
  return paths;
}

}  // namespace cmelr
