#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>

namespace cmelr {

// Heston dynamics under the pricing measure. Defaults are the experiment
// configuration used throughout the benchmarks.
struct HestonParams {
  double s0 = 100.0;
  double v0 = 0.04;
  double r = 0.0;
  double kappa = 2.0;
  double theta = 0.04;
  double xi = 0.3;
  double rho = -0.7;

  // Throws InvalidParams on range violations.
  void validate() const;
};

inline constexpr double kVarianceFloor = 1e-8;

// Simulated states, one row per path and one column per monitoring date
// (column 0 is t = 0). Column-major storage keeps each date contiguous.
struct PathSet {
  Eigen::MatrixXd log_prices;  // n_paths x (n_steps + 1)
  Eigen::MatrixXd variances;   // n_paths x (n_steps + 1)
  double dt = 0.0;
  double rate = 0.0;  // risk-free rate the paths were simulated under
  std::uint64_t seed = 0;

  Eigen::Index n_paths() const { return log_prices.rows(); }
  Eigen::Index n_steps() const { return log_prices.cols() - 1; }
  double maturity() const { return dt * static_cast<double>(n_steps()); }
};

// max(20, floor(52 T)). Throws InvalidMaturity for T <= 0.
int monitoring_steps(double maturity);

// rep * 16 + n_index * 4 + t_index. Throws IndexOutOfRange unless n_index, t_index < 4.
std::uint64_t experiment_seed(std::uint64_t rep, std::uint64_t n_index, std::uint64_t t_index);

// Full-truncation Euler scheme with the variance floored at kVarianceFloor.
// Path i draws from the substream (seed, i), step k from counter k, so results
// do not depend on thread count or on n_paths.
PathSet simulate_heston(const HestonParams& params, Eigen::Index n_paths, double maturity, std::uint64_t seed);
PathSet simulate_heston(const HestonParams& params, Eigen::Index n_paths, double maturity, int n_steps,
                        std::uint64_t seed);

// Terminal log-prices only, without storing paths; same streams as simulate_heston.
Eigen::VectorXd simulate_heston_terminal(const HestonParams& params, Eigen::Index n_paths, double maturity,
                                         int n_steps, std::uint64_t seed);

namespace serial {
PathSet simulate_heston(const HestonParams& params, Eigen::Index n_paths, double maturity, int n_steps,
                        std::uint64_t seed);
}  // namespace serial

// Binary PathSet file: 16-byte header (magic "CMPS", u32 version, u32 n_paths,
// u32 n_steps), then f64 dt, f64 rate, u64 seed, the log-price matrix and the variance
// matrix, each column-major. All fields little-endian.
void save_paths(const PathSet& paths, const std::filesystem::path& file);
PathSet load_paths(const std::filesystem::path& file);

}  // namespace cmelr
