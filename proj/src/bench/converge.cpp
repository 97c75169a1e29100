#include "cmelr/bench.hpp"
#include "cmelr/errors.hpp"
#include "cmelr/rng.hpp"

#include <algorithm>
#include <cmath>

namespace cmelr {
namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

}  // namespace

std::vector<ConvergencePoint> convergence_study(const ConvergenceConfig& config) {
  if (config.n_grid.empty() || config.replications < 1 || config.test_points < 1) {
    throw Error(ErrorCode::InvalidCount, "convergence study needs path counts, replications and test points");
  }
  if (!(config.sigma > 0.0) || !(config.epsilon > 0.0)) throw Error(ErrorCode::InvalidInput, "sigma and epsilon must be > 0");

  const double damping = std::exp(-0.5 * config.sigma * config.sigma);
  SampleMatrix test(config.test_points, 1);
  Eigen::VectorXd truth(config.test_points);
  const NormalStream test_stream(config.seed, 0xFFFFFFFFULL);
  for (Eigen::Index i = 0; i < config.test_points; ++i) {
    test(i, 0) = test_stream.normal_pair(static_cast<std::uint64_t>(i)).first;
    truth[i] = std::sin(config.a * test(i, 0)) * damping;
  }

  std::vector<ConvergencePoint> out;
  for (std::size_t ni = 0; ni < config.n_grid.size(); ++ni) {
    const Eigen::Index n = config.n_grid[ni];
    if (n < 2) throw Error(ErrorCode::InvalidCount, "path counts must be >= 2");
    ConvergencePoint point;
    point.n = n;
    for (int rep = 0; rep < config.replications; ++rep) {
      const NormalStream stream(config.seed + 1 + static_cast<std::uint64_t>(rep), ni);
      SampleMatrix x(n, 1), y(n, 1);
      Eigen::VectorXd f(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto [zx, zy] = stream.normal_pair(static_cast<std::uint64_t>(i));
        x(i, 0) = zx;
        y(i, 0) = config.a * zx + config.sigma * zy;
        f[i] = std::sin(y(i, 0));
      }
      const KernelSpec kx = KernelSpec::gaussian(median_heuristic({x.data(), static_cast<std::size_t>(n)}));
      const KernelSpec ky = KernelSpec::gaussian(median_heuristic({y.data(), static_cast<std::size_t>(n)}));
      const CmeOperator op = fit_lowrank_cme(x, y, kx, ky, 1.0 / std::sqrt(static_cast<double>(n)), config.epsilon,
                                             TolerancePolicy::RelativeToTrace);
      const Eigen::VectorXd pred = apply_cme(op, {f.data(), static_cast<std::size_t>(n)}, test);
      point.errors.push_back(std::sqrt((pred - truth).squaredNorm() / static_cast<double>(config.test_points)));
      point.mean_rank_x += static_cast<double>(op.rank_x()) / config.replications;
      point.mean_rank_y += static_cast<double>(op.rank_y()) / config.replications;
    }
    point.median = median_of(point.errors);
    point.mean = 0.0;
    for (double e : point.errors) point.mean += e / static_cast<double>(point.errors.size());
    out.push_back(point);
  }
  return out;
}

}  // namespace cmelr
