#include "cmelr/errors.hpp"
#include "cmelr/pricing.hpp"

#include <chrono>
#include <cmath>
#include <vector>

namespace cmelr {
namespace {

SampleMatrix state_at(const PathSet& paths, Eigen::Index step) {
  SampleMatrix states(paths.n_paths(), 2);
  states.col(0) = paths.log_prices.col(step);
  states.col(1) = paths.variances.col(step);
  return states;
}

SampleMatrix y_sample(const PathSet& paths, YState y_state) {
  const Eigen::Index last = paths.n_steps();
  if (y_state == YState::LogPriceAndVariance) return state_at(paths, last);
  SampleMatrix y(paths.n_paths(), 1);
  y.col(0) = paths.log_prices.col(last);
  return y;
}

void check_paths(const PathSet& paths, const ContractSpec& contract) {
  contract.validate();
  if (paths.n_paths() < 1 || paths.n_steps() < 1) throw Error(ErrorCode::InvalidInput, "path set is empty");
  if (std::abs(paths.maturity() - contract.maturity) > 1e-9 * std::max(1.0, contract.maturity)) {
    throw Error(ErrorCode::InvalidContract, "paths do not cover the contract maturity");
  }
}

}  // namespace

CmeModel default_cme_model(const PathSet& paths, double epsilon, YState y_state) {
  const Eigen::VectorXd terminal = paths.log_prices.col(paths.n_steps());
  CmeModel model;
  model.kernel_x = KernelSpec::polynomial(4, 1.0);
  model.kernel_y =
      KernelSpec::matern32(median_heuristic(std::span<const double>(terminal.data(), static_cast<std::size_t>(terminal.size()))));
  model.lambda = 1.0 / std::sqrt(static_cast<double>(paths.n_paths()));
  model.epsilon = epsilon;
  model.policy = TolerancePolicy::RelativeToTrace;
  model.y_state = y_state;
  return model;
}

double cme_backward_recursion(const PathSet& paths, const ContractSpec& contract, const CmeOperator& op) {
  const Eigen::Index n = paths.n_paths();
  if (op.n != n) throw Error(ErrorCode::DimensionMismatch, "operator was trained on a different number of paths");
  if (op.state_dim() != 2) throw Error(ErrorCode::DimensionMismatch, "operator state must be (log S, v)");

  Eigen::VectorXd values = discounted_payoffs(paths, contract, paths.n_steps());
  Eigen::VectorXd continuation(n);
  for (Eigen::Index k = paths.n_steps() - 1; k >= 1; --k) {
    const Eigen::VectorXd weights = fold_values(op, std::span<const double>(values.data(), static_cast<std::size_t>(n)));
    evaluate_weights(op, weights, state_at(paths, k),
                     std::span<double>(continuation.data(), static_cast<std::size_t>(n)));
    values = discounted_payoffs(paths, contract, k).cwiseMax(continuation);
  }
  const double p0 = discounted_payoffs(paths, contract, 0).maxCoeff();
  return std::max(p0, values.mean());
}

CmePricing price_american_cme_detailed(const PathSet& paths, const ContractSpec& contract, const CmeModel& model) {
  check_paths(paths, contract);
  const auto start = std::chrono::steady_clock::now();

  const SampleMatrix x_train = state_at(paths, paths.n_steps() - 1);
  const SampleMatrix y_train = y_sample(paths, model.y_state);
  CmePricing out;
  out.op = fit_lowrank_cme_detailed(x_train, y_train, model.kernel_x, model.kernel_y,
                                    {model.lambda, model.epsilon, model.policy, std::nullopt})
               .op;
  out.result.price = cme_backward_recursion(paths, contract, out.op);
  out.result.elapsed_micros =
      std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
  out.result.method = PricingMethod::CmeLowRank;
  out.result.rank_x = out.op.rank_x();
  out.result.rank_y = out.op.rank_y();
  out.result.n_paths = paths.n_paths();
  out.result.seed = paths.seed;
  return out;
}

PricingResult price_american_cme(const PathSet& paths, const ContractSpec& contract, const KernelSpec& kernel_x,
                                 const KernelSpec& kernel_y, double lambda, double epsilon, TolerancePolicy policy) {
  CmeModel model;
  model.kernel_x = kernel_x;
  model.kernel_y = kernel_y;
  model.lambda = lambda;
  model.epsilon = epsilon;
  model.policy = policy;
  return price_american_cme_detailed(paths, contract, model).result;
}

BackwardBoundReport backward_bound_report(const CmeOperator& op, int n_steps, std::optional<double> exact_frob_f_sq) {
  if (n_steps < 1) throw Error(ErrorCode::InvalidInput, "n_steps must be >= 1");
  const double n = static_cast<double>(op.n);
  const double n_lambda = n * op.lambda;
  const bool exact = exact_frob_f_sq.has_value();
  const double frob = exact ? *exact_frob_f_sq : n / (n_lambda * n_lambda);
  const double eps = std::max(op.tolerance_x, op.tolerance_y);

  BackwardBoundReport report;
  report.n_steps = n_steps;
  report.delta = lowrank_error_bound(eps, op.lambda, n, op.trace_kx, op.trace_ky, frob);
  report.delta.frob_is_upper_estimate = !exact;
  report.kappa_x_empirical = std::sqrt(op.max_diag_kx);
  report.bound_lr_part = 2.0 * n_steps * report.kappa_x_empirical * std::sqrt(report.delta.delta_lr);
  return report;
}

}  // namespace cmelr
