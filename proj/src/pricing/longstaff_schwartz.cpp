#include "cmelr/errors.hpp"
#include "cmelr/pricing.hpp"

#include <chrono>
#include <cmath>
#include <vector>

namespace cmelr {
namespace {

constexpr double kRidge = 1e-10;

// Standardized monomials x^a y^b with a + b <= degree, constant term first.
void fill_basis(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y, int degree,
                Eigen::MatrixXd& design) {
  const Eigen::Index rows = x.size();
  const double x_mean = x.mean();
  const double y_mean = y.mean();
  double x_sd = std::sqrt((x.array() - x_mean).square().sum() / static_cast<double>(rows));
  double y_sd = std::sqrt((y.array() - y_mean).square().sum() / static_cast<double>(rows));
  if (!(x_sd > 0.0)) x_sd = 1.0;
  if (!(y_sd > 0.0)) y_sd = 1.0;
  const Eigen::ArrayXd xs = (x.array() - x_mean) / x_sd;
  const Eigen::ArrayXd ys = (y.array() - y_mean) / y_sd;

  design.resize(rows, ls_basis_size(degree));
  Eigen::Index col = 0;
  Eigen::ArrayXd x_pow = Eigen::ArrayXd::Ones(rows);
  for (int a = 0; a <= degree; ++a) {
    Eigen::ArrayXd term = x_pow;
    for (int b = 0; a + b <= degree; ++b) {
      design.col(col++) = term.matrix();
      term *= ys;
    }
    x_pow *= xs;
  }
}

}  // namespace

int ls_basis_size(int degree) { return (degree + 1) * (degree + 2) / 2; }

PricingResult price_american_ls(const PathSet& paths, const ContractSpec& contract, int degree) {
  contract.validate();
  if (degree < 1) throw Error(ErrorCode::InvalidInput, "LS degree must be >= 1");
  const Eigen::Index n = paths.n_paths();
  const Eigen::Index n_steps = paths.n_steps();
  const int n_basis = ls_basis_size(degree);

  PricingResult result;
  result.method = PricingMethod::LongstaffSchwartz;
  result.n_paths = n;
  result.seed = paths.seed;

  const auto start = std::chrono::steady_clock::now();

  Eigen::VectorXd cash_flow = discounted_payoffs(paths, contract, n_steps);
  std::vector<Eigen::Index> itm;
  itm.reserve(static_cast<std::size_t>(n));
  Eigen::VectorXd x, y, target;
  Eigen::MatrixXd design;

  for (Eigen::Index k = n_steps - 1; k >= 1; --k) {
    const Eigen::VectorXd exercise = discounted_payoffs(paths, contract, k);
    itm.clear();
    for (Eigen::Index i = 0; i < n; ++i)
      if (exercise[i] > 0.0) itm.push_back(i);
    if (itm.empty()) continue;

    const auto m = static_cast<Eigen::Index>(itm.size());
    x.resize(m);
    y.resize(m);
    target.resize(m);
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::Index i = itm[static_cast<std::size_t>(j)];
      x[j] = paths.log_prices(i, k);
      y[j] = paths.variances(i, k);
      target[j] = cash_flow[i];
    }
    fill_basis(x, y, degree, design);

    Eigen::VectorXd beta;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() == n_basis) {
      beta = qr.solve(target);
    } else {
      // Singular regression: ridge-regularized normal equations.
      Eigen::MatrixXd gram = design.transpose() * design;
      gram.diagonal().array() += kRidge;
      beta = gram.ldlt().solve(design.transpose() * target);
      result.regression_fallback = true;
    }
    const Eigen::VectorXd continuation = design * beta;
    for (Eigen::Index j = 0; j < m; ++j) {
      const Eigen::Index i = itm[static_cast<std::size_t>(j)];
      if (exercise[i] >= continuation[j]) cash_flow[i] = exercise[i];
    }
  }

  const double p0 = discounted_payoffs(paths, contract, 0).maxCoeff();
  result.price = std::max(p0, cash_flow.mean());
  result.elapsed_micros =
      std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace cmelr
