#include "cmelr/errors.hpp"
#include "cmelr/pricing.hpp"

#include <boost/math/tools/toms748_solve.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>

namespace cmelr {
namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

double black_scholes_put(double s, double k, double r, double sigma, double maturity) {
  if (!(s > 0.0) || !(k > 0.0) || !(sigma >= 0.0) || !(maturity >= 0.0) || !std::isfinite(r)) {
    throw Error(ErrorCode::InvalidInput, "black_scholes_put: invalid arguments");
  }
  const double discounted_strike = k * std::exp(-r * maturity);
  if (sigma == 0.0 || maturity == 0.0) return std::max(discounted_strike - s, 0.0);
  const double vol = sigma * std::sqrt(maturity);
  const double d1 = (std::log(s / k) + (r + 0.5 * sigma * sigma) * maturity) / vol;
  const double d2 = d1 - vol;
  return discounted_strike * normal_cdf(-d2) - s * normal_cdf(-d1);
}

double implied_vol_put(double price, double s, double k, double r, double maturity) {
  if (!(s > 0.0) || !(k > 0.0) || !(maturity > 0.0) || !std::isfinite(price)) {
    throw Error(ErrorCode::InvalidInput, "implied_vol_put: invalid arguments");
  }
  const double upper = k * std::exp(-r * maturity);
  const double lower = std::max(upper - s, 0.0);
  if (!(price > lower) || !(price < upper)) {
    throw Error(ErrorCode::PriceOutOfBounds, "price outside the no-arbitrage band");
  }
  auto residual = [&](double sigma) { return black_scholes_put(s, k, r, sigma, maturity) - price; };
  const double f_low = residual(kImpliedVolLow);
  const double f_high = residual(kImpliedVolHigh);
  if (f_low > 0.0 || f_high < 0.0) {
    throw Error(ErrorCode::PriceOutOfBounds, "price outside the volatility bracket");
  }
  if (f_low == 0.0) return kImpliedVolLow;
  if (f_high == 0.0) return kImpliedVolHigh;

  std::uintmax_t max_iter = 200;
  const auto bracket = boost::math::tools::toms748_solve(
      residual, kImpliedVolLow, kImpliedVolHigh, f_low, f_high,
      [](double a, double b) { return std::abs(b - a) <= kImpliedVolTolerance; }, max_iter);
  return 0.5 * (bracket.first + bracket.second);
}

double binomial_american_put(double s, double k, double r, double sigma, double maturity, int steps, bool american) {
  if (!(s > 0.0) || !(k > 0.0) || !(sigma > 0.0) || !(maturity > 0.0) || steps < 1 || !std::isfinite(r)) {
    throw Error(ErrorCode::InvalidInput, "binomial_american_put: invalid arguments");
  }
  const double dt = maturity / steps;
  const double up = std::exp(sigma * std::sqrt(dt));
  const double down = 1.0 / up;
  const double growth = std::exp(r * dt);
  const double p = (growth - down) / (up - down);
  if (!(p > 0.0 && p < 1.0)) throw Error(ErrorCode::InvalidInput, "binomial tree has no risk-neutral probability");
  const double disc = 1.0 / growth;

  std::vector<double> values(static_cast<std::size_t>(steps) + 1);
  for (int j = 0; j <= steps; ++j) {
    const double spot = s * std::pow(up, 2 * j - steps);
    values[static_cast<std::size_t>(j)] = std::max(k - spot, 0.0);
  }
  for (int step = steps - 1; step >= 0; --step) {
    for (int j = 0; j <= step; ++j) {
      const auto idx = static_cast<std::size_t>(j);
      double cont = disc * (p * values[idx + 1] + (1.0 - p) * values[idx]);
      if (american) cont = std::max(cont, k - s * std::pow(up, 2 * j - step));
      values[idx] = cont;
    }
  }
  return values[0];
}

}  // namespace cmelr
