#include "cmelr/errors.hpp"
#include "cmelr/pricing.hpp"

#include <cmath>

namespace cmelr {

void ContractSpec::validate() const {
  if (!(strike > 0.0) || !std::isfinite(strike)) throw Error(ErrorCode::InvalidContract, "strike must be > 0");
  if (!(maturity > 0.0) || !std::isfinite(maturity)) throw Error(ErrorCode::InvalidContract, "maturity must be > 0");
}

std::string to_string(PricingMethod method) {
  switch (method) {
    case PricingMethod::CmeLowRank: return "cme_lr";
    case PricingMethod::LongstaffSchwartz: return "ls";
    case PricingMethod::EuropeanMc: return "european_mc";
    case PricingMethod::Binomial: return "binomial";
  }
  return "unknown";
}

PricingMethod pricing_method_from_string(const std::string& name) {
  if (name == "cme_lr") return PricingMethod::CmeLowRank;
  if (name == "ls") return PricingMethod::LongstaffSchwartz;
  if (name == "european_mc") return PricingMethod::EuropeanMc;
  if (name == "binomial") return PricingMethod::Binomial;
  throw Error(ErrorCode::InvalidInput, "unknown pricing method '" + name + "'");
}

Eigen::VectorXd discounted_payoffs(const PathSet& paths, const ContractSpec& contract, Eigen::Index step) {
  if (step < 0 || step > paths.n_steps()) throw Error(ErrorCode::IndexOutOfRange, "monitoring date out of range");
  const double t = paths.dt * static_cast<double>(step);
  const double discount = paths.rate == 0.0 ? 1.0 : std::exp(-paths.rate * t);
  const double k = contract.strike;
  return paths.log_prices.col(step).unaryExpr(
      [k, discount](double log_s) { return discount * std::max(k - std::exp(log_s), 0.0); });
}

PricingResult price_european_mc(const PathSet& paths, const ContractSpec& contract) {
  contract.validate();
  const Eigen::VectorXd payoff = discounted_payoffs(paths, contract, paths.n_steps());
  const double n = static_cast<double>(payoff.size());
  const double mean = payoff.mean();
  PricingResult result;
  result.method = PricingMethod::EuropeanMc;
  result.price = mean;
  result.n_paths = paths.n_paths();
  result.seed = paths.seed;
  if (payoff.size() > 1) {
    const double var = (payoff.array() - mean).square().sum() / (n - 1.0);
    result.std_error = std::sqrt(var / n);
  }
  return result;
}

}  // namespace cmelr
