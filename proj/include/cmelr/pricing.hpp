#pragma once

#include "cmelr/cme.hpp"
#include "cmelr/kernels.hpp"
#include "cmelr/market.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>

namespace cmelr {

// American put. Only puts are supported.
struct ContractSpec {
  double strike = 100.0;
  double maturity = 1.0;

  // Throws InvalidContract.
  void validate() const;
};

enum class PricingMethod { CmeLowRank, LongstaffSchwartz, EuropeanMc, Binomial };

std::string to_string(PricingMethod method);
PricingMethod pricing_method_from_string(const std::string& name);

struct PricingResult {
  double price = 0.0;
  PricingMethod method = PricingMethod::CmeLowRank;
  double elapsed_micros = 0.0;  // pricing algorithm only; simulation excluded
  std::optional<Eigen::Index> rank_x;
  std::optional<Eigen::Index> rank_y;
  Eigen::Index n_paths = 0;
  std::uint64_t seed = 0;
  bool regression_fallback = false;  // LS: a ridge solve replaced a singular regression
  double std_error = 0.0;            // European MC only
};

// Discounted exercise values e^{-r t_k} (K - S_k)^+ at monitoring date k.
Eigen::VectorXd discounted_payoffs(const PathSet& paths, const ContractSpec& contract, Eigen::Index step);

// Which variables make up the Y sample of the operator.
enum class YState { LogPrice, LogPriceAndVariance };

// Kernel and regularization choices for the CME pricer.
struct CmeModel {
  KernelSpec kernel_x = KernelSpec::polynomial(4, 1.0);
  KernelSpec kernel_y = KernelSpec::matern32(1.0);
  double lambda = 1e-2;
  double epsilon = 1e-5;
  TolerancePolicy policy = TolerancePolicy::RelativeToTrace;
  YState y_state = YState::LogPrice;
};

// Degree-4 polynomial k_X, Matern-3/2 k_Y with the median-heuristic
// lengthscale of the terminal log-prices, lambda = n^{-1/2}.
CmeModel default_cme_model(const PathSet& paths, double epsilon = 1e-5, YState y_state = YState::LogPrice);

struct CmePricing {
  PricingResult result;
  CmeOperator op;
};

// Offline/online low-rank CME pricer: fits one operator on the last step
// (n_T - 1 -> n_T) and reuses it at every earlier exercise date.
CmePricing price_american_cme_detailed(const PathSet& paths, const ContractSpec& contract, const CmeModel& model);

PricingResult price_american_cme(const PathSet& paths, const ContractSpec& contract, const KernelSpec& kernel_x,
                                 const KernelSpec& kernel_y, double lambda, double epsilon,
                                 TolerancePolicy policy = TolerancePolicy::RelativeToTrace);

// Online phase only, with a prefitted operator.
double cme_backward_recursion(const PathSet& paths, const ContractSpec& contract, const CmeOperator& op);

// Longstaff-Schwartz with the full bivariate polynomial basis of total degree
// <= `degree` in (log S_k, v_k), regressing realized cash flows on in-the-money paths.
PricingResult price_american_ls(const PathSet& paths, const ContractSpec& contract, int degree = 4);

// Number of monomials of total degree <= degree in two variables.
int ls_basis_size(int degree);

// Plain Monte Carlo mean of e^{-rT}(K - S_T)^+ with its standard error.
PricingResult price_european_mc(const PathSet& paths, const ContractSpec& contract);

double black_scholes_put(double s, double k, double r, double sigma, double maturity);

inline constexpr double kImpliedVolLow = 1e-4;
inline constexpr double kImpliedVolHigh = 5.0;
inline constexpr double kImpliedVolTolerance = 1e-10;

// Bracketing root find on [1e-4, 5]. Throws PriceOutOfBounds outside the
// no-arbitrage band (max(K e^{-rT} - S, 0), K e^{-rT}) or the bracket.
double implied_vol_put(double price, double s, double k, double r, double maturity);

// Cox-Ross-Rubinstein tree; `american = false` disables early exercise.
double binomial_american_put(double s, double k, double r, double sigma, double maturity, int steps,
                             bool american = true);

struct BackwardBoundReport {
  int n_steps = 0;
  LowRankErrorBound delta;
  double kappa_x_empirical = 0.0;  // max over training inputs of sqrt(k_X(x, x))
  double bound_lr_part = 0.0;      // 2 n_T kappa_X sqrt(delta_LR)
  std::string statistical_part = "not computable (unknown constants)";
};

// Computable low-rank part of the backward error bound. Without an exact
// ||F||_F^2 the spectral upper estimate n / (n lambda)^2 is used and flagged.
BackwardBoundReport backward_bound_report(const CmeOperator& op, int n_steps,
                                          std::optional<double> exact_frob_f_sq = std::nullopt);

}  // namespace cmelr
