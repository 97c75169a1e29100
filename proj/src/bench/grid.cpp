#include "cmelr/bench.hpp"
#include "cmelr/errors.hpp"

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace cmelr {
namespace {

std::optional<double> try_implied_vol(double price, double s0, double strike, double r, double maturity) {
  try {
    return implied_vol_put(price, s0, strike, r, maturity);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::PriceOutOfBounds) throw;
    return std::nullopt;
  }
}

bool same(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

}  // namespace

void run_grid(const ExperimentConfig& config, const GridObserver& observer) {
  config.validate();
  const HestonParams& h = config.heston;
  for (int rep = 0; rep < config.replications; ++rep) {
    for (std::size_t ni = 0; ni < config.n_grid.size(); ++ni) {
      const Eigen::Index n = config.n_grid[ni];
      for (std::size_t ti = 0; ti < config.maturities.size(); ++ti) {
        const double maturity = config.maturities[ti];
        const std::uint64_t seed = experiment_seed(static_cast<std::uint64_t>(rep), ni, ti);
        try {
        const PathSet paths = simulate_heston(h, n, maturity, seed);
        const std::vector<double> strikes = strike_grid(h.s0, h.v0, maturity, config.moneyness_count);

        std::optional<CmeModel> model;
        bool bound_reported = false;
        for (std::size_t ki = 0; ki < strikes.size(); ++ki) {
          const ContractSpec contract{strikes[ki], maturity};
          for (PricingMethod method : config.methods) {
            ResultRow row;
            row.method = method;
            row.n = n;
            row.n_index = static_cast<int>(ni);
            row.maturity = maturity;
            row.t_index = static_cast<int>(ti);
            row.strike = strikes[ki];
            row.strike_index = static_cast<int>(ki);
            row.log_moneyness = std::log(strikes[ki] / h.s0);
            row.rep = rep;
            row.epsilon = config.epsilon;
            row.seed = seed;

            PricingResult result;
            if (method == PricingMethod::CmeLowRank) {
              if (!model) {
                model = default_cme_model(paths, config.epsilon);
                model->lambda = config.lambda_for(n);
                model->policy = config.policy;
              }
              CmePricing priced = price_american_cme_detailed(paths, contract, *model);
              result = priced.result;
              if (!bound_reported && observer.on_bound) {
                observer.on_bound({n, maturity, rep, backward_bound_report(priced.op, static_cast<int>(paths.n_steps()))});
                bound_reported = true;
              }
            } else {
              result = price_american_ls(paths, contract);
            }
            row.price = result.price;
            row.elapsed_micros = result.elapsed_micros;
            row.rank_x = result.rank_x;
            row.rank_y = result.rank_y;
            row.implied_vol = try_implied_vol(result.price, h.s0, strikes[ki], h.r, maturity);
            if (observer.on_row) observer.on_row(row);
          }
        }
        } catch (const std::exception& e) {
          if (!observer.on_cell_error) throw;
          observer.on_cell_error(rep, n, maturity, e);
        }
      }
    }
  }
}

std::vector<ResultRow> run_grid(const ExperimentConfig& config) {
  std::vector<ResultRow> rows;
  GridObserver observer;
  observer.on_row = [&rows](const ResultRow& row) { rows.push_back(row); };
  run_grid(config, observer);
  return rows;
}

std::vector<ReferencePoint> reference_prices_r0(const ExperimentConfig& config) {
  config.validate();
  const HestonParams& h = config.heston;
  if (h.r != 0.0) {
    throw Error(ErrorCode::NotApplicable, "Monte Carlo references need r = 0; supply reference_file instead");
  }
  std::vector<ReferencePoint> out;
  for (std::size_t ti = 0; ti < config.maturities.size(); ++ti) {
    const double maturity = config.maturities[ti];
    const Eigen::VectorXd terminal = simulate_heston_terminal(h, config.reference_paths, maturity,
                                                              monitoring_steps(maturity), kReferenceSeedBase + ti);
    const Eigen::ArrayXd prices = terminal.array().exp();
    const std::vector<double> strikes = strike_grid(h.s0, h.v0, maturity, config.moneyness_count);
    for (std::size_t ki = 0; ki < strikes.size(); ++ki) {
      const Eigen::ArrayXd payoff = (strikes[ki] - prices).max(0.0);
      const double n = static_cast<double>(payoff.size());
      const double mean = payoff.mean();
      ReferencePoint point;
      point.maturity = maturity;
      point.t_index = static_cast<int>(ti);
      point.strike = strikes[ki];
      point.strike_index = static_cast<int>(ki);
      point.price = mean;
      point.std_error = std::sqrt((payoff - mean).square().sum() / (n - 1.0) / n);
      point.implied_vol = try_implied_vol(mean, h.s0, strikes[ki], h.r, maturity);
      out.push_back(point);
    }
  }
  return out;
}

std::vector<ReferencePoint> load_reference_csv(const std::filesystem::path& file, const ExperimentConfig& config) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::IoError, "cannot open reference file " + file.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::IoError, "reference file is empty");
  if (line.rfind("T,strike,price", 0) != 0) throw Error(ErrorCode::IoError, "reference header must be T,strike,price");

  std::vector<ReferencePoint> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string t, k, p;
    if (!std::getline(ss, t, ',') || !std::getline(ss, k, ',') || !std::getline(ss, p, ',')) {
      throw Error(ErrorCode::IoError, "malformed reference line '" + line + "'");
    }
    ReferencePoint point;
    point.maturity = std::stod(t);
    point.strike = std::stod(k);
    point.price = std::stod(p);
    point.t_index = -1;
    point.strike_index = -1;
    for (std::size_t ti = 0; ti < config.maturities.size(); ++ti)
      if (same(config.maturities[ti], point.maturity)) point.t_index = static_cast<int>(ti);
    if (point.t_index >= 0) {
      const auto strikes = strike_grid(config.heston.s0, config.heston.v0, point.maturity, config.moneyness_count);
      for (std::size_t ki = 0; ki < strikes.size(); ++ki)
        if (same(strikes[ki], point.strike)) point.strike_index = static_cast<int>(ki);
    }
    point.implied_vol = try_implied_vol(point.price, config.heston.s0, point.strike, config.heston.r, point.maturity);
    out.push_back(point);
  }
  return out;
}

void attach_reference(std::vector<ResultRow>& rows, const std::vector<ReferencePoint>& references) {
  for (ResultRow& row : rows) {
    const ReferencePoint* match = nullptr;
    for (const auto& ref : references)
      if (same(ref.maturity, row.maturity) && same(ref.strike, row.strike)) match = &ref;
    if (!match || !match->implied_vol) {
      throw Error(ErrorCode::MissingReference, "no reference implied vol for T=" + std::to_string(row.maturity) +
                                                   " K=" + std::to_string(row.strike));
    }
    if (row.implied_vol) row.rel_iv_error = std::abs(*row.implied_vol - *match->implied_vol) / *match->implied_vol;
  }
}

std::vector<RankObservation> rank_study(const ExperimentConfig& config, const std::vector<double>& epsilons,
                                        const std::function<void(const RankObservation&)>& on_observation) {
  config.validate();
  if (epsilons.empty()) throw Error(ErrorCode::InvalidCount, "at least one epsilon is required");
  std::vector<RankObservation> out;
  for (int rep = 0; rep < config.replications; ++rep) {
    for (std::size_t ni = 0; ni < config.n_grid.size(); ++ni) {
      for (std::size_t ti = 0; ti < config.maturities.size(); ++ti) {
        const double maturity = config.maturities[ti];
        const PathSet paths =
            simulate_heston(config.heston, config.n_grid[ni], maturity, experiment_seed(static_cast<std::uint64_t>(rep), ni, ti));
        const Eigen::Index last = paths.n_steps();
        SampleMatrix x(paths.n_paths(), 2);
        x.col(0) = paths.log_prices.col(last - 1);
        x.col(1) = paths.variances.col(last - 1);
        SampleMatrix y(paths.n_paths(), 1);
        y.col(0) = paths.log_prices.col(last);
        const CmeModel model = default_cme_model(paths);
        for (double eps : epsilons) {
          const CmeOperator op = fit_lowrank_cme(x, y, model.kernel_x, model.kernel_y, config.lambda_for(paths.n_paths()),
                                                 eps, config.policy);
          RankObservation obs{paths.n_paths(), maturity, static_cast<int>(ti), eps, rep, op.rank_x(), op.rank_y()};
          if (on_observation) on_observation(obs);
          out.push_back(obs);
        }
      }
    }
  }
  return out;
}

}  // namespace cmelr
