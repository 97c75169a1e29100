#include "cmelr/bench.hpp"
#include "cmelr/errors.hpp"
#include "cmelr/market.hpp"
#include "cmelr/pricing.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace cmelr;

namespace {

void add_heston_options(CLI::App* app, HestonParams& h) {
  app->add_option("--s0", h.s0, "initial price")->capture_default_str();
  app->add_option("--v0", h.v0, "initial variance")->capture_default_str();
  app->add_option("--rate", h.r, "risk-free rate")->capture_default_str();
  app->add_option("--kappa", h.kappa, "mean-reversion speed")->capture_default_str();
  app->add_option("--theta", h.theta, "long-term variance")->capture_default_str();
  app->add_option("--xi", h.xi, "vol of vol")->capture_default_str();
  app->add_option("--rho", h.rho, "correlation")->capture_default_str();
}

template <class T>
std::string join(const std::vector<T>& values) {
  std::ostringstream out;
  for (std::size_t i = 0; i < values.size(); ++i) out << (i ? "," : "") << values[i];
  return out.str();
}

std::vector<std::string> collect_heston_overrides(const CLI::App* app, const HestonParams& h) {
  std::vector<std::string> kv;
  auto take = [&](const char* flag, const char* key, double v) {
    if (app->count(flag) > 0) kv.push_back(std::string(key) + "=" + std::to_string(v));
  };
  take("--s0", "s0", h.s0);
  take("--v0", "v0", h.v0);
  take("--rate", "r", h.r);
  take("--kappa", "kappa", h.kappa);
  take("--theta", "theta", h.theta);
  take("--xi", "xi", h.xi);
  take("--rho", "rho", h.rho);
  return kv;
}

void print_result(const PricingResult& r) {
  std::cout << to_string(r.method) << " price=" << r.price << " elapsed_us=" << r.elapsed_micros;
  if (r.rank_x) std::cout << " rank_x=" << *r.rank_x;
  if (r.rank_y) std::cout << " rank_y=" << *r.rank_y;
  if (r.method == PricingMethod::EuropeanMc) std::cout << " std_error=" << r.std_error;
  if (r.regression_fallback) std::cout << " ridge_fallback=1";
  std::cout << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Low-rank CME American option pricer"};
  app.require_subcommand(1);

  // simulate
  HestonParams sim_h;
  Eigen::Index sim_n = 10000;
  double sim_t = 1.0;
  std::uint64_t sim_seed = 0;
  int sim_steps = 0;
  std::string sim_out;
  auto* sim = app.add_subcommand("simulate", "simulate Heston paths and write a path file");
  add_heston_options(sim, sim_h);
  sim->add_option("--n", sim_n, "number of paths")->capture_default_str();
  sim->add_option("--maturity", sim_t, "maturity in years")->capture_default_str();
  sim->add_option("--seed", sim_seed, "seed")->capture_default_str();
  sim->add_option("--steps", sim_steps, "monitoring steps (default max(20, floor(52 T)))");
  sim->add_option("--out", sim_out, "output path file")->required();

  // price
  HestonParams price_h;
  Eigen::Index price_n = 10000;
  double price_t = 1.0;
  double price_k = 100.0;
  std::uint64_t price_seed = 0;
  double price_eps = 1e-5;
  std::string price_policy = "relative";
  std::string price_methods = "cme_lr,ls,european_mc";
  std::string price_paths;
  std::string price_save_op;
  bool price_bound = false;
  auto* price = app.add_subcommand("price", "price one American put");
  add_heston_options(price, price_h);
  price->add_option("--n", price_n, "number of paths")->capture_default_str();
  price->add_option("--maturity", price_t, "maturity in years")->capture_default_str();
  price->add_option("--strike", price_k, "strike")->capture_default_str();
  price->add_option("--seed", price_seed, "seed")->capture_default_str();
  price->add_option("--epsilon", price_eps, "pivoted Cholesky tolerance")->capture_default_str();
  price->add_option("--tolerance-policy", price_policy, "relative or absolute")->capture_default_str();
  price->add_option("--methods", price_methods, "comma list of cme_lr, ls, european_mc")->capture_default_str();
  price->add_option("--paths", price_paths, "load paths from a file instead of simulating");
  price->add_option("--save-operator", price_save_op, "write the fitted operator as JSON");
  price->add_flag("--bound", price_bound, "print the low-rank backward error bound");

  // bench
  std::string bench_config;
  std::vector<std::string> bench_n, bench_t;
  int bench_reps = 0;
  double bench_eps = 0.0;
  int bench_strikes = 0;
  std::string bench_methods, bench_out, bench_reference;
  Eigen::Index bench_ref_paths = 0;
  HestonParams bench_h;
  auto* bench = app.add_subcommand("bench", "run the experiment grid and write CSV files");
  add_heston_options(bench, bench_h);
  bench->add_option("--config", bench_config, "key = value config file");
  bench->add_option("--n", bench_n, "path counts")->delimiter(',');
  bench->add_option("--maturity", bench_t, "maturities")->delimiter(',');
  bench->add_option("--reps", bench_reps, "replications");
  bench->add_option("--epsilon", bench_eps, "pivoted Cholesky tolerance");
  bench->add_option("--strikes", bench_strikes, "number of strikes");
  bench->add_option("--methods", bench_methods, "cme_lr,ls");
  bench->add_option("--reference-paths", bench_ref_paths, "paths for the Monte Carlo reference");
  bench->add_option("--reference-file", bench_reference, "CSV with T,strike,price references");
  bench->add_option("--out", bench_out, std::string("output directory (else $") + kOutputDirEnv + " or config)");

  // rank
  std::string rank_config;
  std::vector<double> rank_eps{1e-4, 1e-5, 1e-6};
  std::vector<std::string> rank_n, rank_t;
  int rank_reps = 0;
  std::string rank_out;
  auto* rank = app.add_subcommand("rank", "mean pivoted Cholesky ranks across tolerances");
  rank->add_option("--config", rank_config, "key = value config file");
  rank->add_option("--epsilons", rank_eps, "tolerances")->delimiter(',')->capture_default_str();
  rank->add_option("--n", rank_n, "path counts")->delimiter(',');
  rank->add_option("--maturity", rank_t, "maturities")->delimiter(',');
  rank->add_option("--reps", rank_reps, "replications");
  rank->add_option("--out", rank_out, "output directory");

  // converge
  ConvergenceConfig conv;
  std::string conv_out;
  auto* converge = app.add_subcommand("converge", "linear-Gaussian CME error versus n");
  converge->add_option("--n-grid", conv.n_grid, "sample sizes")->delimiter(',')->capture_default_str();
  converge->add_option("--reps", conv.replications, "replications")->capture_default_str();
  converge->add_option("--a", conv.a, "slope in Y = a X + sigma Z")->capture_default_str();
  converge->add_option("--sigma", conv.sigma, "noise level")->capture_default_str();
  converge->add_option("--epsilon", conv.epsilon, "pivoted Cholesky tolerance")->capture_default_str();
  converge->add_option("--seed", conv.seed, "seed")->capture_default_str();
  converge->add_option("--out", conv_out, "CSV file");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      const PathSet paths = sim_steps > 0 ? simulate_heston(sim_h, sim_n, sim_t, sim_steps, sim_seed)
                                          : simulate_heston(sim_h, sim_n, sim_t, sim_seed);
      save_paths(paths, sim_out);
      std::cout << "wrote " << paths.n_paths() << " paths x " << paths.n_steps() << " steps to " << sim_out << '\n';
      return 0;
    }

    if (*price) {
      const PathSet paths = price_paths.empty() ? simulate_heston(price_h, price_n, price_t, price_seed)
                                                : load_paths(price_paths);
      const ContractSpec contract{price_k, paths.maturity()};
      std::stringstream list(price_methods);
      std::string name;
      while (std::getline(list, name, ',')) {
        const PricingMethod method = pricing_method_from_string(name);
        if (method == PricingMethod::CmeLowRank) {
          CmeModel model = default_cme_model(paths, price_eps);
          model.policy = tolerance_policy_from_string(price_policy);
          const CmePricing priced = price_american_cme_detailed(paths, contract, model);
          print_result(priced.result);
          if (!price_save_op.empty()) save_operator(priced.op, price_save_op);
          if (price_bound) {
            const auto b = backward_bound_report(priced.op, static_cast<int>(paths.n_steps()));
            std::cout << "bound n_T=" << b.n_steps << " delta_lr=" << b.delta.delta_lr
                      << " kappa_x=" << b.kappa_x_empirical << " lr_part=" << b.bound_lr_part
                      << " statistical_part=\"" << b.statistical_part << "\"\n";
          }
        } else if (method == PricingMethod::LongstaffSchwartz) {
          print_result(price_american_ls(paths, contract));
        } else if (method == PricingMethod::EuropeanMc) {
          print_result(price_european_mc(paths, contract));
        } else {
          throw Error(ErrorCode::InvalidInput, "binomial needs a constant volatility; not available here");
        }
      }
      return 0;
    }

    if (*bench) {
      ExperimentConfig config;
      if (!bench_config.empty()) config = load_config(bench_config);
      if (const char* env = std::getenv(kOutputDirEnv); env && *env) config.output_dir = env;
      if (!bench_n.empty()) apply_config_value(config, "n_grid", join(bench_n));
      if (!bench_t.empty()) apply_config_value(config, "maturities", join(bench_t));
      if (bench->count("--reps")) config.replications = bench_reps;
      if (bench->count("--epsilon")) config.epsilon = bench_eps;
      if (bench->count("--strikes")) config.moneyness_count = bench_strikes;
      if (!bench_methods.empty()) apply_config_value(config, "methods", bench_methods);
      if (bench->count("--reference-paths")) config.reference_paths = bench_ref_paths;
      if (!bench_reference.empty()) config.reference_file = bench_reference;
      for (const auto& kv : collect_heston_overrides(bench, bench_h)) {
        const auto eq = kv.find('=');
        apply_config_value(config, kv.substr(0, eq), kv.substr(eq + 1));
      }
      if (!bench_out.empty()) config.output_dir = bench_out;

      const BenchOutcome outcome = run_bench(config, &std::cerr);
      std::cout << "rows=" << outcome.rows << " invalid=" << outcome.invalid_rows
                << " aborted_cells=" << outcome.aborted_cells << '\n';
      for (const auto& f : outcome.files) std::cout << f.string() << '\n';
      return outcome.aborted_cells == 0 ? 0 : 1;
    }

    if (*rank) {
      ExperimentConfig config;
      config.n_grid = {100, 1000, 10000};
      config.maturities = {1.0};
      if (!rank_config.empty()) config = load_config(rank_config, config);
      if (const char* env = std::getenv(kOutputDirEnv); env && *env) config.output_dir = env;
      if (!rank_n.empty()) apply_config_value(config, "n_grid", join(rank_n));
      if (!rank_t.empty()) apply_config_value(config, "maturities", join(rank_t));
      if (rank->count("--reps")) config.replications = rank_reps;
      if (!rank_out.empty()) config.output_dir = rank_out;

      const auto observations = rank_study(config, rank_eps, [](const RankObservation& o) {
        std::cerr << "n=" << o.n << " T=" << o.maturity << " eps=" << o.epsilon << " rep=" << o.rep
                  << " rank_x=" << o.rank_x << " rank_y=" << o.rank_y << '\n';
      });
      const auto summary = rank_summary(observations);
      std::filesystem::create_directories(config.output_dir);
      for (std::size_t ti = 0; ti < config.maturities.size(); ++ti) {
        const auto file = config.output_dir / ("rank_T" + std::to_string(ti + 1) + ".csv");
        std::ofstream out(file);
        write_rank_csv(out, summary, config.maturities[ti]);
        std::cout << file.string() << '\n';
      }
      write_rank_csv(std::cout, summary, config.maturities.front());
      return 0;
    }

    if (*converge) {
      const auto points = convergence_study(conv);
      std::ostringstream csv;
      csv << "n,median_l2_error,mean_l2_error,mean_rank_x,mean_rank_y,reps\n";
      for (const auto& p : points) {
        csv << p.n << ',' << p.median << ',' << p.mean << ',' << p.mean_rank_x << ',' << p.mean_rank_y << ','
            << p.errors.size() << '\n';
      }
      std::cout << csv.str();
      if (!conv_out.empty()) {
        std::ofstream out(conv_out);
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + conv_out);
        out << csv.str();
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
