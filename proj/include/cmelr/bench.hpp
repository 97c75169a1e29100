#pragma once

#include "cmelr/cme.hpp"
#include "cmelr/market.hpp"
#include "cmelr/pricing.hpp"

#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cmelr {

inline constexpr const char* kOutputDirEnv = "CMELR_OUTPUT_DIR";

// Seed lane for reference prices, disjoint from experiment_seed's range.
inline constexpr std::uint64_t kReferenceSeedBase = 0x5245460000000000ULL;

struct ExperimentConfig {
  std::vector<Eigen::Index> n_grid{100, 1000, 10000, 100000};
  std::vector<double> maturities{1.0 / 12.0, 0.5, 1.0, 2.0};
  int moneyness_count = 10;
  int replications = 20;
  std::string lambda_rule = "n^-1/2";
  double epsilon = 1e-5;
  TolerancePolicy policy = TolerancePolicy::RelativeToTrace;
  HestonParams heston;
  std::vector<PricingMethod> methods{PricingMethod::CmeLowRank, PricingMethod::LongstaffSchwartz};
  std::filesystem::path output_dir = "results";
  Eigen::Index reference_paths = 1'000'000;
  std::optional<std::filesystem::path> reference_file;

  // Throws InvalidCount / InvalidInput / IndexOutOfRange.
  void validate() const;
  double lambda_for(Eigen::Index n) const;
};

// Flat "key = value" text; '#' starts a comment. Keys are the field names of
// ExperimentConfig plus the HestonParams fields (s0, v0, r, kappa, theta, xi, rho).
// Values in `text` override those already in `base`.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& file, ExperimentConfig base = {});
// Applies a single key; used by parse_config and by CLI overrides.
void apply_config_value(ExperimentConfig& config, const std::string& key, const std::string& value);

std::vector<double> log_moneyness_grid(int count);
// K = s0 exp(m sqrt(v0) sqrt(T)) for m in linspace(-2, 2, count). Throws InvalidCount.
std::vector<double> strike_grid(double s0, double v0, double maturity, int count);

struct ResultRow {
  PricingMethod method = PricingMethod::CmeLowRank;
  Eigen::Index n = 0;
  int n_index = 0;
  double maturity = 0.0;
  int t_index = 0;
  double strike = 0.0;
  int strike_index = 0;
  double log_moneyness = 0.0;
  int rep = 0;
  double epsilon = 0.0;
  double price = 0.0;
  std::optional<double> implied_vol;  // empty: inversion failed, row invalid
  std::optional<double> rel_iv_error;
  double elapsed_micros = 0.0;
  std::optional<Eigen::Index> rank_x;
  std::optional<Eigen::Index> rank_y;
  std::uint64_t seed = 0;

  bool valid() const { return implied_vol.has_value(); }
};

// Low-rank part of the backward error bound for one fitted cell.
struct BoundRow {
  Eigen::Index n = 0;
  double maturity = 0.0;
  int rep = 0;
  BackwardBoundReport report;
};

struct GridObserver {
  std::function<void(const ResultRow&)> on_row;
  std::function<void(const BoundRow&)> on_bound;
  // When set, a cell that throws is reported here and skipped; otherwise the error propagates.
  std::function<void(int rep, Eigen::Index n, double maturity, const std::exception&)> on_cell_error;
};

// One PathSet per (rep, n, T) with seed experiment_seed(rep, n_index, t_index),
// shared by every method and strike of that cell.
void run_grid(const ExperimentConfig& config, const GridObserver& observer);
std::vector<ResultRow> run_grid(const ExperimentConfig& config);

struct ReferencePoint {
  double maturity = 0.0;
  int t_index = 0;
  double strike = 0.0;
  int strike_index = 0;
  double price = 0.0;
  double std_error = 0.0;
  std::optional<double> implied_vol;  // empty: inversion failed
};

// European put by plain Monte Carlo on a reserved seed lane; equal to the
// American put when r = 0. Throws NotApplicable if r != 0.
std::vector<ReferencePoint> reference_prices_r0(const ExperimentConfig& config);

// CSV with header "T,strike,price"; implied vols are recomputed on load.
std::vector<ReferencePoint> load_reference_csv(const std::filesystem::path& file, const ExperimentConfig& config);

// Fills rel_iv_error on valid rows. Throws MissingReference when a row has no
// matching (T, strike) reference or the reference IV is missing.
void attach_reference(std::vector<ResultRow>& rows, const std::vector<ReferencePoint>& references);

struct Interval {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

// Mean with a normal 95% interval (1.96 standard errors); degenerate for one value.
Interval normal_interval(const std::vector<double>& values);

struct ErrorSummary {
  PricingMethod method = PricingMethod::CmeLowRank;
  Eigen::Index n = 0;
  double maturity = 0.0;
  std::optional<double> log_moneyness;  // set for per-strike summaries
  Interval error;
  int count = 0;    // valid rows used
  int invalid = 0;  // rows excluded
};

struct IvErrorAggregate {
  std::vector<ErrorSummary> by_cell;       // per (method, n, T)
  std::vector<ErrorSummary> by_moneyness;  // per (method, n, T, strike)
};

// Mean relative IV error |IV - IV_ref| / IV_ref. The per-cell point estimate
// averages all valid (rep, strike) terms; its interval uses replication means.
// Per-strike summaries average over replications only.
IvErrorAggregate aggregate_iv_error(const std::vector<ResultRow>& rows,
                                    const std::vector<ReferencePoint>& references);

struct TimingSummary {
  PricingMethod method = PricingMethod::CmeLowRank;
  Eigen::Index n = 0;
  double maturity = 0.0;
  Interval log10_micros;
};

// log10 elapsed microseconds, averaged over strikes within a replication, then
// over replications.
std::vector<TimingSummary> timing_summary(const std::vector<ResultRow>& rows);

struct RankObservation {
  Eigen::Index n = 0;
  double maturity = 0.0;
  int t_index = 0;
  double epsilon = 0.0;
  int rep = 0;
  Eigen::Index rank_x = 0;
  Eigen::Index rank_y = 0;
};

struct RankSummary {
  Eigen::Index n = 0;
  double maturity = 0.0;
  int t_index = 0;
  double epsilon = 0.0;
  double mean_rank_x = 0.0;
  double mean_rank_y = 0.0;
  Eigen::Index min_rank_x = 0;
  Eigen::Index max_rank_x = 0;
  int reps = 0;
};

// One observation per (rep, n, T, epsilon) from cme_lr rows.
std::vector<RankObservation> rank_observations(const std::vector<ResultRow>& rows);
// Throws EmptyInput.
std::vector<RankSummary> rank_summary(const std::vector<RankObservation>& observations);

// Fits operators only (no pricing) for every (rep, n, T, epsilon).
std::vector<RankObservation> rank_study(const ExperimentConfig& config, const std::vector<double>& epsilons,
                                        const std::function<void(const RankObservation&)>& on_observation = {});

// CSV emission. Index arguments in file names are 1-based.
void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows);
void write_results_header(std::ostream& out);
void write_result_line(std::ostream& out, const ResultRow& row);
void write_reference_csv(std::ostream& out, const std::vector<ReferencePoint>& references);
void write_bounds_csv(std::ostream& out, const std::vector<BoundRow>& bounds);
void write_timing_csv(std::ostream& out, const std::vector<TimingSummary>& timing, double maturity);
void write_error_csv(std::ostream& out, const IvErrorAggregate& aggregate, double maturity);
void write_moneyness_csv(std::ostream& out, const IvErrorAggregate& aggregate, double maturity, Eigen::Index n);
void write_rank_csv(std::ostream& out, const std::vector<RankSummary>& ranks, double maturity);

struct BenchOutcome {
  std::vector<std::filesystem::path> files;
  int rows = 0;
  int invalid_rows = 0;
  int aborted_cells = 0;
  bool errors_written = false;  // false when no reference was available
};

// Full pipeline: grid, references, aggregates and every CSV under config.output_dir.
BenchOutcome run_bench(const ExperimentConfig& config, std::ostream* log = nullptr);

// Synthetic study: X ~ N(0, 1), Y = a X + sigma Z, f(y) = sin(y), for which
// E[f(Y) | X = x] = sin(a x) exp(-sigma^2 / 2).
struct ConvergenceConfig {
  std::vector<Eigen::Index> n_grid{250, 500, 1000, 2000, 4000};
  int replications = 10;
  double a = 0.8;
  double sigma = 0.5;
  double epsilon = 1e-5;
  Eigen::Index test_points = 2000;
  std::uint64_t seed = 2024;
};

struct ConvergencePoint {
  Eigen::Index n = 0;
  std::vector<double> errors;  // empirical L2 error per replication
  double median = 0.0;
  double mean = 0.0;
  double mean_rank_x = 0.0;
  double mean_rank_y = 0.0;
};

std::vector<ConvergencePoint> convergence_study(const ConvergenceConfig& config);

}  // namespace cmelr
