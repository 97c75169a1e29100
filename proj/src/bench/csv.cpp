#include "cmelr/bench.hpp"
#include "cmelr/errors.hpp"

#include <cmath>
#include <fstream>
#include <locale>
#include <map>
#include <ostream>
#include <set>

namespace cmelr {
namespace {

void prepare(std::ostream& out) {
  out.imbue(std::locale::classic());
  out.precision(12);
}

template <class T>
void opt(std::ostream& out, const std::optional<T>& v) {
  if (v) out << *v;
}

void interval_cells(std::ostream& out, const Interval* i) {
  if (i) {
    out << ',' << i->mean << ',' << i->lo << ',' << i->hi;
  } else {
    out << ",nan,nan,nan";
  }
}

bool same(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b)); }

std::ofstream open_file(const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + file.string());
  prepare(out);
  return out;
}

}  // namespace

void write_results_header(std::ostream& out) {
  out << "method,n,T,strike,log_moneyness,rep,epsilon,price,implied_vol,rel_iv_error,valid,elapsed_micros,"
         "rank_x,rank_y,seed\n";
}

void write_result_line(std::ostream& out, const ResultRow& row) {
  prepare(out);
  out << to_string(row.method) << ',' << row.n << ',' << row.maturity << ',' << row.strike << ',' << row.log_moneyness
      << ',' << row.rep << ',' << row.epsilon << ',' << row.price << ',';
  opt(out, row.implied_vol);
  out << ',';
  opt(out, row.rel_iv_error);
  out << ',' << (row.valid() ? 1 : 0) << ',' << row.elapsed_micros << ',';
  opt(out, row.rank_x);
  out << ',';
  opt(out, row.rank_y);
  out << ',' << row.seed << '\n';
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  write_results_header(out);
  for (const auto& row : rows) write_result_line(out, row);
}

void write_reference_csv(std::ostream& out, const std::vector<ReferencePoint>& references) {
  prepare(out);
  out << "T,strike,price,std_error,implied_vol\n";
  for (const auto& r : references) {
    out << r.maturity << ',' << r.strike << ',' << r.price << ',' << r.std_error << ',';
    opt(out, r.implied_vol);
    out << '\n';
  }
}

void write_bounds_csv(std::ostream& out, const std::vector<BoundRow>& bounds) {
  prepare(out);
  out << "N,T,rep,n_steps,delta_lr,frob_f_sq,frob_is_upper_estimate,kappa_x_empirical,bound_lr_part,statistical_part\n";
  for (const auto& b : bounds) {
    const auto& r = b.report;
    out << b.n << ',' << b.maturity << ',' << b.rep << ',' << r.n_steps << ',' << r.delta.delta_lr << ','
        << r.delta.frob_f_sq << ',' << (r.delta.frob_is_upper_estimate ? 1 : 0) << ',' << r.kappa_x_empirical << ','
        << r.bound_lr_part << ",\"" << r.statistical_part << "\"\n";
  }
}

void write_timing_csv(std::ostream& out, const std::vector<TimingSummary>& timing, double maturity) {
  prepare(out);
  out << "N,mean_logtime_poly,lo_logtime_poly,hi_logtime_poly,mean_logtime_cme,lo_logtime_cme,hi_logtime_cme\n";
  std::map<Eigen::Index, std::pair<const Interval*, const Interval*>> by_n;
  for (const auto& t : timing) {
    if (!same(t.maturity, maturity)) continue;
    auto& slot = by_n[t.n];
    if (t.method == PricingMethod::LongstaffSchwartz) slot.first = &t.log10_micros;
    if (t.method == PricingMethod::CmeLowRank) slot.second = &t.log10_micros;
  }
  for (const auto& [n, slot] : by_n) {
    out << n;
    interval_cells(out, slot.first);
    interval_cells(out, slot.second);
    out << '\n';
  }
}

void write_error_csv(std::ostream& out, const IvErrorAggregate& aggregate, double maturity) {
  prepare(out);
  out << "N,mean_relerr_poly,lo_poly,hi_poly,mean_relerr_cme,lo_cme,hi_cme\n";
  std::map<Eigen::Index, std::pair<const Interval*, const Interval*>> by_n;
  for (const auto& s : aggregate.by_cell) {
    if (!same(s.maturity, maturity)) continue;
    auto& slot = by_n[s.n];
    if (s.method == PricingMethod::LongstaffSchwartz) slot.first = &s.error;
    if (s.method == PricingMethod::CmeLowRank) slot.second = &s.error;
  }
  for (const auto& [n, slot] : by_n) {
    out << n;
    interval_cells(out, slot.first);
    interval_cells(out, slot.second);
    out << '\n';
  }
}

void write_moneyness_csv(std::ostream& out, const IvErrorAggregate& aggregate, double maturity, Eigen::Index n) {
  prepare(out);
  out << "logmoneyness,mean_relerr_poly,lo_poly,hi_poly,mean_relerr_cme,lo_cme,hi_cme\n";
  std::map<double, std::pair<const Interval*, const Interval*>> by_m;
  for (const auto& s : aggregate.by_moneyness) {
    if (!same(s.maturity, maturity) || s.n != n || !s.log_moneyness) continue;
    auto& slot = by_m[*s.log_moneyness];
    if (s.method == PricingMethod::LongstaffSchwartz) slot.first = &s.error;
    if (s.method == PricingMethod::CmeLowRank) slot.second = &s.error;
  }
  for (const auto& [m, slot] : by_m) {
    out << m;
    interval_cells(out, slot.first);
    interval_cells(out, slot.second);
    out << '\n';
  }
}

void write_rank_csv(std::ostream& out, const std::vector<RankSummary>& ranks, double maturity) {
  prepare(out);
  out << "N,epsilon,mean_rank_x,mean_rank_y,min_rank_x,max_rank_x,reps\n";
  for (const auto& r : ranks) {
    if (!same(r.maturity, maturity)) continue;
    out << r.n << ',' << r.epsilon << ',' << r.mean_rank_x << ',' << r.mean_rank_y << ',' << r.min_rank_x << ','
        << r.max_rank_x << ',' << r.reps << '\n';
  }
}

BenchOutcome run_bench(const ExperimentConfig& config, std::ostream* log) {
  config.validate();
  std::filesystem::create_directories(config.output_dir);
  const auto& dir = config.output_dir;
  BenchOutcome outcome;
  auto record = [&](const std::filesystem::path& file) { outcome.files.push_back(file); };

  std::vector<ResultRow> rows;
  std::vector<BoundRow> bounds;
  {
    const auto file = dir / "results.csv";
    std::ofstream out = open_file(file);
    write_results_header(out);
    GridObserver observer;
    observer.on_row = [&](const ResultRow& row) {
      write_result_line(out, row);
      rows.push_back(row);
      if (!row.valid()) ++outcome.invalid_rows;
    };
    observer.on_bound = [&](const BoundRow& b) { bounds.push_back(b); };
    observer.on_cell_error = [&](int rep, Eigen::Index n, double maturity, const std::exception& e) {
      ++outcome.aborted_cells;
      if (log) *log << "cell rep=" << rep << " n=" << n << " T=" << maturity << " aborted: " << e.what() << '\n';
    };
    run_grid(config, observer);
    record(file);
  }
  outcome.rows = static_cast<int>(rows.size());
  if (log) *log << "grid: " << outcome.rows << " rows, " << outcome.invalid_rows << " invalid\n";

  if (!bounds.empty()) {
    const auto file = dir / "bounds.csv";
    std::ofstream out = open_file(file);
    write_bounds_csv(out, bounds);
    record(file);
  }

  std::vector<ReferencePoint> references;
  if (config.reference_file) {
    references = load_reference_csv(*config.reference_file, config);
  } else if (config.heston.r == 0.0) {
    references = reference_prices_r0(config);
  } else if (log) {
    *log << "no reference for r != 0; set reference_file to emit error files\n";
  }

  const std::vector<TimingSummary> timing = timing_summary(rows);
  std::vector<RankSummary> ranks;
  if (const auto obs = rank_observations(rows); !obs.empty()) ranks = rank_summary(obs);

  std::optional<IvErrorAggregate> aggregate;
  if (!references.empty() && !rows.empty()) {
    const auto file = dir / "reference.csv";
    std::ofstream out = open_file(file);
    write_reference_csv(out, references);
    record(file);
    aggregate = aggregate_iv_error(rows, references);
    outcome.errors_written = true;
  }

  for (std::size_t ti = 0; ti < config.maturities.size(); ++ti) {
    const double maturity = config.maturities[ti];
    const std::string t_tag = "T" + std::to_string(ti + 1);
    {
      const auto file = dir / ("winner_time_" + t_tag + ".csv");
      std::ofstream out = open_file(file);
      write_timing_csv(out, timing, maturity);
      record(file);
    }
    if (!ranks.empty()) {
      const auto file = dir / ("rank_" + t_tag + ".csv");
      std::ofstream out = open_file(file);
      write_rank_csv(out, ranks, maturity);
      record(file);
    }
    if (aggregate) {
      const auto file = dir / ("winner_err_" + t_tag + ".csv");
      std::ofstream out = open_file(file);
      write_error_csv(out, *aggregate, maturity);
      record(file);
      for (std::size_t ni = 0; ni < config.n_grid.size(); ++ni) {
        const auto mfile = dir / ("error_mk_winner_" + t_tag + "_N" + std::to_string(ni + 1) + ".csv");
        std::ofstream mout = open_file(mfile);
        write_moneyness_csv(mout, *aggregate, maturity, config.n_grid[ni]);
        record(mfile);
      }
    }
  }
  return outcome;
}

}  // namespace cmelr
