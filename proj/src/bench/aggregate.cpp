#include "cmelr/bench.hpp"
#include "cmelr/errors.hpp"

#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <tuple>

namespace cmelr {
namespace {

constexpr double kZ95 = 1.96;

using CellKey = std::tuple<int, Eigen::Index, double>;

double mean_of(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()); }

double half_width(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  const double sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  return kZ95 * sd / std::sqrt(static_cast<double>(v.size()));
}

}  // namespace

Interval normal_interval(const std::vector<double>& values) {
  if (values.empty()) throw Error(ErrorCode::EmptyInput, "interval of an empty sample");
  const double m = mean_of(values);
  const double h = half_width(values);
  return {m, m - h, m + h};
}

IvErrorAggregate aggregate_iv_error(const std::vector<ResultRow>& rows, const std::vector<ReferencePoint>& references) {
  if (rows.empty()) throw Error(ErrorCode::EmptyInput, "no result rows");
  std::vector<ResultRow> scored = rows;
  attach_reference(scored, references);

  struct Cell {
    std::map<int, std::vector<double>> by_rep;
    std::vector<double> all;
    int invalid = 0;
  };
  std::map<CellKey, Cell> cells;
  std::map<std::tuple<int, Eigen::Index, double, int>, Cell> strikes;
  std::map<std::tuple<int, Eigen::Index, double, int>, double> strike_moneyness;

  for (const ResultRow& row : scored) {
    const CellKey key{static_cast<int>(row.method), row.n, row.maturity};
    const auto skey = std::tuple_cat(key, std::make_tuple(row.strike_index));
    strike_moneyness[skey] = row.log_moneyness;
    if (!row.rel_iv_error) {
      ++cells[key].invalid;
      ++strikes[skey].invalid;
      continue;
    }
    cells[key].by_rep[row.rep].push_back(*row.rel_iv_error);
    cells[key].all.push_back(*row.rel_iv_error);
    strikes[skey].all.push_back(*row.rel_iv_error);
  }

  IvErrorAggregate out;
  for (const auto& [key, cell] : cells) {
    ErrorSummary s;
    s.method = static_cast<PricingMethod>(std::get<0>(key));
    s.n = std::get<1>(key);
    s.maturity = std::get<2>(key);
    s.count = static_cast<int>(cell.all.size());
    s.invalid = cell.invalid;
    if (!cell.all.empty()) {
      std::vector<double> rep_means;
      for (const auto& [rep, values] : cell.by_rep) rep_means.push_back(mean_of(values));
      const double m = mean_of(cell.all);
      const double h = half_width(rep_means);
      s.error = {m, m - h, m + h};
    } else {
      s.error = {NAN, NAN, NAN};
    }
    out.by_cell.push_back(s);
  }
  for (const auto& [key, cell] : strikes) {
    ErrorSummary s;
    s.method = static_cast<PricingMethod>(std::get<0>(key));
    s.n = std::get<1>(key);
    s.maturity = std::get<2>(key);
    s.log_moneyness = strike_moneyness[key];
    s.count = static_cast<int>(cell.all.size());
    s.invalid = cell.invalid;
    s.error = cell.all.empty() ? Interval{NAN, NAN, NAN} : normal_interval(cell.all);
    out.by_moneyness.push_back(s);
  }
  return out;
}

std::vector<TimingSummary> timing_summary(const std::vector<ResultRow>& rows) {
  std::map<CellKey, std::map<int, std::vector<double>>> cells;
  for (const ResultRow& row : rows) {
    const double micros = std::max(row.elapsed_micros, 1e-3);
    cells[{static_cast<int>(row.method), row.n, row.maturity}][row.rep].push_back(std::log10(micros));
  }
  std::vector<TimingSummary> out;
  for (const auto& [key, reps] : cells) {
    std::vector<double> rep_means;
    for (const auto& [rep, values] : reps) rep_means.push_back(mean_of(values));
    out.push_back({static_cast<PricingMethod>(std::get<0>(key)), std::get<1>(key), std::get<2>(key),
                   normal_interval(rep_means)});
  }
  return out;
}

std::vector<RankObservation> rank_observations(const std::vector<ResultRow>& rows) {
  std::set<std::tuple<Eigen::Index, double, double, int>> seen;
  std::vector<RankObservation> out;
  for (const ResultRow& row : rows) {
    if (row.method != PricingMethod::CmeLowRank || !row.rank_x || !row.rank_y) continue;
    if (!seen.insert({row.n, row.maturity, row.epsilon, row.rep}).second) continue;
    out.push_back({row.n, row.maturity, row.t_index, row.epsilon, row.rep, *row.rank_x, *row.rank_y});
  }
  return out;
}

std::vector<RankSummary> rank_summary(const std::vector<RankObservation>& observations) {
  if (observations.empty()) throw Error(ErrorCode::EmptyInput, "no rank observations");
  std::map<std::tuple<Eigen::Index, double, double>, std::vector<const RankObservation*>> cells;
  for (const auto& obs : observations) cells[{obs.n, obs.maturity, obs.epsilon}].push_back(&obs);

  std::vector<RankSummary> out;
  for (const auto& [key, group] : cells) {
    RankSummary s;
    s.n = std::get<0>(key);
    s.maturity = std::get<1>(key);
    s.epsilon = std::get<2>(key);
    s.t_index = group.front()->t_index;
    s.reps = static_cast<int>(group.size());
    s.min_rank_x = group.front()->rank_x;
    s.max_rank_x = group.front()->rank_x;
    for (const auto* obs : group) {
      s.mean_rank_x += static_cast<double>(obs->rank_x);
      s.mean_rank_y += static_cast<double>(obs->rank_y);
      s.min_rank_x = std::min(s.min_rank_x, obs->rank_x);
      s.max_rank_x = std::max(s.max_rank_x, obs->rank_x);
    }
    s.mean_rank_x /= s.reps;
    s.mean_rank_y /= s.reps;
    out.push_back(s);
  }
  return out;
}

}  // namespace cmelr
