#include "cmelr/bench.hpp"
#include "cmelr/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace cmelr;

namespace {

ResultRow row(PricingMethod method, int rep, int strike_index, double strike, std::optional<double> iv) {
  ResultRow r;
  r.method = method;
  r.n = 100;
  r.maturity = 1.0;
  r.rep = rep;
  r.strike = strike;
  r.strike_index = strike_index;
  r.implied_vol = iv;
  return r;
}

ReferencePoint ref(double strike, int strike_index, double iv) {
  ReferencePoint p;
  p.maturity = 1.0;
  p.strike = strike;
  p.strike_index = strike_index;
  p.implied_vol = iv;
  return p;
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.n_grid = {200};
  c.maturities = {0.25};
  c.moneyness_count = 2;
  c.replications = 1;
  c.reference_paths = 20000;
  return c;
}

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST_CASE("strike grid") {
  const auto k = strike_grid(100.0, 0.04, 1.0, 10);
  REQUIRE(k.size() == 10);
  CHECK(k[4] < 100.0);
  CHECK(k[5] > 100.0);
  CHECK(k.front() == doctest::Approx(67.032004603563930));
  CHECK(k.back() == doctest::Approx(149.18246976412703));
  for (std::size_t i = 0; i + 1 < k.size(); ++i) CHECK(k[i] < k[i + 1]);
  const auto m = log_moneyness_grid(10);
  CHECK(m.front() == -2.0);
  CHECK(m.back() == 2.0);
  CHECK_THROWS_AS(strike_grid(100.0, 0.04, 1.0, 1), Error);
}

TEST_CASE("config parsing") {
  const ExperimentConfig c = parse_config(
      "# desk run\n"
      "n_grid = 100, 1e3\n"
      "maturities = 0.5,1\n"
      "replications = 5  # fewer\n"
      "xi = 0.4\n"
      "methods = ls\n");
  CHECK(c.n_grid == std::vector<Eigen::Index>{100, 1000});
  CHECK(c.maturities == std::vector<double>{0.5, 1.0});
  CHECK(c.replications == 5);
  CHECK(c.heston.xi == 0.4);
  CHECK(c.methods == std::vector<PricingMethod>{PricingMethod::LongstaffSchwartz});
  CHECK(c.moneyness_count == 10);
  CHECK(c.lambda_for(10000) == doctest::Approx(0.01));
  c.validate();

  const ExperimentConfig d = parse_config("replications = 7", c);
  CHECK(d.replications == 7);
  CHECK(d.n_grid == c.n_grid);

  CHECK_THROWS_AS(parse_config("bogus = 1"), Error);
  CHECK_THROWS_AS(parse_config("replications = 2.5"), Error);
  CHECK_THROWS_AS(parse_config("n_grid"), Error);
  ExperimentConfig bad;
  bad.n_grid = {10, 20, 30, 40, 50};
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.lambda_rule = "n^-1";
  CHECK_THROWS_AS(bad.validate(), Error);
  bad = {};
  bad.methods = {PricingMethod::Binomial};
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("grid produces one row per method and strike") {
  const ExperimentConfig c = tiny_config();
  const auto rows = run_grid(c);
  REQUIRE(rows.size() == 4);
  int cme = 0;
  for (const auto& r : rows) {
    CHECK(r.seed == experiment_seed(0, 0, 0));
    CHECK(r.n == 200);
    CHECK(std::isfinite(r.price));
    if (r.method == PricingMethod::CmeLowRank) {
      ++cme;
      CHECK(r.rank_x.has_value());
    }
  }
  CHECK(cme == 2);

  const auto again = run_grid(c);
  for (std::size_t i = 0; i < rows.size(); ++i) CHECK(again[i].price == rows[i].price);
}

TEST_CASE("aggregation") {
  SUBCASE("relative error of a single row") {
    const auto agg = aggregate_iv_error({row(PricingMethod::LongstaffSchwartz, 0, 0, 90.0, 0.22)}, {ref(90.0, 0, 0.2)});
    REQUIRE(agg.by_cell.size() == 1);
    CHECK(agg.by_cell[0].error.mean == doctest::Approx(0.1));
    CHECK(agg.by_cell[0].error.lo == agg.by_cell[0].error.mean);
  }
  SUBCASE("exact match") {
    const auto agg = aggregate_iv_error({row(PricingMethod::CmeLowRank, 0, 0, 90.0, 0.2)}, {ref(90.0, 0, 0.2)});
    CHECK(agg.by_cell[0].error.mean == 0.0);
  }
  SUBCASE("three rows over two reps with an invalid one") {
    const std::vector<ResultRow> rows{
        row(PricingMethod::LongstaffSchwartz, 0, 0, 90.0, 0.21),  // 0.05
        row(PricingMethod::LongstaffSchwartz, 1, 0, 90.0, 0.18),  // 0.10
        row(PricingMethod::LongstaffSchwartz, 1, 1, 110.0, std::nullopt),
    };
    const auto agg = aggregate_iv_error(rows, {ref(90.0, 0, 0.2), ref(110.0, 1, 0.2)});
    REQUIRE(agg.by_cell.size() == 1);
    const auto& s = agg.by_cell[0];
    CHECK(s.count == 2);
    CHECK(s.invalid == 1);
    CHECK(s.error.mean == doctest::Approx(0.075));
    // sd of {0.05, 0.10} is 0.035355; half-width 1.96 sd / sqrt(2) = 0.049
    CHECK(s.error.hi - s.error.mean == doctest::Approx(0.049));
    CHECK(agg.by_moneyness.size() == 2);
  }
  SUBCASE("missing reference") {
    const auto fn = [] { aggregate_iv_error({row(PricingMethod::CmeLowRank, 0, 0, 95.0, 0.2)}, {ref(90.0, 0, 0.2)}); };
    CHECK_THROWS_AS(fn(), Error);
    try {
      fn();
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MissingReference);
    }
  }
  CHECK_THROWS_AS(normal_interval({}), Error);
  const Interval single = normal_interval({3.0});
  CHECK(single.lo == 3.0);
  CHECK(single.hi == 3.0);
}

TEST_CASE("timing summary uses log10 microseconds") {
  auto a = row(PricingMethod::CmeLowRank, 0, 0, 90.0, 0.2);
  auto b = row(PricingMethod::CmeLowRank, 0, 1, 110.0, 0.2);
  a.elapsed_micros = 100.0;
  b.elapsed_micros = 10000.0;
  const auto t = timing_summary({a, b});
  REQUIRE(t.size() == 1);
  CHECK(t[0].log10_micros.mean == doctest::Approx(3.0));
}

TEST_CASE("reference prices") {
  ExperimentConfig c = tiny_config();
  c.moneyness_count = 3;
  const auto refs = reference_prices_r0(c);
  REQUIRE(refs.size() == 3);
  for (const auto& p : refs) {
    CHECK(p.price > std::max(p.strike - c.heston.s0, 0.0));
    CHECK(p.price < p.strike);
    CHECK(p.implied_vol.has_value());
  }
  c.reference_paths = 40000;
  const auto more = reference_prices_r0(c);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    CHECK(std::abs(more[i].price - refs[i].price) <= 4.0 * refs[i].std_error);
  }
  c.heston.r = 0.03;
  try {
    reference_prices_r0(c);
    FAIL("expected NotApplicable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotApplicable);
  }
}

TEST_CASE("rank summary") {
  RankObservation o;
  o.n = 100;
  o.maturity = 1.0;
  o.epsilon = 1e-5;
  o.rank_x = 7;
  o.rank_y = 30;
  const auto s = rank_summary({o});
  REQUIRE(s.size() == 1);
  CHECK(s[0].mean_rank_x == 7.0);
  CHECK(s[0].mean_rank_y == 30.0);
  CHECK(s[0].min_rank_x == 7);
  CHECK(s[0].max_rank_x == 7);
  CHECK(s[0].reps == 1);
  CHECK_THROWS_AS(rank_summary({}), Error);
}

TEST_CASE("csv headers") {
  std::ostringstream results, timing, error, moneyness, rank;
  write_results_csv(results, {});
  write_timing_csv(timing, {}, 1.0);
  write_error_csv(error, {}, 1.0);
  write_moneyness_csv(moneyness, {}, 1.0, 100);
  write_rank_csv(rank, {}, 1.0);
  CHECK(first_line(results.str()).rfind("method,n,T,strike", 0) == 0);
  CHECK(first_line(timing.str()) == "N,mean_logtime_poly,lo_logtime_poly,hi_logtime_poly,mean_logtime_cme,lo_logtime_cme,hi_logtime_cme");
  CHECK(first_line(error.str()) == "N,mean_relerr_poly,lo_poly,hi_poly,mean_relerr_cme,lo_cme,hi_cme");
  CHECK(first_line(moneyness.str()) == "logmoneyness,mean_relerr_poly,lo_poly,hi_poly,mean_relerr_cme,lo_cme,hi_cme");
  CHECK(first_line(rank.str()) == "N,epsilon,mean_rank_x,mean_rank_y,min_rank_x,max_rank_x,reps");
}

TEST_CASE("convergence study error decreases with n") {
  ConvergenceConfig c;
  c.n_grid = {100, 1600};
  c.replications = 3;
  c.test_points = 500;
  const auto pts = convergence_study(c);
  REQUIRE(pts.size() == 2);
  CHECK(pts[1].median < pts[0].median);
  CHECK(pts[0].errors.size() == 3);
}
