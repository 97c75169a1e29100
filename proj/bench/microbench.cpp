#include "cmelr/cme.hpp"
#include "cmelr/market.hpp"
#include "cmelr/pricing.hpp"

#include <benchmark/benchmark.h>

#include <span>

using namespace cmelr;

namespace {

void BM_SimulateSerial(benchmark::State& state) {
  const HestonParams h;
  for (auto _ : state) benchmark::DoNotOptimize(serial::simulate_heston(h, state.range(0), 1.0, 52, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_SimulateParallel(benchmark::State& state) {
  const HestonParams h;
  for (auto _ : state) benchmark::DoNotOptimize(simulate_heston(h, state.range(0), 1.0, 52, 1));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

struct Fitted {
  PathSet paths;
  CmeOperator op;
  SampleMatrix queries;
  Eigen::VectorXd f;
};

Fitted fitted(Eigen::Index n) {
  Fitted out;
  out.paths = simulate_heston(HestonParams{}, n, 1.0, 3);
  const CmeModel model = default_cme_model(out.paths);
  out.op = price_american_cme_detailed(out.paths, {100.0, 1.0}, model).op;
  out.queries.resize(n, 2);
  out.queries.col(0) = out.paths.log_prices.col(26);
  out.queries.col(1) = out.paths.variances.col(26);
  out.f = discounted_payoffs(out.paths, {100.0, 1.0}, 52);
  return out;
}

void BM_ApplySerial(benchmark::State& state) {
  const Fitted fx = fitted(state.range(0));
  const std::span<const double> f(fx.f.data(), static_cast<std::size_t>(fx.f.size()));
  for (auto _ : state) benchmark::DoNotOptimize(serial::apply_cme(fx.op, f, fx.queries));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_ApplyParallel(benchmark::State& state) {
  const Fitted fx = fitted(state.range(0));
  const std::span<const double> f(fx.f.data(), static_cast<std::size_t>(fx.f.size()));
  for (auto _ : state) benchmark::DoNotOptimize(apply_cme(fx.op, f, fx.queries));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_SimulateSerial)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SimulateParallel)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ApplySerial)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_ApplyParallel)->Arg(1000)->Arg(10000)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
