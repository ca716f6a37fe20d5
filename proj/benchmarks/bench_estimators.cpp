#include <benchmark/benchmark.h>

#include <map>

#include "sivwate/bootstrap.hpp"
#include "sivwate/dgp.hpp"
#include "sivwate/dgp_builders.hpp"
#include "sivwate/estimators.hpp"
#include "sivwate/nuisance.hpp"

using namespace sivwate;

namespace {

const ObservedDataset& data(std::size_t n) {
  static std::map<std::size_t, ObservedDataset> cache;
  auto it = cache.find(n);
  if (it == cache.end())
    it = cache.emplace(n, sample_dataset(random_dgp({4, 3, 3}, 7, true), n, 1)).first;
  return it->second;
}

void BM_Wald(benchmark::State& state) {
  const auto& ds = data(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(estimate_wald(ds).point);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_RegressionSaturated(benchmark::State& state) {
  const auto& ds = data(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    const auto n = fit_nuisance(ds, NuisanceSpecs::saturated());
    benchmark::DoNotOptimize(estimate_sivwate_regression(ds, n).point);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_RegressionLogistic(benchmark::State& state) {
  const auto& ds = data(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    const auto n = fit_nuisance(ds, NuisanceSpecs::main_effects());
    benchmark::DoNotOptimize(estimate_sivwate_regression(ds, n).point);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Weighting(benchmark::State& state) {
  const auto& ds = data(static_cast<std::size_t>(state.range(0)));
  const auto n = fit_nuisance(ds, NuisanceSpecs::main_effects());
  for (auto _ : state)
    benchmark::DoNotOptimize(
        estimate_sivwate_weighting(ds, *n.e, OutcomeTransform::identity()).point);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Bootstrap(benchmark::State& state) {
  const auto& ds = data(5000);
  BootstrapPlan plan;
  plan.replicates = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) {
    const auto ci = percentile_ci(
        [](const ObservedDataset& d) {
          return estimate_sivwate_regression(d, fit_nuisance(d, NuisanceSpecs::saturated())).point;
        },
        ds, plan);
    benchmark::DoNotOptimize(ci.lower);
  }
}

void BM_PopulationTruth(benchmark::State& state) {
  const auto dgp = random_dgp({4, 4, 3}, 3, false);
  for (auto _ : state) benchmark::DoNotOptimize(population_truth(dgp).sivwate);
}

}  // namespace

BENCHMARK(BM_Wald)->Arg(5000)->Arg(200000);
BENCHMARK(BM_RegressionSaturated)->Arg(5000)->Arg(200000);
BENCHMARK(BM_RegressionLogistic)->Arg(5000)->Arg(50000);
BENCHMARK(BM_Weighting)->Arg(5000)->Arg(200000);
BENCHMARK(BM_Bootstrap)->Arg(100)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_PopulationTruth);

BENCHMARK_MAIN();
