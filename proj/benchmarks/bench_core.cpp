#include <benchmark/benchmark.h>

#include <vector>

#include "durations/design.hpp"
#include "durations/fp_model.hpp"
#include "durations/inference.hpp"
#include "durations/rng.hpp"
#include "durations/scenarios.hpp"
#include "durations/targets.hpp"

using namespace durations;

namespace {

AggregatedData sample_aggregate(int scenario, uint64_t tag) {
  RngStream rng = RngStream::from_words({900, tag});
  return aggregate(
      generate_dataset(scenario, TrialDesign::default_design(), rng));
}

void BM_SingleFit(benchmark::State& state) {
  const AggregatedData agg = sample_aggregate(1, 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_fp(agg, 500, FpPowers::fp2(-1, 0.5), {}));
  }
}
BENCHMARK(BM_SingleFit);

void BM_ExhaustiveSelection(benchmark::State& state) {
  const AggregatedData agg = sample_aggregate(2, 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(select_fp2_exhaustive(agg, 500, {}));
  }
}
BENCHMARK(BM_ExhaustiveSelection);

void BM_BootstrapReplicate(benchmark::State& state) {
  RngStream rng = RngStream::from_words({900, 3});
  const TrialDataset data =
      generate_dataset(1, TrialDesign::default_design(), rng);
  const TrialDesign design = TrialDesign::default_design();
  const EstimationTarget target = RiskDifference{0.10};
  uint64_t i = 0;
  for (auto _ : state) {
    RngStream child = rng.child(4, i++);
    const TrialDataset resample = bootstrap_resample(data, child);
    const FittedCurve fit =
        select_fp2_exhaustive(aggregate(resample), 500, {});
    benchmark::DoNotOptimize(solve_dstar(make_view(fit), target, design));
  }
}
BENCHMARK(BM_BootstrapReplicate);

void BM_BcaInterval(benchmark::State& state) {
  RngStream rng = RngStream::from_words({900, 4});
  std::vector<double> boot(500);
  for (double& v : boot) v = rng.uniform01();
  std::vector<double> jack(50);
  for (double& v : jack) v = rng.uniform01();
  for (auto _ : state) {
    benchmark::DoNotOptimize(bca_interval(boot, 0.5, jack, 0.95));
  }
}
BENCHMARK(BM_BcaInterval);

}  // namespace

BENCHMARK_MAIN();
