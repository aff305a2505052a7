// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include "hypo/datagen.hpp"
#include "hypo/trainer.hpp"

namespace {

using namespace hypo;

SyntheticWorld bench_world() {
  WorldConfig wc;
  wc.n_prompts = 16;
  wc.n_responses = 8;
  wc.ref_misalignment = 2.0;
  wc.seed = 1;
  return build_world(wc);
}

void BM_SamplePreferences(benchmark::State& state) {
  const SyntheticWorld world = bench_world();
  const auto n = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(sample_preferences(world, n, 0.0, 7));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SamplePreferences)->Arg(1000)->Arg(10000);

void BM_BatchObjective(benchmark::State& state) {
  const SyntheticWorld world = bench_world();
  const PreferenceDataset ds = sample_preferences(world, 128, 0.0, 7);
  std::vector<double> margins;
  for (const auto& r : ds.records) margins.push_back(r.ref_margin);
  const HyperParams hp;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        batch_objective(world.ref_policy, ds.records, margins, ObjectiveKind::HyPOHard, hp));
  }
}
BENCHMARK(BM_BatchObjective);

void BM_TrainEpoch(benchmark::State& state) {
  const SyntheticWorld world = bench_world();
  const auto [train_set, eval_set] = split_dataset(sample_preferences(world, 11111, 0.0, 7), 7);
  TrainConfig cfg;
  cfg.objective = state.range(0) == 0 ? ObjectiveKind::DPO : ObjectiveKind::HyPOHard;
  cfg.eval_every = 1000;
  for (auto _ : state) {
    benchmark::DoNotOptimize(train(world.ref_policy, world.ref_policy, train_set, eval_set, cfg));
  }
  state.SetLabel(std::string(to_string(cfg.objective)));
}
BENCHMARK(BM_TrainEpoch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
