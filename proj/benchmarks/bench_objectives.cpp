// SPDX-License-Identifier: Apache-2.0
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "hypo/objectives.hpp"
#include "hypo/viz_export.hpp"

namespace {

using namespace hypo;

std::vector<MarginPair> random_pairs(std::size_t n) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> dist(-8.0, 8.0);
  std::vector<MarginPair> out(n);
  for (auto& p : out) p = {dist(rng), dist(rng)};
  return out;
}

void BM_Evaluate(benchmark::State& state) {
  const auto kind = static_cast<ObjectiveKind>(state.range(0));
  const auto pairs = random_pairs(4096);
  HyperParams hp;
  hp.alpha = 10.0;
  hp.lambda_sft = 0.1;
  const std::optional<double> logp =
      kind == ObjectiveKind::DPOPlusSFT ? std::optional<double>(-1.5) : std::nullopt;
  for (auto _ : state) {
    for (const auto& p : pairs) benchmark::DoNotOptimize(evaluate(kind, p, logp, hp));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(pairs.size()));
  state.SetLabel(std::string(to_string(kind)));
}
BENCHMARK(BM_Evaluate)->DenseRange(0, 4);

void BM_WeightHeatmap(benchmark::State& state) {
  GridSpec grid;
  grid.theta_range.n_steps = grid.ref_range.n_steps = static_cast<std::size_t>(state.range(0));
  const HyperParams hp;
  for (auto _ : state) benchmark::DoNotOptimize(weight_heatmap(ObjectiveKind::HyPOHard, hp, grid));
}
BENCHMARK(BM_WeightHeatmap)->Arg(121)->Arg(501);

}  // namespace
