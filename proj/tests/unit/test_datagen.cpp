// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <tuple>

#include "hypo/datagen.hpp"
#include "hypo/errors.hpp"
#include "oracles.hpp"

namespace hypo {
namespace {

WorldConfig small_world(std::uint64_t seed, double misalignment = 0.0) {
  WorldConfig c;
  c.n_prompts = 16;
  c.n_responses = 8;
  c.ref_misalignment = misalignment;
  c.seed = seed;
  return c;
}

// Probability that a uniformly drawn pair of this world is labelled against its reward order
// under Bradley-Terry: the mean of sigmoid(-|r_a - r_b|) over every ordered pair.
double bt_misorder_probability(const SyntheticWorld& w) {
  long double total = 0.0L;
  std::size_t n = 0;
  for (std::size_t x = 0; x < w.config.n_prompts; ++x) {
    for (std::size_t a = 0; a < w.config.n_responses; ++a) {
      for (std::size_t b = 0; b < w.config.n_responses; ++b) {
        if (a == b) continue;
        total += testing::sigmoid_ld(-std::fabs(static_cast<long double>(w.true_reward(x, a)) -
                                                w.true_reward(x, b)));
        ++n;
      }
    }
  }
  return static_cast<double>(total / n);
}

// E[sigmoid(-|g|)] for g ~ N(0, 2), by composite Simpson on [0, 40].
double bt_misorder_population() {
  const int n = 200000;
  const double hi = 40.0;
  const double h = hi / n;
  auto f = [](double g) {
    const double density = 2.0 * std::exp(-g * g / 4.0) / std::sqrt(4.0 * std::numbers::pi);
    return density / (1.0 + std::exp(g));
  };
  double s = f(0.0) + f(hi);
  for (int i = 1; i < n; ++i) s += f(i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

TEST(WorldConfig, Validation) {
  WorldConfig c;
  EXPECT_NO_THROW(c.validate());
  c.n_responses = 1;
  EXPECT_THROW(c.validate(), ParameterError);
  c = WorldConfig{};
  c.n_prompts = kMaxVocabulary + 1;
  EXPECT_THROW(c.validate(), ParameterError);
  c = WorldConfig{};
  c.ref_misalignment = -1.0;
  EXPECT_THROW(c.validate(), ParameterError);
  c = WorldConfig{};
  c.ref_tau = 0.0;
  EXPECT_THROW(c.validate(), ParameterError);
}

TEST(BuildWorld, DeterministicPerSeed) {
  const SyntheticWorld a = build_world(small_world(3, 2.0));
  const SyntheticWorld b = build_world(small_world(3, 2.0));
  const SyntheticWorld c = build_world(small_world(4, 2.0));
  EXPECT_EQ(a.true_reward, b.true_reward);
  EXPECT_EQ(a.ref_policy.logits(), b.ref_policy.logits());
  EXPECT_FALSE(a.true_reward == c.true_reward);
}

TEST(BuildWorld, AlignedReferenceIsGibbsOfReward) {
  WorldConfig c = small_world(5);
  c.ref_tau = 2.0;
  const SyntheticWorld w = build_world(c);
  for (std::size_t a = 1; a < 8; ++a) {
    EXPECT_NEAR(w.ref_policy.policy_margin(3, a, 0), (w.true_reward(3, a) - w.true_reward(3, 0)) / 2.0,
                1e-12);
  }
}

TEST(BuildWorld, MisalignmentOnlyMovesReference) {
  const SyntheticWorld a = build_world(small_world(6, 0.0));
  const SyntheticWorld b = build_world(small_world(6, 5.0));
  EXPECT_EQ(a.true_reward, b.true_reward);
  EXPECT_FALSE(a.ref_policy.logits() == b.ref_policy.logits());
}

TEST(SamplePreferences, DeterministicAndValid) {
  const SyntheticWorld w = build_world(small_world(7, 1.0));
  const PreferenceDataset a = sample_preferences(w, 5000, 0.1, 99);
  const PreferenceDataset b = sample_preferences(w, 5000, 0.1, 99);
  EXPECT_EQ(a.records, b.records);
  EXPECT_NO_THROW(a.validate(w.ref_policy));
  for (const auto& r : a.records) {
    EXPECT_NE(r.chosen_id, r.rejected_id);
    EXPECT_EQ(r.weight, 1.0);
    EXPECT_EQ(r.ref_margin, w.ref_policy.policy_margin(r.prompt_id, r.chosen_id, r.rejected_id));
  }
}

TEST(SamplePreferences, BradleyTerryMisorderRateMatchesWorld) {
  const SyntheticWorld w = build_world(small_world(8));
  const std::size_t n = 200000;
  const PreferenceDataset ds = sample_preferences(w, n, 0.0, 1);
  std::size_t misordered = 0;
  for (const auto& r : ds.records) {
    if (w.true_reward(r.prompt_id, r.chosen_id) < w.true_reward(r.prompt_id, r.rejected_id)) {
      ++misordered;
    }
  }
  const double p = bt_misorder_probability(w);
  const double sd = std::sqrt(p * (1 - p) / n);
  EXPECT_NEAR(static_cast<double>(misordered) / n, p, 5 * sd);
}

TEST(SamplePreferences, RewardOrderLabelsAreClean) {
  const SyntheticWorld w = build_world(small_world(9));
  const PreferenceDataset ds = sample_preferences(w, 20000, 0.0, 2, LabelModel::RewardOrder);
  for (const auto& r : ds.records) {
    EXPECT_GT(w.true_reward(r.prompt_id, r.chosen_id), w.true_reward(r.prompt_id, r.rejected_id));
  }
  EXPECT_LT(pessimism_fraction(ds, w.ref_policy), 0.05);
}

TEST(SamplePreferences, LabelNoiseFlipsAtConfiguredRate) {
  const SyntheticWorld w = build_world(small_world(10));
  const std::size_t n = 100000;
  const double eps = 0.2;
  const PreferenceDataset ds = sample_preferences(w, n, eps, 3, LabelModel::RewardOrder);
  std::size_t flipped = 0;
  for (const auto& r : ds.records) {
    if (w.true_reward(r.prompt_id, r.chosen_id) < w.true_reward(r.prompt_id, r.rejected_id)) {
      ++flipped;
    }
  }
  EXPECT_NEAR(static_cast<double>(flipped) / n, eps, 5 * std::sqrt(eps * (1 - eps) / n));
}

TEST(SamplePreferences, PairsCoverVocabularyUniformly) {
  const SyntheticWorld w = build_world(small_world(11));
  const std::size_t n = 112000;
  const PreferenceDataset ds = sample_preferences(w, n, 0.0, 4);
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::size_t> counts;
  for (const auto& r : ds.records) {
    const auto lo = std::min(r.chosen_id, r.rejected_id);
    const auto hi = std::max(r.chosen_id, r.rejected_id);
    ++counts[{r.prompt_id, lo, hi}];
  }
  const double cells = 16.0 * 8 * 7 / 2;
  EXPECT_EQ(counts.size(), static_cast<std::size_t>(cells));
  const double expected = n / cells;
  for (const auto& [key, c] : counts) EXPECT_NEAR(c, expected, 6 * std::sqrt(expected));
}

TEST(SamplePreferences, InvalidArguments) {
  const SyntheticWorld w = build_world(small_world(12));
  EXPECT_THROW(sample_preferences(w, 0, 0.0, 1), ParameterError);
  EXPECT_THROW(sample_preferences(w, 10, 1.0, 1), ParameterError);
  EXPECT_THROW(sample_preferences(w, 10, -0.1, 1), ParameterError);
}

TEST(PessimismFraction, BradleyTerryFloorAtZeroMisalignment) {
  const double floor = bt_misorder_population();
  EXPECT_NEAR(floor, 0.2748, 5e-4);
  WorldConfig c;
  c.n_prompts = 64;
  c.n_responses = 64;
  c.seed = 13;
  const SyntheticWorld w = build_world(c);
  const PreferenceDataset ds = sample_preferences(w, 100000, 0.0, 5);
  EXPECT_NEAR(pessimism_fraction(ds, w.ref_policy), floor, 0.01);
}

TEST(PessimismFraction, GrowsWithMisalignment) {
  WorldConfig c;
  c.n_prompts = 64;
  c.n_responses = 16;
  c.seed = 14;
  double previous = 0.0;
  for (double m : {0.0, 0.5, 2.0, 10.0}) {
    c.ref_misalignment = m;
    const SyntheticWorld w = build_world(c);
    const double f = pessimism_fraction(sample_preferences(w, 50000, 0.0, 6), w.ref_policy);
    EXPECT_GT(f, previous) << "m=" << m;
    EXPECT_LT(f, 0.5 + 0.02);
    previous = f;
  }
}

TEST(SplitDataset, SizesPartitionAndDeterminism) {
  const SyntheticWorld w = build_world(small_world(15));
  const PreferenceDataset ds = sample_preferences(w, 1003, 0.0, 7);
  const auto [train, eval] = split_dataset(ds, 8);
  EXPECT_EQ(eval.size(), 100u);
  EXPECT_EQ(train.size(), 903u);
  EXPECT_EQ(train.split, Split::Train);
  EXPECT_EQ(eval.split, Split::Eval);

  auto key = [](const PreferenceRecord& r) {
    return std::make_tuple(r.prompt_id, r.chosen_id, r.rejected_id, r.ref_margin);
  };
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t, double>> original;
  std::vector<std::tuple<std::size_t, std::size_t, std::size_t, double>> joined;
  for (const auto& r : ds.records) original.push_back(key(r));
  for (const auto& r : train.records) joined.push_back(key(r));
  for (const auto& r : eval.records) joined.push_back(key(r));
  std::sort(original.begin(), original.end());
  std::sort(joined.begin(), joined.end());
  EXPECT_EQ(original, joined);

  const auto [train2, eval2] = split_dataset(ds, 8);
  EXPECT_EQ(train.records, train2.records);
  EXPECT_EQ(eval.records, eval2.records);

  PreferenceDataset two{{ds.records[0], ds.records[1]}, Split::All};
  const auto [t2, e2] = split_dataset(two, 1);
  EXPECT_EQ(e2.size(), 1u);
  EXPECT_EQ(t2.size(), 1u);
}

TEST(PopulationPairs, WeightsAreComplementary) {
  const SyntheticWorld w = build_world(small_world(16, 1.0));
  const PreferenceDataset pop = population_pairs(w);
  ASSERT_EQ(pop.size(), 16u * 8 * 7);
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, double> weight;
  for (const auto& r : pop.records) weight[{r.prompt_id, r.chosen_id, r.rejected_id}] = r.weight;
  for (const auto& [k, v] : weight) {
    const auto [x, a, b] = k;
    EXPECT_NEAR(v + weight.at({x, b, a}), 1.0, 4e-16);
    EXPECT_NEAR(v, static_cast<double>(testing::sigmoid_ld(
                       static_cast<long double>(w.true_reward(x, a)) - w.true_reward(x, b))),
                4e-16);
  }
}

TEST(DatasetValidate, DetectsStaleMargins) {
  const SyntheticWorld w = build_world(small_world(17));
  PreferenceDataset ds = sample_preferences(w, 10, 0.0, 9);
  ds.records[3].ref_margin += 1e-6;
  EXPECT_THROW(ds.validate(w.ref_policy), DomainError);
  ds.records[3].ref_margin -= 1e-6;
  ds.records[4].rejected_id = ds.records[4].chosen_id;
  EXPECT_THROW(ds.validate(w.ref_policy), ArgumentError);
}

TEST(CalibratePessimism, HitsHalfUnderBradleyTerry) {
  WorldConfig base;
  base.n_prompts = 64;
  base.n_responses = 16;
  base.seed = 18;
  CalibrationTarget target;
  const CalibrationResult r = calibrate_pessimism(base, target, 19);
  EXPECT_NEAR(r.achieved_fraction, 0.5, 0.02);
  // Independent check on fresh draws; the probe's sampling error is about 0.005.
  const double fresh =
      pessimism_fraction(sample_preferences(r.world, 50000, 0.0, 1234), r.world.ref_policy);
  EXPECT_NEAR(fresh, 0.5, 0.03);
}

TEST(CalibratePessimism, LowTargetNeedsCleanLabels) {
  WorldConfig base;
  base.n_prompts = 64;
  base.n_responses = 16;
  base.seed = 20;
  CalibrationTarget target;
  target.target_fraction = 0.05;
  target.tolerance = 0.01;
  target.label_model = LabelModel::RewardOrder;
  const CalibrationResult r = calibrate_pessimism(base, target, 21);
  EXPECT_NEAR(r.achieved_fraction, 0.05, 0.01);
  EXPECT_GT(r.world.config.ref_misalignment, 0.0);

  target.label_model = LabelModel::BradleyTerry;
  try {
    calibrate_pessimism(base, target, 21);
    FAIL() << "expected CalibrationError";
  } catch (const CalibrationError& e) {
    EXPECT_GT(e.best_fraction(), 0.2);
  }
}

TEST(CalibratePessimism, Deterministic) {
  WorldConfig base = small_world(22);
  base.ref_tau = 25.0;
  const CalibrationResult a = calibrate_pessimism(base, CalibrationTarget{}, 23);
  const CalibrationResult b = calibrate_pessimism(base, CalibrationTarget{}, 23);
  EXPECT_EQ(a.world.config.ref_misalignment, b.world.config.ref_misalignment);
  EXPECT_EQ(a.world.ref_policy.logits(), b.world.ref_policy.logits());
}

TEST(EnumNames, RoundTrip) {
  EXPECT_EQ(parse_label_model(to_string(LabelModel::RewardOrder)), LabelModel::RewardOrder);
  EXPECT_EQ(parse_split("eval"), Split::Eval);
  EXPECT_THROW(parse_label_model("plackett"), ParameterError);
}

}  // namespace
}  // namespace hypo
