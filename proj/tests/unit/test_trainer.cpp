// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <numbers>
#include <vector>

#include "hypo/errors.hpp"
#include "hypo/trainer.hpp"
#include "oracles.hpp"

namespace hypo {
namespace {

using testing::Gen;

struct Fixture {
  SyntheticWorld world;
  PreferenceDataset train;
  PreferenceDataset eval;
};

Fixture make_fixture(std::uint64_t seed, std::size_t n_pairs = 2000, double misalignment = 2.0) {
  WorldConfig c;
  c.n_prompts = 6;
  c.n_responses = 5;
  c.ref_misalignment = misalignment;
  c.ref_tau = 4.0;
  c.seed = seed;
  SyntheticWorld w = build_world(c);
  auto [train, eval] = split_dataset(sample_preferences(w, n_pairs, 0.0, seed), seed);
  return Fixture{std::move(w), std::move(train), std::move(eval)};
}

TEST(Schedule, WarmupSteps) {
  EXPECT_EQ(warmup_steps(100, 0.1), 10u);
  EXPECT_EQ(warmup_steps(70, 0.1), 7u);
  EXPECT_EQ(warmup_steps(79, 0.1), 8u);
  EXPECT_EQ(warmup_steps(1, 0.1), 0u);
  EXPECT_EQ(warmup_steps(5, 0.0), 0u);
  EXPECT_EQ(warmup_steps(2, 0.99), 1u);
}

TEST(Schedule, MatchesClosedForm) {
  TrainConfig cfg;
  cfg.peak_lr = 3e-3;
  const std::size_t total = 100;
  for (std::size_t s = 0; s <= total; ++s) {
    long double expected;
    if (s < 10) {
      expected = 3e-3L * s / 10.0L;
    } else {
      expected = 3e-3L * 0.5L * (1.0L + std::cos(std::numbers::pi_v<long double> * (s - 10) / 90.0L));
    }
    EXPECT_NEAR(lr_at(s, total, cfg), static_cast<double>(expected), 1e-17) << s;
  }
  EXPECT_EQ(lr_at(0, total, cfg), 0.0);
  EXPECT_EQ(lr_at(10, total, cfg), 3e-3);
  EXPECT_NEAR(lr_at(total, total, cfg), 0.0, 1e-20);
  EXPECT_THROW(lr_at(total + 1, total, cfg), ArgumentError);
}

TEST(Schedule, ShapeProperties) {
  Gen gen(41);
  for (int trial = 0; trial < 200; ++trial) {
    TrainConfig cfg;
    cfg.peak_lr = gen.log_uniform(1e-5, 1.0);
    cfg.warmup_fraction = gen.uniform(0.0, 0.5);
    const std::size_t total = 1 + gen.index(500);
    const std::size_t warm = warmup_steps(total, cfg.warmup_fraction);
    double previous = -1.0;
    for (std::size_t s = 0; s <= total; ++s) {
      const double lr = lr_at(s, total, cfg);
      EXPECT_GE(lr, 0.0);
      EXPECT_LE(lr, cfg.peak_lr);
      if (s <= warm) {
        EXPECT_GE(lr, previous);
      } else {
        EXPECT_LE(lr, previous);
      }
      previous = lr;
    }
  }
}

TEST(AdamStep, MatchesHandComputedUpdates) {
  TrainConfig cfg;
  cfg.weight_decay = 0.01;
  std::vector<double> params{0.5, -1.0, 2.0};
  AdamState state(3);
  const std::vector<std::vector<double>> grads{{0.1, -0.2, 0.0}, {0.3, 0.1, -0.4}};
  long double m[3] = {0, 0, 0};
  long double v[3] = {0, 0, 0};
  long double p[3] = {0.5L, -1.0L, 2.0L};
  const long double lr = 0.05L;
  for (std::size_t t = 1; t <= grads.size(); ++t) {
    adam_step(params, grads[t - 1], state, 0.05, cfg);
    for (int i = 0; i < 3; ++i) {
      const long double g = grads[t - 1][i];
      m[i] = 0.9L * m[i] + 0.1L * g;
      v[i] = 0.999L * v[i] + 0.001L * g * g;
      const long double mh = m[i] / (1 - std::pow(0.9L, t));
      const long double vh = v[i] / (1 - std::pow(0.999L, t));
      p[i] -= lr * 0.01L * p[i];
      p[i] -= lr * mh / (std::sqrt(vh) + 1e-8L);
      EXPECT_NEAR(params[i], static_cast<double>(p[i]), 1e-14);
    }
  }
  EXPECT_EQ(state.step, 2u);
}

TEST(AdamStep, FirstStepMovesByLearningRate) {
  TrainConfig cfg;
  std::vector<double> params{0.0, 0.0};
  AdamState state(2);
  adam_step(params, std::vector<double>{3.0, -1e-3}, state, 0.1, cfg);
  EXPECT_NEAR(params[0], -0.1, 1e-9);
  EXPECT_NEAR(params[1], 0.1, 1e-5);
}

TEST(AdamStep, RejectsBadInput) {
  TrainConfig cfg;
  std::vector<double> params{0.0};
  AdamState state(1);
  EXPECT_THROW(adam_step(params, std::vector<double>{NAN}, state, 0.1, cfg), TrainingError);
  AdamState wrong(2);
  EXPECT_THROW(adam_step(params, std::vector<double>{1.0}, wrong, 0.1, cfg), ArgumentError);
}

TEST(BatchObjective, GradientMatchesFiniteDifferences) {
  Gen gen(42);
  const Fixture f = make_fixture(1, 200);
  std::vector<PreferenceRecord> records(f.train.records.begin(), f.train.records.begin() + 40);
  std::vector<double> margins;
  for (const auto& r : records) margins.push_back(r.ref_margin);

  Matrix logits(6, 5);
  for (double& v : logits.data()) v = gen.normal();
  const TabularPolicy tab(logits);
  auto fm = std::make_shared<const FeatureMap>(6, 5, 4, 3);
  const LogLinearPolicy lin(fm, {0.3, -0.2, 0.1, 0.4});

  HyperParams hp;
  hp.beta = 0.7;
  hp.gamma = 0.2;
  hp.alpha = 5.0;
  hp.lambda_sft = 0.03;
  for (auto kind : {ObjectiveKind::DPO, ObjectiveKind::RefFree, ObjectiveKind::HyPOHard,
                    ObjectiveKind::HyPOSoft, ObjectiveKind::DPOPlusSFT}) {
    for (const Policy* p : std::initializer_list<const Policy*>{&tab, &lin}) {
      const ObjectiveValue v = batch_objective(*p, records, margins, kind, hp);
      EXPECT_EQ(v.loss, batch_objective_loss(*p, records, margins, kind, hp));
      const GradientVector fd = finite_diff_gradient(
          [&](const Policy& q) { return batch_objective_loss(q, records, margins, kind, hp); }, *p,
          1e-5);
      for (std::size_t i = 0; i < fd.values.size(); ++i) {
        EXPECT_NEAR(v.gradient[i], fd.values[i], 1e-8) << to_string(kind) << " param " << i;
      }
    }
  }
}

TEST(BatchObjective, WeightedMean) {
  const Fixture f = make_fixture(2, 100);
  std::vector<PreferenceRecord> records(f.train.records.begin(), f.train.records.begin() + 3);
  records[0].weight = 2.0;
  records[1].weight = 0.5;
  records[2].weight = 1.5;
  const std::vector<double> margins{0.1, -0.3, 0.0};
  const TabularPolicy& p = f.world.ref_policy;
  long double num = 0.0L;
  for (int i = 0; i < 3; ++i) {
    const auto& r = records[i];
    const long double a = static_cast<long double>(p.policy_margin(r.prompt_id, r.chosen_id, r.rejected_id)) - margins[i];
    num += r.weight * testing::logistic_ref(1.0L, a).loss;
  }
  const double loss = batch_objective_loss(p, records, margins, ObjectiveKind::DPO, HyperParams{});
  EXPECT_TRUE(testing::close(loss, num / 4.0L, 1e-14L));
}

TEST(RunLog, StepsStrictlyIncrease) {
  RunLog log;
  log.append(RunLogEntry{0});
  log.append(RunLogEntry{5});
  EXPECT_THROW(log.append(RunLogEntry{5}), ArgumentError);
  EXPECT_THROW(log.append(RunLogEntry{3}), ArgumentError);
}

TEST(Train, StepCountAndLogCadence) {
  const Fixture f = make_fixture(3, 1111);
  TrainConfig cfg;
  cfg.batch_size = 128;
  cfg.epochs = 2;
  cfg.eval_every = 5;
  const TrainResult r = train(f.world.ref_policy, f.world.ref_policy, f.train, f.eval, cfg);
  EXPECT_EQ(r.total_steps, 16u);
  std::vector<std::size_t> steps;
  for (const auto& e : r.log.entries()) steps.push_back(e.step);
  EXPECT_EQ(steps, (std::vector<std::size_t>{0, 5, 10, 15, 16}));
  EXPECT_EQ(r.log.back().learning_rate, lr_at(16, 16, cfg));
}

TEST(Train, ZeroLearningRateLeavesParameters) {
  const Fixture f = make_fixture(4);
  TrainConfig cfg;
  cfg.peak_lr = 0.0;
  const TrainResult r = train(f.world.ref_policy, f.world.ref_policy, f.train, f.eval, cfg);
  const auto a = r.policy->parameters();
  const auto b = f.world.ref_policy.parameters();
  EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  EXPECT_NEAR(r.log.entries().front().train_loss, std::log(2.0), 1e-13);
}

TEST(Train, Deterministic) {
  const Fixture f = make_fixture(5);
  TrainConfig cfg;
  cfg.objective = ObjectiveKind::HyPOHard;
  cfg.seed = 9;
  const TrainResult a = train(f.world.ref_policy, f.world.ref_policy, f.train, f.eval, cfg);
  const TrainResult b = train(f.world.ref_policy, f.world.ref_policy, f.train, f.eval, cfg);
  const auto pa = a.policy->parameters();
  const auto pb = b.policy->parameters();
  EXPECT_TRUE(std::equal(pa.begin(), pa.end(), pb.begin()));
  ASSERT_EQ(a.log.entries().size(), b.log.entries().size());
  for (std::size_t i = 0; i < a.log.entries().size(); ++i) {
    EXPECT_EQ(a.log.entries()[i].train_loss, b.log.entries()[i].train_loss);
  }
}

TEST(Train, RecomputedMarginsAreBitIdentical) {
  const Fixture f = make_fixture(6);
  TrainConfig cfg;
  const TrainResult a = train(f.world.ref_policy, f.world.ref_policy, f.train, f.eval, cfg);
  cfg.recompute_ref_margins = true;
  const TrainResult b = train(f.world.ref_policy, f.world.ref_policy, f.train, f.eval, cfg);
  const auto pa = a.policy->parameters();
  const auto pb = b.policy->parameters();
  EXPECT_TRUE(std::equal(pa.begin(), pa.end(), pb.begin()));
}

TEST(Train, FullBatchLossDescends) {
  Gen gen(43);
  for (auto kind : {ObjectiveKind::DPO, ObjectiveKind::HyPOHard, ObjectiveKind::RefFree}) {
    const Fixture f = make_fixture(7, 500);
    TrainConfig cfg;
    cfg.objective = kind;
    cfg.batch_size = f.train.size();
    cfg.epochs = 40;
    cfg.peak_lr = 0.01;
    cfg.eval_every = 1;
    const TrainResult r = train(f.world.ref_policy, f.world.ref_policy, f.train, f.eval, cfg);
    EXPECT_LT(r.log.back().train_loss, r.log.entries().front().train_loss) << to_string(kind);
  }
}

TEST(Train, EpochCallbackOncePerEpoch) {
  const Fixture f = make_fixture(8);
  TrainConfig cfg;
  cfg.epochs = 3;
  std::vector<std::size_t> seen;
  train(f.world.ref_policy, f.world.ref_policy, f.train, f.eval, cfg,
        [&](std::size_t epoch, const Policy&) { seen.push_back(epoch); });
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3}));
}

TEST(Train, DivergenceReportsStep) {
  const Fixture f = make_fixture(9);
  TrainConfig cfg;
  cfg.peak_lr = 1e308;
  cfg.warmup_fraction = 0.0;
  try {
    train(f.world.ref_policy, f.world.ref_policy, f.train, f.eval, cfg);
    FAIL() << "expected TrainingError";
  } catch (const TrainingError& e) {
    EXPECT_GE(e.step(), 1u);
  }
}

TEST(Train, InvalidInputs) {
  const Fixture f = make_fixture(10);
  TrainConfig cfg;
  EXPECT_THROW(train(f.world.ref_policy, f.world.ref_policy, PreferenceDataset{}, f.eval, cfg),
               ArgumentError);
  cfg.objective = ObjectiveKind::HyPOSoft;
  EXPECT_THROW(train(f.world.ref_policy, f.world.ref_policy, f.train, f.eval, cfg),
               ParameterError);
  cfg = TrainConfig{};
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), ParameterError);
  const TabularPolicy other = TabularPolicy::uniform(6, 4);
  EXPECT_THROW(train(other, f.world.ref_policy, f.train, f.eval, TrainConfig{}), ArgumentError);
}

}  // namespace
}  // namespace hypo
