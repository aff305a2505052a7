// SPDX-License-Identifier: Apache-2.0
#include "hypo/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>

#include "hypo/core_math.hpp"
#include "hypo/errors.hpp"
#include "hypo/random.hpp"

namespace hypo {

void WorldConfig::validate() const {
  if (n_prompts < 1 || n_prompts > kMaxVocabulary) {
    throw ParameterError("n_prompts must be in 1.." + std::to_string(kMaxVocabulary));
  }
  if (n_responses < 2 || n_responses > kMaxVocabulary) {
    throw ParameterError("n_responses must be in 2.." + std::to_string(kMaxVocabulary));
  }
  if (!std::isfinite(ref_misalignment) || ref_misalignment < 0.0) {
    throw ParameterError("ref_misalignment must be finite and >= 0");
  }
  if (!std::isfinite(ref_tau) || ref_tau <= 0.0) {
    throw ParameterError("ref_tau must be finite and > 0");
  }
  if (!std::isfinite(reward_scale) || reward_scale <= 0.0) {
    throw ParameterError("reward_scale must be finite and > 0");
  }
}

std::string_view to_string(LabelModel model) {
  return model == LabelModel::BradleyTerry ? "bradley_terry" : "reward_order";
}

LabelModel parse_label_model(std::string_view name) {
  if (name == "bradley_terry") return LabelModel::BradleyTerry;
  if (name == "reward_order") return LabelModel::RewardOrder;
  throw ParameterError("unknown label model '" + std::string(name) +
                       "'; valid models: bradley_terry, reward_order");
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::Train:
      return "train";
    case Split::Eval:
      return "eval";
    case Split::All:
      break;
  }
  return "all";
}

Split parse_split(std::string_view name) {
  if (name == "all") return Split::All;
  if (name == "train") return Split::Train;
  if (name == "eval") return Split::Eval;
  throw ParameterError("unknown split '" + std::string(name) + "'");
}

void PreferenceDataset::validate(const Policy& ref, double tolerance) const {
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.chosen_id == r.rejected_id) {
      throw ArgumentError("record " + std::to_string(i) + " has chosen == rejected");
    }
    if (!std::isfinite(r.weight) || r.weight < 0.0) {
      throw DomainError("record " + std::to_string(i) + " has an invalid weight");
    }
    const double margin = ref.policy_margin(r.prompt_id, r.chosen_id, r.rejected_id);
    if (!(std::abs(margin - r.ref_margin) <= tolerance)) {
      throw DomainError("record " + std::to_string(i) +
                        " cached ref_margin disagrees with the reference policy");
    }
  }
}

SyntheticWorld build_world(const WorldConfig& config) {
  config.validate();
  const std::size_t np = config.n_prompts;
  const std::size_t nr = config.n_responses;

  Rng reward_rng = make_rng(config.seed, Stream::Rewards);
  Rng noise_rng = make_rng(config.seed, Stream::RefNoise);
  std::normal_distribution<double> normal(0.0, 1.0);

  Matrix reward(np, nr);
  for (double& r : reward.data()) r = config.reward_scale * normal(reward_rng);

  normal.reset();
  Matrix perturbed(np, nr);
  for (std::size_t i = 0; i < perturbed.size(); ++i) {
    perturbed.data()[i] = reward.data()[i] + config.ref_misalignment * normal(noise_rng);
  }

  TabularPolicy ref = gibbs_optimum(TabularPolicy::uniform(np, nr), perturbed, config.ref_tau);
  return SyntheticWorld{config, std::move(reward), std::move(ref)};
}

PreferenceDataset sample_preferences(const SyntheticWorld& world, std::size_t n_pairs,
                                     double label_noise, std::uint64_t seed, LabelModel model) {
  if (n_pairs < 1) throw ParameterError("n_pairs must be >= 1");
  if (!std::isfinite(label_noise) || label_noise < 0.0 || label_noise >= 1.0) {
    throw ParameterError("label_noise must lie in [0, 1)");
  }
  const std::size_t np = world.config.n_prompts;
  const std::size_t nr = world.config.n_responses;

  Rng rng = make_rng(seed, Stream::Pairs);
  std::uniform_int_distribution<std::size_t> pick_prompt(0, np - 1);
  std::uniform_int_distribution<std::size_t> pick_first(0, nr - 1);
  std::uniform_int_distribution<std::size_t> pick_second(0, nr - 2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  PreferenceDataset out;
  out.records.reserve(n_pairs);
  for (std::size_t i = 0; i < n_pairs; ++i) {
    const std::size_t x = pick_prompt(rng);
    const std::size_t a = pick_first(rng);
    std::size_t b = pick_second(rng);
    if (b >= a) ++b;

    const double gap = world.true_reward(x, a) - world.true_reward(x, b);
    // Both draws are always consumed so the stream layout is independent of the label model.
    const double order_draw = unit(rng);
    const double flip_draw = unit(rng);

    bool a_wins;
    if (model == LabelModel::BradleyTerry || gap == 0.0) {
      a_wins = order_draw < stable_sigmoid(gap);
    } else {
      a_wins = gap > 0.0;
    }
    if (flip_draw < label_noise) a_wins = !a_wins;

    PreferenceRecord rec;
    rec.prompt_id = x;
    rec.chosen_id = a_wins ? a : b;
    rec.rejected_id = a_wins ? b : a;
    rec.ref_margin = world.ref_policy.policy_margin(x, rec.chosen_id, rec.rejected_id);
    out.records.push_back(rec);
  }
  return out;
}

std::pair<PreferenceDataset, PreferenceDataset> split_dataset(const PreferenceDataset& dataset,
                                                              std::uint64_t seed) {
  if (dataset.size() < 2) throw ArgumentError("need at least two records to split");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(seed, Stream::Split);
  std::shuffle(order.begin(), order.end(), rng);

  const std::size_t n_eval = std::max<std::size_t>(1, dataset.size() / 10);
  const std::size_t n_train = dataset.size() - n_eval;

  PreferenceDataset train{{}, Split::Train};
  PreferenceDataset eval{{}, Split::Eval};
  train.records.reserve(n_train);
  eval.records.reserve(n_eval);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? train : eval).records.push_back(dataset.records[order[i]]);
  }
  return {std::move(train), std::move(eval)};
}

PreferenceDataset population_pairs(const SyntheticWorld& world) {
  PreferenceDataset out;
  const std::size_t np = world.config.n_prompts;
  const std::size_t nr = world.config.n_responses;
  for (std::size_t x = 0; x < np; ++x) {
    for (std::size_t a = 0; a < nr; ++a) {
      for (std::size_t b = 0; b < nr; ++b) {
        if (a == b) continue;
        PreferenceRecord rec;
        rec.prompt_id = x;
        rec.chosen_id = a;
        rec.rejected_id = b;
        rec.ref_margin = world.ref_policy.policy_margin(x, a, b);
        rec.weight = stable_sigmoid(world.true_reward(x, a) - world.true_reward(x, b));
        out.records.push_back(rec);
      }
    }
  }
  return out;
}

double pessimism_fraction(const PreferenceDataset& dataset, const Policy& ref) {
  if (dataset.empty()) throw ArgumentError("pessimism_fraction on an empty dataset");
  std::size_t pessimistic = 0;
  for (const auto& r : dataset.records) {
    if (ref.policy_margin(r.prompt_id, r.chosen_id, r.rejected_id) < 0.0) ++pessimistic;
  }
  return static_cast<double>(pessimistic) / static_cast<double>(dataset.size());
}

CalibrationResult calibrate_pessimism(const WorldConfig& base, const CalibrationTarget& target,
                                      std::uint64_t seed) {
  base.validate();
  if (!(target.target_fraction > 0.0 && target.target_fraction < 1.0)) {
    throw ParameterError("target pessimism fraction must lie in (0, 1)");
  }
  if (!(target.tolerance >= 0.0) || !(target.misalignment_lo < target.misalignment_hi) ||
      target.misalignment_lo < 0.0 || target.max_iterations < 1 || target.n_probe < 1) {
    throw ParameterError("invalid calibration settings");
  }

  struct Probe {
    double fraction;
    std::optional<SyntheticWorld> world;
  };
  auto measure = [&](double misalignment) {
    WorldConfig cfg = base;
    cfg.ref_misalignment = misalignment;
    SyntheticWorld world = build_world(cfg);
    const PreferenceDataset probe = sample_preferences(world, target.n_probe, target.label_noise,
                                                       seed, target.label_model);
    const double fraction = pessimism_fraction(probe, world.ref_policy);
    Probe out{fraction, std::nullopt};
    if (std::abs(fraction - target.target_fraction) <= target.tolerance) {
      out.world = std::move(world);
    }
    return out;
  };

  double best_fraction = 0.0;
  double best_misalignment = target.misalignment_lo;
  double best_error = INFINITY;
  std::size_t iterations = 0;
  auto step = [&](double misalignment) {
    Probe probe = measure(misalignment);
    ++iterations;
    const double error = std::abs(probe.fraction - target.target_fraction);
    if (error < best_error) {
      best_error = error;
      best_fraction = probe.fraction;
      best_misalignment = misalignment;
    }
    return probe;
  };

  double lo = target.misalignment_lo;
  double hi = target.misalignment_hi;
  {
    Probe probe = step(lo);
    if (probe.world) return CalibrationResult{std::move(*probe.world), probe.fraction, iterations};
  }
  while (iterations < target.max_iterations) {
    const double mid = 0.5 * (lo + hi);
    Probe probe = step(mid);
    if (probe.world) return CalibrationResult{std::move(*probe.world), probe.fraction, iterations};
    if (probe.fraction < target.target_fraction) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  throw CalibrationError(best_fraction, best_misalignment,
                         "pessimism calibration missed target " +
                             std::to_string(target.target_fraction) + " +/- " +
                             std::to_string(target.tolerance) + "; best fraction " +
                             std::to_string(best_fraction) + " at misalignment " +
                             std::to_string(best_misalignment));
}

}  // namespace hypo
