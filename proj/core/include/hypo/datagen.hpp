// SPDX-License-Identifier: Apache-2.0
//
// Synthetic preference worlds. A world holds a true reward r(x, y) and a reference policy
// built as the Gibbs policy of a perturbed reward:
//
//   ref = gibbs(uniform, r + misalignment * noise, ref_tau)
//
// so misalignment continuously moves the share of pairs on which the reference prefers the
// rejected response (pessimistic pairs) from its floor up towards one half.
#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "hypo/matrix.hpp"
#include "hypo/policies.hpp"

namespace hypo {

struct WorldConfig {
  std::size_t n_prompts = 16;
  std::size_t n_responses = 8;
  double ref_misalignment = 0.0;
  double ref_tau = 1.0;
  double reward_scale = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticWorld {
  WorldConfig config;
  Matrix true_reward;
  TabularPolicy ref_policy;
};

/// How a sampled pair is ordered into (chosen, rejected).
enum class LabelModel {
  /// P(a preferred over b) = sigmoid(r_a - r_b).
  BradleyTerry,
  /// The higher-reward response is chosen ("clean" labels); exact ties fall back to a coin flip.
  RewardOrder,
};

std::string_view to_string(LabelModel model);
LabelModel parse_label_model(std::string_view name);

enum class Split { All, Train, Eval };
std::string_view to_string(Split split);
Split parse_split(std::string_view name);

struct PreferenceRecord {
  std::size_t prompt_id = 0;
  std::size_t chosen_id = 0;
  std::size_t rejected_id = 0;
  /// Reference margin cached at sampling time.
  double ref_margin = 0.0;
  /// Population weight; 1 for sampled data.
  double weight = 1.0;

  bool operator==(const PreferenceRecord&) const = default;
};

struct PreferenceDataset {
  std::vector<PreferenceRecord> records;
  Split split = Split::All;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }

  /// Checks chosen != rejected, indices in range, and cached margins against `ref`.
  void validate(const Policy& ref, double tolerance = 1e-12) const;
};

SyntheticWorld build_world(const WorldConfig& config);

PreferenceDataset sample_preferences(const SyntheticWorld& world, std::size_t n_pairs,
                                     double label_noise, std::uint64_t seed,
                                     LabelModel model = LabelModel::BradleyTerry);

/// Seeded shuffle followed by a 90/10 train/eval cut.
std::pair<PreferenceDataset, PreferenceDataset> split_dataset(const PreferenceDataset& dataset,
                                                              std::uint64_t seed);

/// Every ordered pair (x, a, b), a != b, weighted by its Bradley-Terry probability
/// sigmoid(r_a - r_b). Minimizing the weighted DPO loss over this set is the population problem.
PreferenceDataset population_pairs(const SyntheticWorld& world);

/// Share of records whose reference margin under `ref` is negative.
double pessimism_fraction(const PreferenceDataset& dataset, const Policy& ref);

struct CalibrationTarget {
  double target_fraction = 0.5;
  double tolerance = 0.02;
  std::size_t n_probe = 10000;
  double label_noise = 0.0;
  LabelModel label_model = LabelModel::BradleyTerry;
  std::size_t max_iterations = 40;
  double misalignment_lo = 0.0;
  double misalignment_hi = 100.0;
};

struct CalibrationResult {
  SyntheticWorld world;
  double achieved_fraction = 0.0;
  std::size_t iterations = 0;
};

/// Bisection on ref_misalignment until the probe's pessimism fraction is within tolerance.
/// Every probe reuses the same rewards, noise and pair draws, so only the reference moves.
/// Throws CalibrationError carrying the best fraction seen when the budget runs out.
CalibrationResult calibrate_pessimism(const WorldConfig& base, const CalibrationTarget& target,
                                      std::uint64_t seed);

}  // namespace hypo
