// SPDX-License-Identifier: Apache-2.0
//
// Experiment configuration: an INI file with top-level keys and three sections.
//
//   seed = 7
//   output_dir = runs/dpo
//   data_dir = data
//
//   [world]      n_prompts, n_responses, ref_misalignment, ref_tau, reward_scale, n_pairs,
//                label_noise, label_model, target_pessimism, pessimism_tolerance
//   [train]      policy, feature_dim, peak_lr, epochs, batch_size, warmup_fraction,
//                adam_beta1, adam_beta2, adam_epsilon, weight_decay, grad_clip, eval_every,
//                recompute_ref_margins, record_wall_time
//   [objective]  kind, beta, hypo_gamma (or gamma), hypo_tau or alpha, h (or
//                home_advantage), lambda_sft
//
// kind = hypo picks the hard variant unless hypo_tau > 0 or alpha is given.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "hypo/datagen.hpp"
#include "hypo/objectives.hpp"
#include "hypo/policies.hpp"
#include "hypo/trainer.hpp"

namespace hypo::cli {

struct WorldSection {
  WorldConfig world;
  std::size_t n_pairs = 10000;
  double label_noise = 0.0;
  LabelModel label_model = LabelModel::BradleyTerry;
  /// When set, datagen calibrates ref_misalignment to reach this pessimism fraction.
  std::optional<double> target_pessimism;
  double pessimism_tolerance = 0.02;
};

struct TrainSection {
  PolicyClass policy = PolicyClass::Tabular;
  std::size_t feature_dim = 8;
  /// Optimizer and schedule fields; objective, hp and seed come from the other sections.
  TrainConfig optimizer;
};

struct ObjectiveSection {
  ObjectiveKind kind = ObjectiveKind::DPO;
  HyperParams hp;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "runs/default";
  std::filesystem::path data_dir = "data";
  WorldSection world;
  TrainSection train;
  ObjectiveSection objective;

  /// Throws ConfigError naming the first offending key.
  void validate() const;

  WorldConfig world_config() const;
  TrainConfig train_config() const;

  /// Fully resolved snapshot in the input syntax. Parsing it yields an identical config.
  std::string canonical_text() const;
  /// Snapshot without output_dir and the [objective] section; runs that share it are
  /// comparable.
  std::string comparable_text() const;
  /// Hash of the seed, data_dir and [world]; stamped on generated data files.
  std::string world_hash() const;
  /// Hash of everything except output_dir.
  std::string config_hash() const;
};

/// Resolves an objective name plus the optional soft-clip spellings into a kind and alpha.
/// Accepts every ObjectiveKind name plus "hypo". Throws ConfigError.
std::pair<ObjectiveKind, std::optional<double>> resolve_objective(
    std::string_view name, std::optional<double> hypo_tau, std::optional<double> alpha);

std::string valid_cli_objective_names();

/// Parses and validates. Throws ConfigError on syntax errors, unknown keys or bad values.
ExperimentConfig parse_config(std::string_view text);
/// Throws IoError when the file cannot be read.
ExperimentConfig load_config(const std::filesystem::path& path);
void write_config_snapshot(const ExperimentConfig& config, const std::filesystem::path& path);

/// Shortest decimal that round-trips.
std::string format_number(double value);

}  // namespace hypo::cli
