// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hypo/metrics.hpp"
#include "hypo/viz_export.hpp"
#include "hypo_cli/experiment.hpp"

namespace hypo::cli {

enum class ExitCode : int { Ok = 0, Failure = 1, Config = 2, Io = 3, Numerical = 4 };

inline constexpr const char* kWorldFile = "world.json";
inline constexpr const char* kTrainFile = "train.jsonl";
inline constexpr const char* kEvalFile = "eval.jsonl";
inline constexpr const char* kSnapshotFile = "config.ini";
inline constexpr const char* kRunLogFile = "runlog.jsonl";

/// checkpoint_epoch_001.json, ...
std::string checkpoint_name(std::size_t epoch);

struct DatagenReport {
  std::filesystem::path dir;
  double ref_misalignment = 0.0;
  /// Probe fraction reached by calibration; absent when no target was configured.
  std::optional<double> calibrated_fraction;
  /// Pessimism fraction of the written training split.
  double train_pessimism = 0.0;
  std::size_t n_train = 0;
  std::size_t n_eval = 0;
};

/// Builds (or calibrates) the world, samples and splits pairs, and writes world.json,
/// train.jsonl and eval.jsonl into `out`. Prints a one-line summary to `log`.
DatagenReport cmd_datagen(const ExperimentConfig& config, const std::filesystem::path& out,
                          std::ostream& log);

struct TrainReport {
  std::filesystem::path run_dir;
  RunLog log;
  std::size_t total_steps = 0;
};

/// Trains on the data in config.data_dir and writes config.ini, runlog.jsonl and one
/// checkpoint per epoch into `run_dir`.
TrainReport cmd_train(const ExperimentConfig& config, const std::filesystem::path& run_dir,
                      std::ostream& log);

struct CompareRow {
  std::string run_name;
  ObjectiveKind objective = ObjectiveKind::DPO;
  double final_agreement = 0.0;
  std::optional<double> final_pessimistic_margin;
  double final_train_loss = 0.0;
};

struct CompareReport {
  std::vector<CompareRow> rows;
  WinMatrix wins;
};

/// Throws ConfigError unless every config agrees outside [objective] and output_dir.
void check_comparable(const std::vector<ExperimentConfig>& configs);

/// Trains every config into out/<run_name> and writes curves.csv, win_matrix.csv and
/// summary.csv into `out`.
CompareReport cmd_compare(const std::vector<ExperimentConfig>& configs,
                          const std::filesystem::path& out, std::ostream& log);

void cmd_heatmap(ObjectiveKind kind, const HyperParams& hp, const GridSpec& grid,
                 const std::filesystem::path& out, std::ostream& log);

RefMarginStats cmd_refstats(const std::filesystem::path& world_file,
                            const std::filesystem::path& dataset_file, std::size_t n_bins,
                            const std::filesystem::path& out, std::ostream& log);

/// Full command line (args[0] is the program name). Maps failures to ExitCode values.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hypo::cli
