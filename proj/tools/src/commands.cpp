// SPDX-License-Identifier: Apache-2.0
#include "hypo_cli/commands.hpp"

#include <cstdio>
#include <fstream>
#include <memory>
#include <ostream>
#include <sstream>

#include "hypo/errors.hpp"
#include "hypo/io.hpp"

namespace hypo::cli {
namespace fs = std::filesystem;
namespace {

constexpr std::size_t kWinMatrixPrompts = 1000;

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
}

std::string fixed(double value, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, value);
  return buf;
}

std::string margin_text(const std::optional<double>& m) { return m ? fixed(*m) : "n/a"; }

std::unique_ptr<Policy> initial_policy(const ExperimentConfig& config, const SyntheticWorld& world) {
  if (config.train.policy == PolicyClass::Tabular) return world.ref_policy.clone();
  auto features = std::make_shared<const FeatureMap>(
      world.config.n_prompts, world.config.n_responses, config.train.feature_dim, config.seed);
  return std::make_unique<LogLinearPolicy>(std::move(features));
}

struct LoadedData {
  SyntheticWorld world;
  PreferenceDataset train;
  PreferenceDataset eval;
};

LoadedData load_data(const ExperimentConfig& config) {
  FileProvenance world_p;
  FileProvenance train_p;
  FileProvenance eval_p;
  SyntheticWorld world = read_world(config.data_dir / kWorldFile, &world_p);
  PreferenceDataset train_set = read_dataset(config.data_dir / kTrainFile, &train_p);
  PreferenceDataset eval_set = read_dataset(config.data_dir / kEvalFile, &eval_p);
  const std::string expected = config.world_hash();
  for (const auto* p : {&world_p, &train_p, &eval_p}) {
    if (p->config_hash != expected || p->seed != config.seed) {
      throw ConfigError("data_dir", "data in '" + config.data_dir.string() +
                                        "' was generated from a different [world] config or "
                                        "seed; rerun datagen");
    }
  }
  return LoadedData{std::move(world), std::move(train_set), std::move(eval_set)};
}

std::string unique_name(std::string base, const std::vector<CompareRow>& taken) {
  auto used = [&](const std::string& n) {
    for (const auto& r : taken) {
      if (r.run_name == n) return true;
    }
    return false;
  };
  if (!used(base)) return base;
  for (std::size_t k = 2;; ++k) {
    std::string candidate = base + "_" + std::to_string(k);
    if (!used(candidate)) return candidate;
  }
}

// First `key = value` line that differs between two snapshots, for error messages.
std::string first_difference(const std::string& a, const std::string& b) {
  std::istringstream ia(a);
  std::istringstream ib(b);
  std::string section;
  std::string la;
  std::string lb;
  while (true) {
    const bool ga = static_cast<bool>(std::getline(ia, la));
    const bool gb = static_cast<bool>(std::getline(ib, lb));
    if (!ga || !gb) return section.empty() ? "config" : section;
    if (!la.empty() && la.front() == '[') section = la.substr(1, la.size() - 2);
    if (la != lb) {
      const std::string key = la.substr(0, la.find(" = "));
      return section.empty() ? key : section + "." + key;
    }
  }
}

}  // namespace

std::string checkpoint_name(std::size_t epoch) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "checkpoint_epoch_%03zu.json", epoch);
  return buf;
}

DatagenReport cmd_datagen(const ExperimentConfig& config, const fs::path& out, std::ostream& log) {
  config.validate();
  const WorldSection& ws = config.world;

  DatagenReport report;
  report.dir = out;
  std::optional<SyntheticWorld> world;
  if (ws.target_pessimism) {
    CalibrationTarget target;
    target.target_fraction = *ws.target_pessimism;
    target.tolerance = ws.pessimism_tolerance;
    target.label_noise = ws.label_noise;
    target.label_model = ws.label_model;
    CalibrationResult calibrated = calibrate_pessimism(config.world_config(), target, config.seed);
    report.calibrated_fraction = calibrated.achieved_fraction;
    world.emplace(std::move(calibrated.world));
  } else {
    world.emplace(build_world(config.world_config()));
  }
  report.ref_misalignment = world->config.ref_misalignment;

  const PreferenceDataset all =
      sample_preferences(*world, ws.n_pairs, ws.label_noise, config.seed, ws.label_model);
  auto [train_set, eval_set] = split_dataset(all, config.seed);
  report.n_train = train_set.size();
  report.n_eval = eval_set.size();
  report.train_pessimism = pessimism_fraction(train_set, world->ref_policy);

  make_dir(out);
  const FileProvenance provenance{config.world_hash(), config.seed};
  write_world(*world, provenance, out / kWorldFile);
  write_dataset(train_set, provenance, out / kTrainFile);
  write_dataset(eval_set, provenance, out / kEvalFile);

  log << "datagen: " << report.n_train << " train / " << report.n_eval
      << " eval pairs, pessimism_fraction=" << fixed(report.train_pessimism)
      << " ref_misalignment=" << format_number(report.ref_misalignment);
  if (report.calibrated_fraction) {
    log << " calibrated_fraction=" << fixed(*report.calibrated_fraction) << " (target "
        << format_number(*ws.target_pessimism) << " +/- " << format_number(ws.pessimism_tolerance)
        << ")";
  }
  log << " -> " << out.string() << '\n';
  return report;
}

TrainReport cmd_train(const ExperimentConfig& config, const fs::path& run_dir, std::ostream& log) {
  config.validate();
  LoadedData data = load_data(config);
  const std::unique_ptr<Policy> initial = initial_policy(config, data.world);

  ExperimentConfig snapshot = config;
  snapshot.output_dir = run_dir;
  make_dir(run_dir);
  write_config_snapshot(snapshot, run_dir / kSnapshotFile);

  const FileProvenance provenance{config.config_hash(), config.seed};
  const CheckpointInfo base_info{provenance, {config.seed, config.seed, config.seed}, 0};
  auto on_epoch = [&](std::size_t epoch, const Policy& policy) {
    CheckpointInfo info = base_info;
    info.epoch = epoch;
    write_checkpoint(policy, info, run_dir / checkpoint_name(epoch));
  };
  TrainResult result =
      train(*initial, data.world.ref_policy, data.train, data.eval, config.train_config(), on_epoch);
  write_run_log(result.log, provenance, run_dir / kRunLogFile);

  const RunLogEntry& last = result.log.back();
  log << "train: " << to_string(config.objective.kind) << " steps=" << result.total_steps
      << " agreement=" << fixed(last.agreement_rate)
      << " pessimistic_margin=" << margin_text(last.pessimistic_margin)
      << " train_loss=" << fixed(last.train_loss, 6) << " -> " << run_dir.string() << '\n';
  return TrainReport{run_dir, std::move(result.log), result.total_steps};
}

void check_comparable(const std::vector<ExperimentConfig>& configs) {
  if (configs.size() < 2) throw ConfigError("config", "compare needs at least two configs");
  const ExperimentConfig& first = configs.front();
  for (std::size_t i = 1; i < configs.size(); ++i) {
    if (configs[i].seed != first.seed) {
      throw ConfigError("seed", "configs use different seeds (" + std::to_string(first.seed) +
                                    " vs " + std::to_string(configs[i].seed) + ")");
    }
    const std::string a = first.comparable_text();
    const std::string b = configs[i].comparable_text();
    if (a != b) {
      const std::string key = first_difference(a, b);
      throw ConfigError(key, "configs differ outside [objective] at '" + key + "'");
    }
  }
}

CompareReport cmd_compare(const std::vector<ExperimentConfig>& configs, const fs::path& out,
                          std::ostream& log) {
  for (const auto& c : configs) c.validate();
  check_comparable(configs);
  make_dir(out);

  CompareReport report;
  std::vector<std::unique_ptr<Policy>> trained;
  std::vector<RunLog> logs;
  for (const auto& config : configs) {
    CompareRow row;
    row.objective = config.objective.kind;
    row.run_name = unique_name(std::string(to_string(config.objective.kind)), report.rows);
    TrainReport leg = cmd_train(config, out / row.run_name, log);
    const RunLogEntry& last = leg.log.back();
    row.final_agreement = last.agreement_rate;
    row.final_pessimistic_margin = last.pessimistic_margin;
    row.final_train_loss = last.train_loss;
    CheckpointInfo info;
    trained.push_back(
        read_checkpoint(leg.run_dir / checkpoint_name(config.train.optimizer.epochs), &info));
    logs.push_back(std::move(leg.log));
    report.rows.push_back(std::move(row));
  }

  std::vector<NamedRunLog> curves;
  for (std::size_t i = 0; i < logs.size(); ++i) curves.push_back({report.rows[i].run_name, &logs[i]});
  export_curves(curves, out / "curves.csv");

  const SyntheticWorld world = read_world(configs.front().data_dir / kWorldFile);
  std::vector<NamedPolicy> contestants{{"reference", &world.ref_policy}};
  for (std::size_t i = 0; i < trained.size(); ++i) {
    contestants.push_back({report.rows[i].run_name, trained[i].get()});
  }
  report.wins = win_matrix(contestants, world, kWinMatrixPrompts, JudgeMode::Greedy,
                           configs.front().seed);
  write_win_matrix_csv(report.wins, out / "win_matrix.csv");

  std::ofstream summary(out / "summary.csv", std::ios::binary | std::ios::trunc);
  if (!summary) throw IoError("cannot open '" + (out / "summary.csv").string() + "'");
  summary << "run_name,objective,final_agreement_rate,final_pessimistic_margin,final_train_loss\n";
  log << "run_name        agreement  pessimistic_margin  train_loss\n";
  for (const auto& row : report.rows) {
    summary << row.run_name << ',' << to_string(row.objective) << ','
            << format_csv_number(row.final_agreement) << ','
            << (row.final_pessimistic_margin ? format_csv_number(*row.final_pessimistic_margin) : "")
            << ',' << format_csv_number(row.final_train_loss) << '\n';
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-15s %9s  %18s  %10s\n", row.run_name.c_str(),
                  fixed(row.final_agreement).c_str(),
                  margin_text(row.final_pessimistic_margin).c_str(),
                  fixed(row.final_train_loss, 6).c_str());
    log << buf;
  }
  summary.flush();
  if (!summary) throw IoError("failed writing summary.csv");
  return report;
}

void cmd_heatmap(ObjectiveKind kind, const HyperParams& hp, const GridSpec& grid,
                 const fs::path& out, std::ostream& log) {
  const Matrix weights = weight_heatmap(kind, hp, grid);
  if (out.has_parent_path()) make_dir(out.parent_path());
  export_heatmap_csv(weights, grid, out);
  log << "heatmap: " << to_string(kind) << ' ' << weights.rows() << 'x' << weights.cols()
      << " -> " << out.string() << '\n';
}

RefMarginStats cmd_refstats(const fs::path& world_file, const fs::path& dataset_file,
                            std::size_t n_bins, const fs::path& out, std::ostream& log) {
  const SyntheticWorld world = read_world(world_file);
  const PreferenceDataset dataset = read_dataset(dataset_file);
  if (dataset.empty()) throw IoError("'" + dataset_file.string() + "' has no records");
  if (out.has_parent_path()) make_dir(out.parent_path());
  export_margin_histogram(world.ref_policy, dataset, n_bins, out);
  const RefMarginStats stats = ref_margin_stats(world.ref_policy, dataset);
  log << "refstats: n=" << stats.count << " mean=" << fixed(stats.mean)
      << " median=" << fixed(stats.median)
      << " fraction_pessimistic=" << fixed(stats.fraction_pessimistic) << " -> " << out.string()
      << '\n';
  return stats;
}

}  // namespace hypo::cli
