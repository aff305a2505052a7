// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>
#include <algorithm>
#include <ostream>

#include "hypo/errors.hpp"
#include "hypo_cli/commands.hpp"

namespace hypo::cli {
namespace {

struct GlobalOptions {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::vector<std::string> configs;
};

ExperimentConfig load_one(const GlobalOptions& g, const ExperimentConfig* fallback = nullptr) {
  if (g.configs.size() > 1) throw ConfigError("config", "this command takes a single --config");
  ExperimentConfig c = g.configs.empty() ? (fallback ? *fallback : ExperimentConfig{})
                                         : load_config(g.configs.front());
  if (g.seed) c.seed = *g.seed;
  c.validate();
  return c;
}

struct HeatmapOptions {
  std::string objective = "dpo";
  HyperParams hp;
  std::optional<double> tau;
  std::optional<double> alpha;
  AxisSpec theta;
  AxisSpec ref;
};

struct RefstatsOptions {
  std::optional<std::string> data;
  std::optional<std::string> world;
  std::optional<std::string> dataset;
  std::size_t bins = 40;
};

int fail(std::ostream& err, ExitCode code, const std::string& message) {
  err << "error: " << message << '\n';
  return static_cast<int>(code);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Preference-optimization experiments on synthetic worlds", "hypo"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--seed", g.seed, "Override the config seed");
  app.add_option("--out", g.out, "Output directory (file for heatmap/refstats)");
  app.add_option("--config", g.configs, "Experiment config file; repeat for compare")
      ->check(CLI::ExistingFile);

  auto* datagen = app.add_subcommand("datagen", "Generate a world and preference data");
  auto* train_cmd = app.add_subcommand("train", "Train one objective into a run directory");
  auto* compare = app.add_subcommand("compare", "Train several objectives on shared data");

  auto* heatmap = app.add_subcommand("heatmap", "Export a gradient-weight heatmap CSV");
  HeatmapOptions hm;
  heatmap->add_option("--objective", hm.objective, "Objective kind")->capture_default_str();
  heatmap->add_option("--beta", hm.hp.beta)->capture_default_str();
  heatmap->add_option("--gamma,--hypo-gamma", hm.hp.gamma)->capture_default_str();
  auto* tau_opt = heatmap->add_option("--tau,--hypo-tau", hm.tau, "Soft clip temperature (1/alpha)");
  auto* alpha_opt = heatmap->add_option("--alpha", hm.alpha, "Soft clip sharpness");
  tau_opt->excludes(alpha_opt);
  heatmap->add_option("--home-advantage", hm.hp.h)->capture_default_str();
  heatmap->add_option("--lambda-sft", hm.hp.lambda_sft)->capture_default_str();
  heatmap->add_option("--theta-lo", hm.theta.lo)->capture_default_str();
  heatmap->add_option("--theta-hi", hm.theta.hi)->capture_default_str();
  heatmap->add_option("--theta-steps", hm.theta.n_steps)->capture_default_str();
  heatmap->add_option("--ref-lo", hm.ref.lo)->capture_default_str();
  heatmap->add_option("--ref-hi", hm.ref.hi)->capture_default_str();
  heatmap->add_option("--ref-steps", hm.ref.n_steps)->capture_default_str();

  auto* refstats = app.add_subcommand("refstats", "Export a reference-margin histogram CSV");
  RefstatsOptions rs;
  auto* data_opt = refstats->add_option("--data", rs.data, "Directory written by datagen");
  auto* world_opt = refstats->add_option("--world", rs.world, "World file");
  auto* dataset_opt = refstats->add_option("--dataset", rs.dataset, "Dataset file");
  data_opt->excludes(world_opt)->excludes(dataset_opt);
  world_opt->needs(dataset_opt);
  dataset_opt->needs(world_opt);
  refstats->add_option("--bins", rs.bins)->capture_default_str();

  std::vector<std::string> reversed(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(reversed.begin(), reversed.end());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : static_cast<int>(ExitCode::Config);
  }

  try {
    if (datagen->parsed()) {
      const ExperimentConfig c = load_one(g);
      cmd_datagen(c, g.out ? std::filesystem::path(*g.out) : c.data_dir, out);
    } else if (train_cmd->parsed()) {
      const ExperimentConfig c = load_one(g);
      cmd_train(c, g.out ? std::filesystem::path(*g.out) : c.output_dir, out);
    } else if (compare->parsed()) {
      std::vector<ExperimentConfig> configs;
      for (const auto& path : g.configs) {
        configs.push_back(load_config(path));
        if (g.seed) configs.back().seed = *g.seed;
      }
      if (configs.size() < 2) throw ConfigError("config", "compare needs at least two --config");
      cmd_compare(configs, g.out ? std::filesystem::path(*g.out) : configs.front().output_dir,
                  out);
    } else if (heatmap->parsed()) {
      auto [kind, alpha] = resolve_objective(hm.objective, hm.tau, hm.alpha);
      hm.hp.alpha = alpha;
      const std::string name(to_string(kind));
      cmd_heatmap(kind, hm.hp, GridSpec{hm.theta, hm.ref},
                  g.out ? std::filesystem::path(*g.out) : std::filesystem::path("heatmap_" + name + ".csv"), out);
    } else if (refstats->parsed()) {
      std::filesystem::path world_file;
      std::filesystem::path dataset_file;
      if (rs.data) {
        world_file = std::filesystem::path(*rs.data) / kWorldFile;
        dataset_file = std::filesystem::path(*rs.data) / kTrainFile;
      } else if (rs.world) {
        world_file = *rs.world;
        dataset_file = *rs.dataset;
      } else {
        throw ConfigError("data", "refstats needs --data DIR or --world FILE --dataset FILE");
      }
      cmd_refstats(world_file, dataset_file, rs.bins,
                   g.out ? std::filesystem::path(*g.out) : std::filesystem::path("refstats.csv"), out);
    }
  } catch (const ConfigError& e) {
    return fail(err, ExitCode::Config, e.what());
  } catch (const ParameterError& e) {
    return fail(err, ExitCode::Config, e.what());
  } catch (const ArgumentError& e) {
    return fail(err, ExitCode::Config, e.what());
  } catch (const IoError& e) {
    return fail(err, ExitCode::Io, e.what());
  } catch (const TrainingError& e) {
    return fail(err, ExitCode::Numerical,
                "training failed at step " + std::to_string(e.step()) + ": " + e.what());
  } catch (const CalibrationError& e) {
    return fail(err, ExitCode::Numerical, e.what());
  } catch (const DomainError& e) {
    return fail(err, ExitCode::Numerical, e.what());
  } catch (const std::exception& e) {
    return fail(err, ExitCode::Failure, e.what());
  }
  return static_cast<int>(ExitCode::Ok);
}

}  // namespace hypo::cli
