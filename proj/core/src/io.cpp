// SPDX-License-Identifier: Apache-2.0
#include "hypo/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "hypo/errors.hpp"
#include "json.hpp"

namespace hypo {
namespace {

using Json = nlohmann::ordered_json;

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

Json header(std::string_view format, const FileProvenance& p) {
  Json j;
  j["format"] = format;
  j["version"] = kFormatVersion;
  j["config_hash"] = p.config_hash;
  j["seed"] = p.seed;
  return j;
}

FileProvenance check_header(const Json& j, std::string_view format,
                            const std::filesystem::path& path) {
  if (!j.is_object() || j.value("format", "") != format) {
    throw IoError("'" + path.string() + "' is not a " + std::string(format) + " file");
  }
  if (j.value("version", 0) != kFormatVersion) {
    throw IoError("'" + path.string() + "' has unsupported version");
  }
  return FileProvenance{j.value("config_hash", ""), j.value("seed", std::uint64_t{0})};
}

Json parse_json(const std::string& text, const std::filesystem::path& path) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw IoError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) throw IoError("'" + path.string() + "' is empty");
  return lines;
}

Json policy_to_json(const Policy& policy) {
  Json j;
  j["policy_class"] = to_string(policy.policy_class());
  j["n_prompts"] = policy.n_prompts();
  j["n_responses"] = policy.n_responses();
  if (policy.policy_class() == PolicyClass::LogLinear) {
    const auto& fm = static_cast<const LogLinearPolicy&>(policy).feature_map();
    j["feature_dim"] = fm.dim();
    j["feature_seed"] = fm.seed();
  }
  const auto params = policy.parameters();
  j["parameters"] = std::vector<double>(params.begin(), params.end());
  return j;
}

std::unique_ptr<Policy> policy_from_json(const Json& j) {
  const PolicyClass cls = parse_policy_class(j.at("policy_class").get<std::string>());
  const auto np = j.at("n_prompts").get<std::size_t>();
  const auto nr = j.at("n_responses").get<std::size_t>();
  auto params = j.at("parameters").get<std::vector<double>>();
  if (cls == PolicyClass::Tabular) {
    if (params.size() != np * nr) throw IoError("tabular checkpoint has wrong parameter count");
    Matrix logits(np, nr);
    std::copy(params.begin(), params.end(), logits.data().begin());
    return std::make_unique<TabularPolicy>(std::move(logits));
  }
  auto features = std::make_shared<const FeatureMap>(
      np, nr, j.at("feature_dim").get<std::size_t>(), j.at("feature_seed").get<std::uint64_t>());
  return std::make_unique<LogLinearPolicy>(std::move(features), std::move(params));
}

}  // namespace

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

void write_dataset(const PreferenceDataset& dataset, const FileProvenance& provenance,
                   const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  Json h = header("hypo-dataset", provenance);
  h["split"] = to_string(dataset.split);
  h["n_records"] = dataset.size();
  out << h.dump() << '\n';
  for (const auto& r : dataset.records) {
    Json j;
    j["prompt_id"] = r.prompt_id;
    j["chosen_id"] = r.chosen_id;
    j["rejected_id"] = r.rejected_id;
    j["ref_margin"] = r.ref_margin;
    if (r.weight != 1.0) j["weight"] = r.weight;
    out << j.dump() << '\n';
  }
  finish(out, path);
}

PreferenceDataset read_dataset(const std::filesystem::path& path, FileProvenance* provenance) {
  const auto lines = read_lines(path);
  const Json h = parse_json(lines.front(), path);
  const FileProvenance p = check_header(h, "hypo-dataset", path);
  if (provenance) *provenance = p;

  PreferenceDataset out;
  out.split = parse_split(h.value("split", "all"));
  out.records.reserve(lines.size() - 1);
  try {
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const Json j = parse_json(lines[i], path);
      PreferenceRecord r;
      r.prompt_id = j.at("prompt_id").get<std::size_t>();
      r.chosen_id = j.at("chosen_id").get<std::size_t>();
      r.rejected_id = j.at("rejected_id").get<std::size_t>();
      r.ref_margin = j.at("ref_margin").get<double>();
      r.weight = j.value("weight", 1.0);
      if (r.chosen_id == r.rejected_id) {
        throw IoError("record " + std::to_string(i) + " has chosen == rejected");
      }
      out.records.push_back(r);
    }
  } catch (const Json::exception& e) {
    throw IoError("bad record in '" + path.string() + "': " + e.what());
  }
  if (h.contains("n_records") && h["n_records"].get<std::size_t>() != out.size()) {
    throw IoError("'" + path.string() + "' is truncated");
  }
  return out;
}

// ---------------------------------------------------------------------------

void write_world(const SyntheticWorld& world, const FileProvenance& provenance,
                 const std::filesystem::path& path) {
  Json j = header("hypo-world", provenance);
  const auto& c = world.config;
  j["config"] = {{"n_prompts", c.n_prompts},
                 {"n_responses", c.n_responses},
                 {"ref_misalignment", c.ref_misalignment},
                 {"ref_tau", c.ref_tau},
                 {"reward_scale", c.reward_scale},
                 {"seed", c.seed}};
  Json rewards = Json::array();
  for (std::size_t x = 0; x < world.true_reward.rows(); ++x) {
    const auto row = world.true_reward.row(x);
    rewards.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["true_reward"] = std::move(rewards);
  j["ref_policy"] = policy_to_json(world.ref_policy);

  std::ofstream out = open_output(path);
  out << j.dump(1) << '\n';
  finish(out, path);
}

SyntheticWorld read_world(const std::filesystem::path& path, FileProvenance* provenance) {
  const Json j = parse_json(read_file(path), path);
  const FileProvenance p = check_header(j, "hypo-world", path);
  if (provenance) *provenance = p;
  try {
    WorldConfig c;
    const Json& jc = j.at("config");
    c.n_prompts = jc.at("n_prompts").get<std::size_t>();
    c.n_responses = jc.at("n_responses").get<std::size_t>();
    c.ref_misalignment = jc.at("ref_misalignment").get<double>();
    c.ref_tau = jc.at("ref_tau").get<double>();
    c.reward_scale = jc.at("reward_scale").get<double>();
    c.seed = jc.at("seed").get<std::uint64_t>();
    c.validate();

    const auto rows = j.at("true_reward").get<std::vector<std::vector<double>>>();
    if (rows.size() != c.n_prompts) throw IoError("world reward has wrong row count");
    Matrix reward(c.n_prompts, c.n_responses);
    for (std::size_t x = 0; x < rows.size(); ++x) {
      if (rows[x].size() != c.n_responses) throw IoError("world reward has wrong column count");
      std::copy(rows[x].begin(), rows[x].end(), reward.row(x).begin());
    }
    auto ref = policy_from_json(j.at("ref_policy"));
    if (ref->policy_class() != PolicyClass::Tabular) {
      throw IoError("world reference policy must be tabular");
    }
    return SyntheticWorld{c, std::move(reward), static_cast<const TabularPolicy&>(*ref)};
  } catch (const Json::exception& e) {
    throw IoError("bad world file '" + path.string() + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------

void write_checkpoint(const Policy& policy, const CheckpointInfo& info,
                      const std::filesystem::path& path) {
  Json j = header("hypo-checkpoint", info.provenance);
  j["epoch"] = info.epoch;
  j["seed_lineage"] = info.seed_lineage;
  const Json policy_json = policy_to_json(policy);
  for (const auto& [key, value] : policy_json.items()) j[key] = value;
  std::ofstream out = open_output(path);
  out << j.dump(1) << '\n';
  finish(out, path);
}

std::unique_ptr<Policy> read_checkpoint(const std::filesystem::path& path, CheckpointInfo* info) {
  const Json j = parse_json(read_file(path), path);
  const FileProvenance p = check_header(j, "hypo-checkpoint", path);
  try {
    if (info) {
      info->provenance = p;
      info->epoch = j.value("epoch", std::size_t{0});
      info->seed_lineage = j.value("seed_lineage", std::vector<std::uint64_t>{});
    }
    return policy_from_json(j);
  } catch (const Json::exception& e) {
    throw IoError("bad checkpoint '" + path.string() + "': " + e.what());
  }
}

// ---------------------------------------------------------------------------

void write_run_log(const RunLog& log, const FileProvenance& provenance,
                   const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << header("hypo-runlog", provenance).dump() << '\n';
  for (const auto& e : log.entries()) {
    Json j;
    j["step"] = e.step;
    j["learning_rate"] = e.learning_rate;
    j["train_loss"] = e.train_loss;
    j["agreement_rate"] = e.agreement_rate;
    j["pessimistic_margin"] = e.pessimistic_margin ? Json(*e.pessimistic_margin) : Json(nullptr);
    j["pessimistic_subset_size"] = e.pessimistic_subset_size;
    j["wall_time"] = e.wall_time;
    out << j.dump() << '\n';
  }
  finish(out, path);
}

RunLog read_run_log(const std::filesystem::path& path, FileProvenance* provenance) {
  const auto lines = read_lines(path);
  const FileProvenance p = check_header(parse_json(lines.front(), path), "hypo-runlog", path);
  if (provenance) *provenance = p;
  RunLog log;
  try {
    for (std::size_t i = 1; i < lines.size(); ++i) {
      const Json j = parse_json(lines[i], path);
      RunLogEntry e;
      e.step = j.at("step").get<std::size_t>();
      e.learning_rate = j.at("learning_rate").get<double>();
      e.train_loss = j.at("train_loss").get<double>();
      e.agreement_rate = j.at("agreement_rate").get<double>();
      if (!j.at("pessimistic_margin").is_null()) {
        e.pessimistic_margin = j["pessimistic_margin"].get<double>();
      }
      e.pessimistic_subset_size = j.at("pessimistic_subset_size").get<std::size_t>();
      e.wall_time = j.at("wall_time").get<double>();
      log.append(e);
    }
  } catch (const Json::exception& e) {
    throw IoError("bad run log '" + path.string() + "': " + e.what());
  }
  return log;
}

}  // namespace hypo
