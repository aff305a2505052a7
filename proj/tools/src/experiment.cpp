// SPDX-License-Identifier: Apache-2.0
#include "hypo_cli/experiment.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

#include "hypo/errors.hpp"
#include "hypo/io.hpp"

namespace hypo::cli {
namespace {

constexpr std::string_view kRoot = "";

// Key/value store that remembers which keys were read, so leftovers can be rejected.
class Entries {
 public:
  void add(std::string section, std::string key, std::string value) {
    values_[{std::move(section), std::move(key)}] = std::move(value);
  }

  std::optional<std::string> take(std::string_view section, std::string_view key) {
    auto it = values_.find({std::string(section), std::string(key)});
    if (it == values_.end()) return std::nullopt;
    std::string value = std::move(it->second);
    values_.erase(it);
    return value;
  }

  // Reads `key` or its alias; supplying both is an error.
  std::optional<std::string> take_either(std::string_view section, std::string_view key,
                                         std::string_view alias) {
    auto a = take(section, key);
    auto b = take(section, alias);
    if (a && b) {
      const std::string name = qualified(section, key);
      throw ConfigError(name, name + ": '" + std::string(key) + "' and '" + std::string(alias) +
                                  "' are the same setting; give one");
    }
    return a ? a : b;
  }

  void reject_leftovers() const {
    if (values_.empty()) return;
    const auto& [where, value] = *values_.begin();
    throw ConfigError(qualified(where.first, where.second),
                      "unknown key '" + qualified(where.first, where.second) + "'");
  }

  static std::string qualified(std::string_view section, std::string_view key) {
    return section.empty() ? std::string(key) : std::string(section) + "." + std::string(key);
  }

 private:
  std::map<std::pair<std::string, std::string>, std::string> values_;
};

double to_double(const std::string& key, const std::string& text) {
  double value = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) {
    throw ConfigError(key, key + ": expected a finite number, got '" + text + "'");
  }
  return value;
}

std::uint64_t to_u64(const std::string& key, const std::string& text) {
  std::uint64_t value = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(key, key + ": expected a non-negative integer, got '" + text + "'");
  }
  return value;
}

bool to_bool(const std::string& key, const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0") return false;
  throw ConfigError(key, key + ": expected true or false, got '" + text + "'");
}

template <typename Parse>
auto parse_enum(const std::string& key, const std::string& text, Parse parse) {
  try {
    return parse(text);
  } catch (const ParameterError& e) {
    throw ConfigError(key, key + ": " + e.what());
  }
}

class Reader {
 public:
  Reader(Entries& entries, std::string section) : entries_(entries), section_(std::move(section)) {}

  void number(std::string_view key, double& out) {
    if (auto v = entries_.take(section_, key)) out = to_double(name(key), *v);
  }
  void number(std::string_view key, std::optional<double>& out) {
    if (auto v = entries_.take(section_, key)) out = to_double(name(key), *v);
  }
  void count(std::string_view key, std::size_t& out) {
    if (auto v = entries_.take(section_, key)) out = static_cast<std::size_t>(to_u64(name(key), *v));
  }
  void flag(std::string_view key, bool& out) {
    if (auto v = entries_.take(section_, key)) out = to_bool(name(key), *v);
  }
  std::optional<std::string> text(std::string_view key) { return entries_.take(section_, key); }
  std::optional<double> number_either(std::string_view key, std::string_view alias) {
    auto v = entries_.take_either(section_, key, alias);
    if (!v) return std::nullopt;
    return to_double(name(key), *v);
  }
  std::string name(std::string_view key) const { return Entries::qualified(section_, key); }

 private:
  Entries& entries_;
  std::string section_;
};

Entries read_entries(std::string_view text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError("", "config syntax error at line " + std::to_string(e.line()) + ": " +
                              e.message());
  }
  Entries entries;
  for (const auto& [name, node] : tree) {
    const bool is_section = name == "world" || name == "train" || name == "objective";
    if (is_section) {
      for (const auto& [key, leaf] : node) entries.add(name, key, leaf.data());
    } else if (node.empty()) {
      entries.add(std::string(kRoot), name, node.data());
    } else {
      throw ConfigError(name, "unknown section [" + name + "]");
    }
  }
  return entries;
}

void line(std::ostringstream& os, std::string_view key, const std::string& value) {
  os << key << " = " << value << '\n';
}
void line(std::ostringstream& os, std::string_view key, double value) {
  line(os, key, format_number(value));
}
void line(std::ostringstream& os, std::string_view key, std::size_t value) {
  line(os, key, std::to_string(value));
}
void line(std::ostringstream& os, std::string_view key, bool value) {
  line(os, key, std::string(value ? "true" : "false"));
}

std::string world_block(const ExperimentConfig& c) {
  const WorldSection& w = c.world;
  std::ostringstream os;
  os << "[world]\n";
  line(os, "n_prompts", w.world.n_prompts);
  line(os, "n_responses", w.world.n_responses);
  line(os, "ref_misalignment", w.world.ref_misalignment);
  line(os, "ref_tau", w.world.ref_tau);
  line(os, "reward_scale", w.world.reward_scale);
  line(os, "n_pairs", w.n_pairs);
  line(os, "label_noise", w.label_noise);
  line(os, "label_model", std::string(to_string(w.label_model)));
  if (w.target_pessimism) line(os, "target_pessimism", *w.target_pessimism);
  line(os, "pessimism_tolerance", w.pessimism_tolerance);
  return os.str();
}

std::string train_block(const ExperimentConfig& c) {
  const TrainConfig& t = c.train.optimizer;
  std::ostringstream os;
  os << "[train]\n";
  line(os, "policy", std::string(to_string(c.train.policy)));
  line(os, "feature_dim", c.train.feature_dim);
  line(os, "peak_lr", t.peak_lr);
  line(os, "epochs", t.epochs);
  line(os, "batch_size", t.batch_size);
  line(os, "warmup_fraction", t.warmup_fraction);
  line(os, "adam_beta1", t.adam_beta1);
  line(os, "adam_beta2", t.adam_beta2);
  line(os, "adam_epsilon", t.adam_epsilon);
  line(os, "weight_decay", t.weight_decay);
  if (t.grad_clip) line(os, "grad_clip", *t.grad_clip);
  line(os, "eval_every", t.eval_every);
  line(os, "recompute_ref_margins", t.recompute_ref_margins);
  line(os, "record_wall_time", t.record_wall_time);
  return os.str();
}

std::string objective_block(const ExperimentConfig& c) {
  const HyperParams& hp = c.objective.hp;
  std::ostringstream os;
  os << "[objective]\n";
  line(os, "kind", std::string(to_string(c.objective.kind)));
  line(os, "beta", hp.beta);
  line(os, "hypo_gamma", hp.gamma);
  if (hp.alpha) line(os, "alpha", *hp.alpha);
  line(os, "h", hp.h);
  line(os, "lambda_sft", hp.lambda_sft);
  return os.str();
}

std::string head_block(const ExperimentConfig& c, bool with_output_dir) {
  std::ostringstream os;
  line(os, "seed", std::to_string(c.seed));
  if (with_output_dir) line(os, "output_dir", c.output_dir.generic_string());
  line(os, "data_dir", c.data_dir.generic_string());
  return os.str();
}

template <typename Fn>
void as_config_error(const std::string& key, Fn fn) {
  try {
    fn();
  } catch (const ParameterError& e) {
    throw ConfigError(key, key + ": " + e.what());
  }
}

}  // namespace

std::string format_number(double value) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

std::string valid_cli_objective_names() { return "hypo, " + valid_objective_names(); }

std::pair<ObjectiveKind, std::optional<double>> resolve_objective(
    std::string_view name, std::optional<double> hypo_tau, std::optional<double> alpha) {
  if (hypo_tau && alpha) {
    throw ConfigError("objective.hypo_tau", "objective.hypo_tau and objective.alpha are mutually exclusive");
  }
  if (hypo_tau && *hypo_tau < 0.0) {
    throw ConfigError("objective.hypo_tau", "objective.hypo_tau must be >= 0");
  }
  if (alpha && !(*alpha > 0.0)) {
    throw ConfigError("objective.alpha", "objective.alpha must be > 0");
  }
  std::optional<double> sharpness = alpha;
  if (hypo_tau && *hypo_tau > 0.0) sharpness = HyperParams::alpha_from_tau(*hypo_tau);

  ObjectiveKind kind;
  if (name == "hypo") {
    kind = sharpness ? ObjectiveKind::HyPOSoft : ObjectiveKind::HyPOHard;
  } else {
    try {
      kind = parse_objective_kind(name);
    } catch (const ParameterError&) {
      throw ConfigError("objective.kind", "objective.kind: unknown objective '" + std::string(name) +
                                              "'; valid kinds: " + valid_cli_objective_names());
    }
  }
  if (kind == ObjectiveKind::HyPOSoft && !sharpness) {
    throw ConfigError("objective.hypo_tau", "hypo_soft needs objective.hypo_tau > 0 or objective.alpha");
  }
  if (kind != ObjectiveKind::HyPOSoft && sharpness) {
    const char* key = alpha ? "objective.alpha" : "objective.hypo_tau";
    throw ConfigError(key, std::string(key) + " selects the soft variant and cannot be used with " +
                               std::string(to_string(kind)));
  }
  return {kind, sharpness};
}

void ExperimentConfig::validate() const {
  if (output_dir.empty()) throw ConfigError("output_dir", "output_dir must not be empty");
  if (data_dir.empty()) throw ConfigError("data_dir", "data_dir must not be empty");

  as_config_error("world", [&] { world_config().validate(); });
  if (world.n_pairs < 2) throw ConfigError("world.n_pairs", "world.n_pairs must be >= 2");
  if (!(world.label_noise >= 0.0 && world.label_noise < 1.0)) {
    throw ConfigError("world.label_noise", "world.label_noise must lie in [0, 1)");
  }
  if (world.target_pessimism && !(*world.target_pessimism > 0.0 && *world.target_pessimism < 1.0)) {
    throw ConfigError("world.target_pessimism", "world.target_pessimism must lie in (0, 1)");
  }
  if (!(world.pessimism_tolerance > 0.0)) {
    throw ConfigError("world.pessimism_tolerance", "world.pessimism_tolerance must be > 0");
  }

  if (train.policy == PolicyClass::LogLinear && train.feature_dim == 0) {
    throw ConfigError("train.feature_dim", "train.feature_dim must be >= 1");
  }
  as_config_error("objective", [&] { objective.hp.validate(); });
  as_config_error("train", [&] { train_config().validate(); });
}

WorldConfig ExperimentConfig::world_config() const {
  WorldConfig c = world.world;
  c.seed = seed;
  return c;
}

TrainConfig ExperimentConfig::train_config() const {
  TrainConfig c = train.optimizer;
  c.objective = objective.kind;
  c.hp = objective.hp;
  c.seed = seed;
  return c;
}

std::string ExperimentConfig::canonical_text() const {
  return head_block(*this, true) + "\n" + world_block(*this) + "\n" + train_block(*this) + "\n" +
         objective_block(*this);
}

std::string ExperimentConfig::comparable_text() const {
  return head_block(*this, false) + "\n" + world_block(*this) + "\n" + train_block(*this);
}

std::string ExperimentConfig::world_hash() const {
  return fnv1a_hex(head_block(*this, false) + "\n" + world_block(*this));
}

std::string ExperimentConfig::config_hash() const {
  return fnv1a_hex(comparable_text() + "\n" + objective_block(*this));
}

ExperimentConfig parse_config(std::string_view text) {
  Entries entries = read_entries(text);
  ExperimentConfig c;

  Reader root(entries, "");
  if (auto v = root.text("seed")) c.seed = to_u64("seed", *v);
  if (auto v = root.text("output_dir")) c.output_dir = *v;
  if (auto v = root.text("data_dir")) c.data_dir = *v;

  Reader world(entries, "world");
  world.count("n_prompts", c.world.world.n_prompts);
  world.count("n_responses", c.world.world.n_responses);
  world.number("ref_misalignment", c.world.world.ref_misalignment);
  world.number("ref_tau", c.world.world.ref_tau);
  world.number("reward_scale", c.world.world.reward_scale);
  world.count("n_pairs", c.world.n_pairs);
  world.number("label_noise", c.world.label_noise);
  if (auto v = world.text("label_model")) {
    c.world.label_model = parse_enum("world.label_model", *v, parse_label_model);
  }
  world.number("target_pessimism", c.world.target_pessimism);
  world.number("pessimism_tolerance", c.world.pessimism_tolerance);

  Reader train(entries, "train");
  if (auto v = train.text("policy")) {
    c.train.policy = parse_enum("train.policy", *v, parse_policy_class);
  }
  TrainConfig& t = c.train.optimizer;
  train.count("feature_dim", c.train.feature_dim);
  train.number("peak_lr", t.peak_lr);
  train.count("epochs", t.epochs);
  train.count("batch_size", t.batch_size);
  train.number("warmup_fraction", t.warmup_fraction);
  train.number("adam_beta1", t.adam_beta1);
  train.number("adam_beta2", t.adam_beta2);
  train.number("adam_epsilon", t.adam_epsilon);
  train.number("weight_decay", t.weight_decay);
  train.number("grad_clip", t.grad_clip);
  train.count("eval_every", t.eval_every);
  train.flag("recompute_ref_margins", t.recompute_ref_margins);
  train.flag("record_wall_time", t.record_wall_time);

  Reader objective(entries, "objective");
  HyperParams& hp = c.objective.hp;
  objective.number("beta", hp.beta);
  if (auto g = objective.number_either("hypo_gamma", "gamma")) hp.gamma = *g;
  if (auto h = objective.number_either("h", "home_advantage")) hp.h = *h;
  objective.number("lambda_sft", hp.lambda_sft);
  std::optional<double> hypo_tau;
  std::optional<double> alpha;
  objective.number("hypo_tau", hypo_tau);
  objective.number("alpha", alpha);
  const std::string kind = objective.text("kind").value_or("dpo");
  std::tie(c.objective.kind, hp.alpha) = resolve_objective(kind, hypo_tau, alpha);

  entries.reject_leftovers();
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_file(path));
}

void write_config_snapshot(const ExperimentConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << "# config_hash = " << config.config_hash() << '\n' << config.canonical_text();
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace hypo::cli
