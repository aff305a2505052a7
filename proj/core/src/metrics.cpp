// SPDX-License-Identifier: Apache-2.0
#include "hypo/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "hypo/errors.hpp"
#include "hypo/random.hpp"
#include "json.hpp"

namespace hypo {
namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

std::size_t respond(const Policy& policy, std::size_t prompt, JudgeMode mode, Rng& rng) {
  const std::vector<double> lp = policy.log_probs(prompt);
  if (mode == JudgeMode::Greedy) {
    return static_cast<std::size_t>(std::max_element(lp.begin(), lp.end()) - lp.begin());
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double u = unit(rng);
  for (std::size_t y = 0; y < lp.size(); ++y) {
    u -= std::exp(lp[y]);
    if (u < 0.0) return y;
  }
  return lp.size() - 1;
}

}  // namespace

AgreementReport agreement_rate(const Policy& policy, const PreferenceDataset& eval_set,
                               std::size_t step) {
  if (eval_set.empty()) throw ArgumentError("agreement_rate on an empty eval set");
  std::size_t agree = 0;
  for (const auto& r : eval_set.records) {
    if (policy.policy_margin(r.prompt_id, r.chosen_id, r.rejected_id) > 0.0) ++agree;
  }
  return {step, static_cast<double>(agree) / static_cast<double>(eval_set.size()),
          eval_set.size()};
}

PessimisticMarginReport pessimistic_margin(const Policy& policy,
                                           const PreferenceDataset& eval_set, std::size_t step) {
  PessimisticMarginReport report{step, std::nullopt, 0};
  double sum = 0.0;
  for (const auto& r : eval_set.records) {
    if (r.ref_margin < 0.0) {
      sum += policy.policy_margin(r.prompt_id, r.chosen_id, r.rejected_id);
      ++report.subset_size;
    }
  }
  if (report.subset_size > 0) report.mean_margin = sum / static_cast<double>(report.subset_size);
  return report;
}

std::vector<double> ref_margins(const Policy& ref, const PreferenceDataset& dataset) {
  std::vector<double> out;
  out.reserve(dataset.size());
  for (const auto& r : dataset.records) {
    out.push_back(ref.policy_margin(r.prompt_id, r.chosen_id, r.rejected_id));
  }
  return out;
}

RefMarginStats ref_margin_stats(const Policy& ref, const PreferenceDataset& dataset) {
  if (dataset.empty()) throw ArgumentError("ref_margin_stats on an empty dataset");
  std::vector<double> margins = ref_margins(ref, dataset);
  RefMarginStats stats;
  stats.count = margins.size();
  double sum = 0.0;
  std::size_t pessimistic = 0;
  for (double m : margins) {
    sum += m;
    if (m < 0.0) ++pessimistic;
  }
  stats.mean = sum / static_cast<double>(margins.size());
  stats.fraction_pessimistic =
      static_cast<double>(pessimistic) / static_cast<double>(margins.size());
  const std::size_t mid = (margins.size() - 1) / 2;
  std::nth_element(margins.begin(), margins.begin() + static_cast<std::ptrdiff_t>(mid),
                   margins.end());
  stats.median = margins[mid];
  return stats;
}

std::string_view to_string(JudgeMode mode) {
  return mode == JudgeMode::Greedy ? "greedy" : "sampled";
}

WinMatrix win_matrix(std::span<const NamedPolicy> policies, const SyntheticWorld& world,
                     std::size_t n_prompts_eval, JudgeMode mode, std::uint64_t seed) {
  if (policies.size() < 2) throw ArgumentError("win_matrix needs at least two policies");
  if (n_prompts_eval < 1) throw ArgumentError("win_matrix needs at least one eval prompt");
  for (const auto& p : policies) {
    if (p.policy == nullptr) throw ArgumentError("win_matrix got a null policy");
    if (p.policy->n_prompts() != world.config.n_prompts ||
        p.policy->n_responses() != world.config.n_responses) {
      throw ArgumentError("policy '" + p.name + "' does not match the world vocabulary");
    }
  }

  const std::size_t k = policies.size();
  Rng rng = make_rng(seed, Stream::WinMatrix);
  std::uniform_int_distribution<std::size_t> pick_prompt(0, world.config.n_prompts - 1);

  // rewards[i][n]: true reward of policy i's answer to the n-th eval prompt.
  std::vector<std::vector<double>> rewards(k, std::vector<double>(n_prompts_eval));
  for (std::size_t n = 0; n < n_prompts_eval; ++n) {
    const std::size_t x = pick_prompt(rng);
    for (std::size_t i = 0; i < k; ++i) {
      rewards[i][n] = world.true_reward(x, respond(*policies[i].policy, x, mode, rng));
    }
  }

  WinMatrix out;
  out.n_prompts_eval = n_prompts_eval;
  out.mode = mode;
  out.entries.assign(k, std::vector<std::optional<double>>(k));
  out.strict_wins = out.entries;
  out.tie_mass = out.entries;
  for (const auto& p : policies) out.labels.push_back(p.name);

  const double scale = 100.0 / static_cast<double>(n_prompts_eval);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      if (i == j) continue;
      std::size_t wins = 0;
      std::size_t ties = 0;
      for (std::size_t n = 0; n < n_prompts_eval; ++n) {
        if (rewards[i][n] > rewards[j][n]) {
          ++wins;
        } else if (rewards[i][n] == rewards[j][n]) {
          ++ties;
        }
      }
      out.strict_wins[i][j] = scale * static_cast<double>(wins);
      out.tie_mass[i][j] = scale * static_cast<double>(ties);
      out.entries[i][j] = scale * (static_cast<double>(wins) + 0.5 * static_cast<double>(ties));
    }
  }
  return out;
}

void write_reports_jsonl(std::span<const AgreementReport> agreement,
                         std::span<const PessimisticMarginReport> pessimistic,
                         const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  for (const auto& a : agreement) {
    nlohmann::ordered_json j;
    j["report"] = "agreement";
    j["step"] = a.step;
    j["agree_rate"] = a.agree_rate;
    j["n_pairs"] = a.n_pairs;
    out << j.dump() << '\n';
  }
  for (const auto& p : pessimistic) {
    nlohmann::ordered_json j;
    j["report"] = "pessimistic_margin";
    j["step"] = p.step;
    j["mean_margin"] = p.mean_margin ? nlohmann::ordered_json(*p.mean_margin) : nullptr;
    j["subset_size"] = p.subset_size;
    out << j.dump() << '\n';
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_win_matrix_csv(const WinMatrix& matrix, const std::filesystem::path& path) {
  std::ofstream out = open_output(path);
  out << "# pairwise win rates judged by the synthetic true reward (" << to_string(matrix.mode)
      << ", " << matrix.n_prompts_eval << " prompts)\n";
  out << "row,column,win_rate,strict_win_rate,tie_rate\n";
  for (std::size_t i = 0; i < matrix.labels.size(); ++i) {
    for (std::size_t j = 0; j < matrix.labels.size(); ++j) {
      if (i == j) continue;
      out << matrix.labels[i] << ',' << matrix.labels[j] << ','
          << format_number(*matrix.entries[i][j]) << ','
          << format_number(*matrix.strict_wins[i][j]) << ','
          << format_number(*matrix.tie_mass[i][j]) << '\n';
    }
  }
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

}  // namespace hypo
