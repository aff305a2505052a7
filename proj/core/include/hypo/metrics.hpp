// SPDX-License-Identifier: Apache-2.0
//
// Inference-aligned evaluation: absolute agreement, the pessimistic-subset margin, reference
// margin summary statistics, and a pairwise win matrix judged by the synthetic true reward.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hypo/datagen.hpp"
#include "hypo/policies.hpp"

namespace hypo {

struct AgreementReport {
  std::size_t step = 0;
  double agree_rate = 0.0;
  std::size_t n_pairs = 0;
};

struct PessimisticMarginReport {
  std::size_t step = 0;
  std::optional<double> mean_margin;
  std::size_t subset_size = 0;
};

struct RefMarginStats {
  double mean = 0.0;
  /// Lower median: the smaller central order statistic for even counts.
  double median = 0.0;
  double fraction_pessimistic = 0.0;
  std::size_t count = 0;
};

/// Share of pairs with policy margin strictly > 0. Ties count as disagreement.
AgreementReport agreement_rate(const Policy& policy, const PreferenceDataset& eval_set,
                               std::size_t step = 0);

/// Mean policy margin over the records whose cached reference margin is negative.
/// The subset depends only on the cache, never on `policy`.
PessimisticMarginReport pessimistic_margin(const Policy& policy,
                                           const PreferenceDataset& eval_set,
                                           std::size_t step = 0);

RefMarginStats ref_margin_stats(const Policy& ref, const PreferenceDataset& dataset);

/// Reference margins of every record, recomputed from `ref`.
std::vector<double> ref_margins(const Policy& ref, const PreferenceDataset& dataset);

enum class JudgeMode { Greedy, Sampled };
std::string_view to_string(JudgeMode mode);

struct NamedPolicy {
  std::string name;
  const Policy* policy = nullptr;
};

/// Percent win rates of row policy against column policy. The judge is the world's true
/// reward, standing in for an external LLM judge.
struct WinMatrix {
  std::vector<std::string> labels;
  /// Tie-split rate: strict wins plus half the ties. entries[i][j] + entries[j][i] = 100.
  std::vector<std::vector<std::optional<double>>> entries;
  /// Strict wins only. strict_wins[i][j] + strict_wins[j][i] + tie_mass[i][j] = 100.
  std::vector<std::vector<std::optional<double>>> strict_wins;
  std::vector<std::vector<std::optional<double>>> tie_mass;
  std::size_t n_prompts_eval = 0;
  JudgeMode mode = JudgeMode::Greedy;
};

/// Each policy answers `n_prompts_eval` prompts drawn uniformly (with replacement) from the
/// world, greedily (argmax, lowest index on ties) or by sampling. Diagonal cells are absent.
WinMatrix win_matrix(std::span<const NamedPolicy> policies, const SyntheticWorld& world,
                     std::size_t n_prompts_eval, JudgeMode mode, std::uint64_t seed);

/// One JSON object per line.
void write_reports_jsonl(std::span<const AgreementReport> agreement,
                         std::span<const PessimisticMarginReport> pessimistic,
                         const std::filesystem::path& path);

/// CSV with one row per matrix cell: row,column,win_rate,strict_win_rate,tie_rate.
void write_win_matrix_csv(const WinMatrix& matrix, const std::filesystem::path& path);

}  // namespace hypo
