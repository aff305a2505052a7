// SPDX-License-Identifier: Apache-2.0
//
// The logistic pairwise objective family. Every member evaluates
//
//   loss   = log(1 + exp(-beta * a)),   weight = sigmoid(-beta * a)
//
// for a member-specific argument `a`, so d(loss)/d(delta_theta) = -beta * weight.
//
//   DPO         a = delta_theta - delta_ref - h
//   RefFree     a = delta_theta - h
//   HyPOHard    a = delta_theta - max(delta_ref, gamma) - h
//   HyPOSoft    a = delta_theta - softclip(delta_ref, gamma, alpha) - h
//   DPOPlusSFT  DPO plus lambda_sft * (-log pi(chosen | prompt))
//
// h defaults to 0 everywhere; non-HyPO members honour it only when configured.
#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hypo/core_math.hpp"

namespace hypo {

enum class ObjectiveKind { DPO, RefFree, HyPOHard, HyPOSoft, DPOPlusSFT };

std::string_view to_string(ObjectiveKind kind);

/// Accepts dpo, ref_free, hypo_hard, hypo_soft, dpo_sft (case-sensitive).
/// Throws ParameterError listing the valid names otherwise.
ObjectiveKind parse_objective_kind(std::string_view name);

/// Comma-separated list of every name accepted by parse_objective_kind.
std::string valid_objective_names();

struct LossEval {
  double loss = 0.0;
  /// w = -(1/beta) d(loss)/d(delta_theta). For DPOPlusSFT this is the logistic part only.
  double weight = 0.0;
  /// The reference margin actually subtracted (clipped/smoothed for HyPO, 0 for RefFree).
  double effective_ref_margin = 0.0;
};

LossEval dpo_loss(const MarginPair& pair, const HyperParams& hp);
LossEval absolute_loss(double delta_theta, const HyperParams& hp);
LossEval hypo_loss(const MarginPair& pair, const HyperParams& hp, bool hard);

/// `logp_chosen` is log pi_theta(chosen | prompt) and must be <= 0.
LossEval dpo_plus_sft_loss(const MarginPair& pair, double logp_chosen, const HyperParams& hp);

/// e^{-z}; bounds the DPO weight sigmoid(-z) from above for z >= 0.
double attenuation_bound(double z);

/// Dispatches to the member loss. `logp_chosen` must be present iff kind is DPOPlusSFT.
LossEval evaluate(ObjectiveKind kind, const MarginPair& pair, std::optional<double> logp_chosen,
                  const HyperParams& hp);

/// Arithmetic mean of per-example losses. `logp_chosen` is consulted only for DPOPlusSFT
/// and must then match `pairs` in length.
double batch_loss(ObjectiveKind kind, std::span<const MarginPair> pairs,
                  std::span<const double> logp_chosen, const HyperParams& hp);

}  // namespace hypo
