// SPDX-License-Identifier: Apache-2.0
#include "hypo/objectives.hpp"

#include <array>
#include <cmath>
#include <string>
#include <utility>

#include "hypo/errors.hpp"

namespace hypo {
namespace {

constexpr std::array<std::pair<std::string_view, ObjectiveKind>, 5> kKindNames{{
    {"dpo", ObjectiveKind::DPO},
    {"ref_free", ObjectiveKind::RefFree},
    {"hypo_hard", ObjectiveKind::HyPOHard},
    {"hypo_soft", ObjectiveKind::HyPOSoft},
    {"dpo_sft", ObjectiveKind::DPOPlusSFT},
}};

// Shared tail of every member: the argument is already offset by the effective reference
// margin and h, so identical arguments give bit-identical results across members.
LossEval logistic(double argument, double beta, double effective_ref_margin) {
  const double scaled = beta * argument;
  return LossEval{stable_log1pexp(-scaled), stable_sigmoid(-scaled), effective_ref_margin};
}

void check_inputs(const MarginPair& pair, const HyperParams& hp) {
  hp.validate();
  require_finite(pair);
}

}  // namespace

std::string_view to_string(ObjectiveKind kind) {
  for (const auto& [name, k] : kKindNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

std::string valid_objective_names() {
  std::string out;
  for (const auto& [name, kind] : kKindNames) {
    if (!out.empty()) out += ", ";
    out += name;
  }
  return out;
}

ObjectiveKind parse_objective_kind(std::string_view name) {
  for (const auto& [n, kind] : kKindNames) {
    if (n == name) return kind;
  }
  throw ParameterError("unknown objective '" + std::string(name) +
                       "'; valid kinds: " + valid_objective_names());
}

LossEval dpo_loss(const MarginPair& pair, const HyperParams& hp) {
  check_inputs(pair, hp);
  return logistic(pair.delta_theta - pair.delta_ref - hp.h, hp.beta, pair.delta_ref);
}

LossEval absolute_loss(double delta_theta, const HyperParams& hp) {
  hp.validate();
  require_finite(delta_theta, "delta_theta");
  return logistic(delta_theta - 0.0 - hp.h, hp.beta, 0.0);
}

LossEval hypo_loss(const MarginPair& pair, const HyperParams& hp, bool hard) {
  check_inputs(pair, hp);
  double effective;
  if (hard) {
    effective = clip_ref_margin(pair.delta_ref, hp.gamma);
  } else {
    if (!hp.alpha) throw ParameterError("soft HyPO requires alpha (or tau) to be set");
    effective = smooth_ref_margin(pair.delta_ref, hp.gamma, *hp.alpha);
  }
  return logistic(pair.delta_theta - effective - hp.h, hp.beta, effective);
}

LossEval dpo_plus_sft_loss(const MarginPair& pair, double logp_chosen, const HyperParams& hp) {
  require_finite(logp_chosen, "logp_chosen");
  if (logp_chosen > 0.0) {
    throw DomainError("logp_chosen must be <= 0, got " + std::to_string(logp_chosen));
  }
  LossEval eval = dpo_loss(pair, hp);
  eval.loss += hp.lambda_sft * -logp_chosen;
  return eval;
}

double attenuation_bound(double z) { return std::exp(-z); }

LossEval evaluate(ObjectiveKind kind, const MarginPair& pair, std::optional<double> logp_chosen,
                  const HyperParams& hp) {
  const bool needs_logp = kind == ObjectiveKind::DPOPlusSFT;
  if (needs_logp != logp_chosen.has_value()) {
    throw ParameterError(needs_logp ? "dpo_sft requires logp_chosen"
                                    : "logp_chosen is only accepted by dpo_sft");
  }
  switch (kind) {
    case ObjectiveKind::DPO:
      return dpo_loss(pair, hp);
    case ObjectiveKind::RefFree:
      require_finite(pair.delta_ref, "delta_ref");
      return absolute_loss(pair.delta_theta, hp);
    case ObjectiveKind::HyPOHard:
      return hypo_loss(pair, hp, true);
    case ObjectiveKind::HyPOSoft:
      return hypo_loss(pair, hp, false);
    case ObjectiveKind::DPOPlusSFT:
      return dpo_plus_sft_loss(pair, *logp_chosen, hp);
  }
  throw ParameterError("unhandled objective kind");
}

double batch_loss(ObjectiveKind kind, std::span<const MarginPair> pairs,
                  std::span<const double> logp_chosen, const HyperParams& hp) {
  if (pairs.empty()) throw ArgumentError("batch_loss on an empty batch");
  const bool sft = kind == ObjectiveKind::DPOPlusSFT;
  if (sft && logp_chosen.size() != pairs.size()) {
    throw ArgumentError("dpo_sft batch needs one logp_chosen per pair");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto logp = sft ? std::optional<double>(logp_chosen[i]) : std::nullopt;
    sum += evaluate(kind, pairs[i], logp, hp).loss;
  }
  return sum / static_cast<double>(pairs.size());
}

}  // namespace hypo
