// SPDX-License-Identifier: Apache-2.0
#include "hypo/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "hypo/errors.hpp"
#include "hypo/metrics.hpp"
#include "hypo/random.hpp"

namespace hypo {
namespace {

bool all_finite(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

double total_weight(std::span<const PreferenceRecord> records) {
  double total = 0.0;
  for (const auto& r : records) total += r.weight;
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw ArgumentError("batch has no positive total weight");
  }
  return total;
}

void check_alignment(std::span<const PreferenceRecord> records,
                     std::span<const double> ref_margins) {
  if (records.size() != ref_margins.size()) {
    throw ArgumentError("ref_margins must align with records");
  }
}

}  // namespace

void TrainConfig::validate() const {
  hp.validate();
  if (objective == ObjectiveKind::HyPOSoft && !hp.alpha) {
    throw ParameterError("hypo_soft requires alpha (or tau)");
  }
  if (!std::isfinite(peak_lr) || peak_lr < 0.0) throw ParameterError("peak_lr must be >= 0");
  if (epochs < 1) throw ParameterError("epochs must be >= 1");
  if (batch_size < 1) throw ParameterError("batch_size must be >= 1");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0)) {
    throw ParameterError("warmup_fraction must lie in [0, 1)");
  }
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ParameterError("adam_beta1 out of [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ParameterError("adam_beta2 out of [0, 1)");
  if (!(adam_epsilon > 0.0) || !std::isfinite(adam_epsilon)) {
    throw ParameterError("adam_epsilon must be > 0");
  }
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ParameterError("weight_decay must be >= 0");
  }
  if (grad_clip && (!(*grad_clip > 0.0) || !std::isfinite(*grad_clip))) {
    throw ParameterError("grad_clip must be > 0 when set");
  }
  if (eval_every < 1) throw ParameterError("eval_every must be >= 1");
}

void RunLog::append(const RunLogEntry& entry) {
  if (!entries_.empty() && entry.step <= entries_.back().step) {
    throw ArgumentError("run log steps must strictly increase");
  }
  entries_.push_back(entry);
}

std::size_t warmup_steps(std::size_t total_steps, double warmup_fraction) {
  if (total_steps == 0 || warmup_fraction <= 0.0) return 0;
  // The small offset keeps products like 0.1 * 70 = 7.000000000000001 from rounding up.
  const auto raw = static_cast<std::size_t>(
      std::ceil(warmup_fraction * static_cast<double>(total_steps) - 1e-9));
  return std::min(raw, total_steps - 1);
}

double lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& config) {
  if (total_steps == 0) throw ArgumentError("lr_at needs total_steps >= 1");
  if (step > total_steps) {
    throw ArgumentError("step " + std::to_string(step) + " beyond total_steps " +
                        std::to_string(total_steps));
  }
  const std::size_t warmup = warmup_steps(total_steps, config.warmup_fraction);
  if (step < warmup) {
    return config.peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
  }
  const double progress =
      static_cast<double>(step - warmup) / static_cast<double>(total_steps - warmup);
  return config.peak_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, const TrainConfig& config) {
  if (params.size() != grads.size() || state.first_moment.size() != params.size() ||
      state.second_moment.size() != params.size()) {
    throw ArgumentError("adam_step shape mismatch");
  }
  if (!all_finite(grads)) {
    throw TrainingError(state.step + 1, {}, "non-finite gradient in adam_step");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double bias1 = 1.0 - std::pow(b1, t);
  const double bias2 = 1.0 - std::pow(b2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    const double m_hat = m / bias1;
    const double v_hat = v / bias2;
    params[i] -= lr * config.weight_decay * params[i];
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + config.adam_epsilon);
  }
}

double batch_objective_loss(const Policy& policy, std::span<const PreferenceRecord> records,
                            std::span<const double> ref_margins, ObjectiveKind kind,
                            const HyperParams& hp) {
  check_alignment(records, ref_margins);
  const double total = total_weight(records);
  const bool sft = kind == ObjectiveKind::DPOPlusSFT;
  double loss = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const MarginPair pair{policy.policy_margin(r.prompt_id, r.chosen_id, r.rejected_id),
                          ref_margins[i]};
    const auto logp =
        sft ? std::optional<double>(policy.log_prob(r.prompt_id, r.chosen_id)) : std::nullopt;
    loss += r.weight * evaluate(kind, pair, logp, hp).loss;
  }
  return loss / total;
}

ObjectiveValue batch_objective(const Policy& policy, std::span<const PreferenceRecord> records,
                               std::span<const double> ref_margins, ObjectiveKind kind,
                               const HyperParams& hp) {
  check_alignment(records, ref_margins);
  const double total = total_weight(records);
  const bool sft = kind == ObjectiveKind::DPOPlusSFT;
  ObjectiveValue out{0.0, std::vector<double>(policy.n_parameters(), 0.0)};
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const MarginPair pair{policy.policy_margin(r.prompt_id, r.chosen_id, r.rejected_id),
                          ref_margins[i]};
    const auto logp =
        sft ? std::optional<double>(policy.log_prob(r.prompt_id, r.chosen_id)) : std::nullopt;
    const LossEval eval = evaluate(kind, pair, logp, hp);
    const double share = r.weight / total;
    out.loss += r.weight * eval.loss;
    // d(loss)/d(delta_theta) = -beta * w, chained through d(delta_theta)/d(params).
    policy.accumulate_margin_gradient(r.prompt_id, r.chosen_id, r.rejected_id,
                                      -hp.beta * eval.weight * share, out.gradient);
    if (sft && hp.lambda_sft != 0.0) {
      policy.accumulate_log_prob_gradient(r.prompt_id, r.chosen_id, -hp.lambda_sft * share,
                                          out.gradient);
    }
  }
  out.loss /= total;
  return out;
}

TrainResult train(const Policy& initial, const Policy& ref, const PreferenceDataset& train_set,
                  const PreferenceDataset& eval_set, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.empty()) throw ArgumentError("training set is empty");
  if (eval_set.empty()) throw ArgumentError("eval set is empty");
  if (initial.n_prompts() != ref.n_prompts() || initial.n_responses() != ref.n_responses()) {
    throw ArgumentError("policy and reference vocabularies differ");
  }

  const auto clock_start = std::chrono::steady_clock::now();
  TrainResult result;
  result.policy = initial.clone();
  Policy& policy = *result.policy;

  const std::vector<double> cached_margins = ref_margins(ref, train_set);
  const std::size_t n = train_set.size();
  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const std::size_t total_steps = steps_per_epoch * config.epochs;
  result.total_steps = total_steps;

  auto log_point = [&](std::size_t step) {
    RunLogEntry entry;
    entry.step = step;
    entry.learning_rate = lr_at(step, total_steps, config);
    entry.train_loss =
        batch_objective_loss(policy, train_set.records, cached_margins, config.objective,
                             config.hp);
    entry.agreement_rate = agreement_rate(policy, eval_set, step).agree_rate;
    const auto pess = pessimistic_margin(policy, eval_set, step);
    entry.pessimistic_margin = pess.mean_margin;
    entry.pessimistic_subset_size = pess.subset_size;
    if (config.record_wall_time) {
      entry.wall_time =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
    }
    result.log.append(entry);
  };

  log_point(0);

  Rng shuffle_rng = make_rng(config.seed, Stream::Shuffle);
  std::vector<std::size_t> order(n);
  AdamState adam(policy.n_parameters());
  std::vector<PreferenceRecord> batch;
  std::vector<double> batch_margins;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    for (std::size_t start = 0; start < n; start += config.batch_size) {
      ++step;
      const std::size_t stop = std::min(n, start + config.batch_size);
      batch.clear();
      batch_margins.clear();
      for (std::size_t k = start; k < stop; ++k) {
        const auto& rec = train_set.records[order[k]];
        batch.push_back(rec);
        batch_margins.push_back(config.recompute_ref_margins
                                    ? ref.policy_margin(rec.prompt_id, rec.chosen_id,
                                                        rec.rejected_id)
                                    : cached_margins[order[k]]);
      }

      ObjectiveValue value;
      try {
        value = batch_objective(policy, batch, batch_margins, config.objective, config.hp);
      } catch (const DomainError& e) {
        throw TrainingError(step, {order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(stop)},
                            "step " + std::to_string(step) + ": " + e.what());
      }
      if (!std::isfinite(value.loss) || !all_finite(value.gradient)) {
        throw TrainingError(step, {order.begin() + static_cast<std::ptrdiff_t>(start),
                                   order.begin() + static_cast<std::ptrdiff_t>(stop)},
                            "non-finite loss or gradient at step " + std::to_string(step));
      }

      if (config.grad_clip) {
        double sq = 0.0;
        for (double g : value.gradient) sq += g * g;
        const double norm = std::sqrt(sq);
        if (norm > *config.grad_clip) {
          const double factor = *config.grad_clip / norm;
          for (double& g : value.gradient) g *= factor;
        }
      }

      adam_step(policy.parameters(), value.gradient, adam, lr_at(step, total_steps, config),
                config);
      if (!all_finite(policy.parameters())) {
        throw TrainingError(step, {}, "parameters became non-finite at step " +
                                          std::to_string(step));
      }

      if (step % config.eval_every == 0 || step == total_steps) log_point(step);
    }
    if (on_epoch) on_epoch(epoch, policy);
  }
  return result;
}

}  // namespace hypo
