// SPDX-License-Identifier: Apache-2.0
//
// Deterministic mini-batch training: shuffled batches, a warmup + cosine learning rate,
// and bias-corrected adaptive-moment updates with decoupled weight decay.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "hypo/datagen.hpp"
#include "hypo/objectives.hpp"
#include "hypo/policies.hpp"

namespace hypo {

struct TrainConfig {
  ObjectiveKind objective = ObjectiveKind::DPO;
  HyperParams hp;
  double peak_lr = 1e-2;
  std::size_t epochs = 1;
  std::size_t batch_size = 128;
  double warmup_fraction = 0.10;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double weight_decay = 0.0;
  /// Global-norm gradient clip; absent disables clipping.
  std::optional<double> grad_clip;
  std::uint64_t seed = 0;
  std::size_t eval_every = 10;
  /// Recompute reference margins from the reference policy each step instead of using the
  /// dataset cache. Results are bit-identical either way.
  bool recompute_ref_margins = false;
  /// Wall time breaks byte-stability of run logs, so it is opt-in.
  bool record_wall_time = false;

  void validate() const;
};

/// One evaluation point of a run.
struct RunLogEntry {
  std::size_t step = 0;
  double learning_rate = 0.0;
  /// Weighted mean objective loss over the whole training split at this step.
  double train_loss = 0.0;
  double agreement_rate = 0.0;
  /// Mean policy margin over the eval pairs with negative reference margin; absent when
  /// that subset is empty.
  std::optional<double> pessimistic_margin;
  std::size_t pessimistic_subset_size = 0;
  double wall_time = 0.0;
};

/// Append-only; steps strictly increase.
class RunLog {
 public:
  void append(const RunLogEntry& entry);
  const std::vector<RunLogEntry>& entries() const noexcept { return entries_; }
  bool empty() const noexcept { return entries_.empty(); }
  const RunLogEntry& back() const { return entries_.back(); }

 private:
  std::vector<RunLogEntry> entries_;
};

/// Number of warmup steps for a run of `total_steps`: ceil(fraction * total), capped at
/// total - 1 so the decay phase is never empty.
std::size_t warmup_steps(std::size_t total_steps, double warmup_fraction);

/// Linear ramp 0 -> peak over the warmup steps, then peak * (1 + cos(pi * progress)) / 2
/// down to exactly 0 at total_steps. Throws ArgumentError when step > total_steps.
double lr_at(std::size_t step, std::size_t total_steps, const TrainConfig& config);

struct AdamState {
  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::size_t step = 0;

  explicit AdamState(std::size_t n = 0) : first_moment(n, 0.0), second_moment(n, 0.0) {}
};

/// One bias-corrected adaptive-moment update of `params` in place.
/// Throws TrainingError on non-finite gradients.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state,
               double lr, const TrainConfig& config);

struct ObjectiveValue {
  double loss = 0.0;
  std::vector<double> gradient;
};

/// Weighted mean loss of `records` and its analytic gradient with respect to the policy
/// parameters. `ref_margins` aligns with `records`.
ObjectiveValue batch_objective(const Policy& policy, std::span<const PreferenceRecord> records,
                               std::span<const double> ref_margins, ObjectiveKind kind,
                               const HyperParams& hp);

/// Loss only; used as the finite-difference target for batch_objective.
double batch_objective_loss(const Policy& policy, std::span<const PreferenceRecord> records,
                            std::span<const double> ref_margins, ObjectiveKind kind,
                            const HyperParams& hp);

struct TrainResult {
  std::unique_ptr<Policy> policy;
  RunLog log;
  std::size_t total_steps = 0;
};

/// Invoked after every epoch with the 1-based epoch index and the current policy.
using EpochCallback = std::function<void(std::size_t epoch, const Policy& policy)>;

/// ceil(n / batch_size) * epochs updates on the weighted mean batch loss. Metrics are logged at
/// step 0, every eval_every steps, and at the final step.
TrainResult train(const Policy& initial, const Policy& ref, const PreferenceDataset& train_set,
                  const PreferenceDataset& eval_set, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace hypo
