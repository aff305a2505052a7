// SPDX-License-Identifier: Apache-2.0
//
// Plain-data exports of the diagnostic surfaces: gradient-weight heatmaps over
// (policy margin, reference margin), long-format training curves, and reference-margin
// histograms. Every file is UTF-8 CSV with a mandatory header row and is byte-stable for
// identical inputs.
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hypo/datagen.hpp"
#include "hypo/matrix.hpp"
#include "hypo/objectives.hpp"
#include "hypo/policies.hpp"
#include "hypo/trainer.hpp"

namespace hypo {

struct AxisSpec {
  double lo = -6.0;
  double hi = 6.0;
  std::size_t n_steps = 121;

  /// lo + i * (hi - lo) / (n_steps - 1).
  double at(std::size_t i) const;
};

struct GridSpec {
  AxisSpec theta_range;
  AxisSpec ref_range;

  void validate() const;
};

/// Rows follow the policy margin, columns the reference margin. Every cell delegates to
/// objectives::evaluate; DPOPlusSFT cells use log p(chosen) = 0 (the weight ignores it).
Matrix weight_heatmap(ObjectiveKind kind, const HyperParams& hp, const GridSpec& grid);

/// First row carries the reference-margin axis, first column the policy-margin axis.
void export_heatmap_csv(const Matrix& weights, const GridSpec& grid,
                        const std::filesystem::path& path);

struct NamedRunLog {
  std::string run_name;
  const RunLog* log = nullptr;
};

/// Metrics exported by default, in column order.
std::vector<std::string> default_curve_metrics();

/// Long format: run_name,step,metric,value. Absent values (empty pessimistic subset) are
/// skipped. Accepted metric names: learning_rate, train_loss, agreement_rate,
/// pessimistic_margin, wall_time.
void export_curves(std::span<const NamedRunLog> runs, const std::filesystem::path& path,
                   std::span<const std::string> metrics);
void export_curves(std::span<const NamedRunLog> runs, const std::filesystem::path& path);

/// bin_left,bin_right,count over the reference margins of `dataset` under `ref`, followed by
/// `#stat,<name>,<value>` footer rows for mean, median and fraction_pessimistic.
void export_margin_histogram(const Policy& ref, const PreferenceDataset& dataset,
                             std::size_t n_bins, const std::filesystem::path& path);

/// Formats with 10 significant digits; used by every CSV writer here.
std::string format_csv_number(double value);

}  // namespace hypo
