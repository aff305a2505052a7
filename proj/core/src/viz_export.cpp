// SPDX-License-Identifier: Apache-2.0
#include "hypo/viz_export.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include "hypo/errors.hpp"
#include "hypo/metrics.hpp"

namespace hypo {
namespace {

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

std::optional<double> metric_value(const RunLogEntry& e, const std::string& metric) {
  if (metric == "learning_rate") return e.learning_rate;
  if (metric == "train_loss") return e.train_loss;
  if (metric == "agreement_rate") return e.agreement_rate;
  if (metric == "pessimistic_margin") return e.pessimistic_margin;
  if (metric == "wall_time") return e.wall_time;
  throw ArgumentError("unknown curve metric '" + metric + "'");
}

}  // namespace

std::string format_csv_number(double value) {
  std::ostringstream os;
  os << std::setprecision(10) << value;
  return os.str();
}

double AxisSpec::at(std::size_t i) const {
  return lo + static_cast<double>(i) * (hi - lo) / static_cast<double>(n_steps - 1);
}

void GridSpec::validate() const {
  for (const AxisSpec* axis : {&theta_range, &ref_range}) {
    if (!std::isfinite(axis->lo) || !std::isfinite(axis->hi) || !(axis->lo < axis->hi)) {
      throw ParameterError("grid axis needs finite lo < hi");
    }
    if (axis->n_steps < 2) throw ParameterError("grid axis needs n_steps >= 2");
  }
}

Matrix weight_heatmap(ObjectiveKind kind, const HyperParams& hp, const GridSpec& grid) {
  grid.validate();
  hp.validate();
  const auto logp = kind == ObjectiveKind::DPOPlusSFT ? std::optional<double>(0.0) : std::nullopt;
  Matrix out(grid.theta_range.n_steps, grid.ref_range.n_steps);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const double theta = grid.theta_range.at(i);
    for (std::size_t j = 0; j < out.cols(); ++j) {
      out(i, j) = evaluate(kind, MarginPair{theta, grid.ref_range.at(j)}, logp, hp).weight;
    }
  }
  return out;
}

void export_heatmap_csv(const Matrix& weights, const GridSpec& grid,
                        const std::filesystem::path& path) {
  grid.validate();
  if (weights.rows() != grid.theta_range.n_steps || weights.cols() != grid.ref_range.n_steps) {
    throw ArgumentError("heatmap matrix shape does not match the grid");
  }
  std::ofstream out = open_output(path);
  out << "delta_theta\\delta_ref";
  for (std::size_t j = 0; j < weights.cols(); ++j) {
    out << ',' << format_csv_number(grid.ref_range.at(j));
  }
  out << '\n';
  for (std::size_t i = 0; i < weights.rows(); ++i) {
    out << format_csv_number(grid.theta_range.at(i));
    for (std::size_t j = 0; j < weights.cols(); ++j) {
      out << ',' << format_csv_number(weights(i, j));
    }
    out << '\n';
  }
  finish(out, path);
}

std::vector<std::string> default_curve_metrics() {
  return {"learning_rate", "train_loss", "agreement_rate", "pessimistic_margin"};
}

void export_curves(std::span<const NamedRunLog> runs, const std::filesystem::path& path) {
  const auto metrics = default_curve_metrics();
  export_curves(runs, path, metrics);
}

void export_curves(std::span<const NamedRunLog> runs, const std::filesystem::path& path,
                   std::span<const std::string> metrics) {
  if (runs.empty()) throw ArgumentError("export_curves needs at least one run");
  for (const auto& run : runs) {
    if (run.log == nullptr || run.log->empty()) {
      throw ArgumentError("run '" + run.run_name + "' has an empty log");
    }
  }
  std::ofstream out = open_output(path);
  out << "run_name,step,metric,value\n";
  for (const auto& run : runs) {
    for (const auto& entry : run.log->entries()) {
      for (const auto& metric : metrics) {
        const auto value = metric_value(entry, metric);
        if (!value) continue;
        out << run.run_name << ',' << entry.step << ',' << metric << ','
            << format_csv_number(*value) << '\n';
      }
    }
  }
  finish(out, path);
}

void export_margin_histogram(const Policy& ref, const PreferenceDataset& dataset,
                             std::size_t n_bins, const std::filesystem::path& path) {
  if (n_bins < 1) throw ParameterError("n_bins must be >= 1");
  const RefMarginStats stats = ref_margin_stats(ref, dataset);
  const std::vector<double> margins = ref_margins(ref, dataset);

  auto [min_it, max_it] = std::minmax_element(margins.begin(), margins.end());
  double lo = *min_it;
  double hi = *max_it;
  if (lo == hi) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double width = (hi - lo) / static_cast<double>(n_bins);
  std::vector<std::size_t> counts(n_bins, 0);
  for (double m : margins) {
    auto bin = static_cast<std::size_t>((m - lo) / width);
    counts[std::min(bin, n_bins - 1)] += 1;
  }

  std::ofstream out = open_output(path);
  out << "bin_left,bin_right,count\n";
  for (std::size_t b = 0; b < n_bins; ++b) {
    const double left = lo + static_cast<double>(b) * width;
    const double right = b + 1 == n_bins ? hi : lo + static_cast<double>(b + 1) * width;
    out << format_csv_number(left) << ',' << format_csv_number(right) << ',' << counts[b]
        << '\n';
  }
  out << "#stat,mean," << format_csv_number(stats.mean) << '\n';
  out << "#stat,median," << format_csv_number(stats.median) << '\n';
  out << "#stat,fraction_pessimistic," << format_csv_number(stats.fraction_pessimistic) << '\n';
  finish(out, path);
}

}  // namespace hypo
