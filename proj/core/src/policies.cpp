// SPDX-License-Identifier: Apache-2.0
#include "hypo/policies.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hypo/errors.hpp"
#include "hypo/random.hpp"

namespace hypo {
namespace {

void check_vocabulary(std::size_t n_prompts, std::size_t n_responses) {
  if (n_prompts == 0 || n_prompts > kMaxVocabulary) {
    throw ParameterError("prompt vocabulary must hold 1.." + std::to_string(kMaxVocabulary) +
                         " entries, got " + std::to_string(n_prompts));
  }
  if (n_responses == 0 || n_responses > kMaxVocabulary) {
    throw ParameterError("response vocabulary must hold 1.." + std::to_string(kMaxVocabulary) +
                         " entries, got " + std::to_string(n_responses));
  }
}

// Log-softmax of `scores` in place.
void log_normalize(std::span<double> scores) {
  const double top = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - top);
  const double log_z = top + std::log(sum);
  for (double& s : scores) s -= log_z;
}

}  // namespace

std::string_view to_string(PolicyClass cls) {
  return cls == PolicyClass::Tabular ? "tabular" : "loglinear";
}

PolicyClass parse_policy_class(std::string_view name) {
  if (name == "tabular") return PolicyClass::Tabular;
  if (name == "loglinear") return PolicyClass::LogLinear;
  throw ParameterError("unknown policy class '" + std::string(name) +
                       "'; valid classes: tabular, loglinear");
}

// ---------------------------------------------------------------------------
// Policy

Policy::Policy(std::size_t n_prompts, std::size_t n_responses)
    : n_prompts_(n_prompts), n_responses_(n_responses) {
  check_vocabulary(n_prompts, n_responses);
}

void Policy::check_index(std::size_t prompt, std::size_t response) const {
  if (prompt >= n_prompts_) {
    throw LookupError("prompt id " + std::to_string(prompt) + " outside vocabulary of " +
                      std::to_string(n_prompts_));
  }
  if (response >= n_responses_) {
    throw LookupError("response id " + std::to_string(response) + " outside vocabulary of " +
                      std::to_string(n_responses_));
  }
}

void Policy::check_pair(std::size_t prompt, std::size_t chosen, std::size_t rejected) const {
  check_index(prompt, chosen);
  check_index(prompt, rejected);
  if (chosen == rejected) {
    throw ArgumentError("chosen and rejected response are both " + std::to_string(chosen));
  }
}

std::vector<double> Policy::log_probs(std::size_t prompt) const {
  check_index(prompt, 0);
  std::vector<double> out(n_responses_);
  for (std::size_t y = 0; y < n_responses_; ++y) out[y] = score(prompt, y);
  log_normalize(out);
  return out;
}

double Policy::log_prob(std::size_t prompt, std::size_t response) const {
  check_index(prompt, response);
  return log_probs(prompt)[response];
}

double Policy::policy_margin(std::size_t prompt, std::size_t chosen, std::size_t rejected) const {
  check_pair(prompt, chosen, rejected);
  return score(prompt, chosen) - score(prompt, rejected);
}

GradientVector Policy::margin_gradient(std::size_t prompt, std::size_t chosen,
                                       std::size_t rejected) const {
  GradientVector g{std::vector<double>(n_parameters(), 0.0)};
  accumulate_margin_gradient(prompt, chosen, rejected, 1.0, g.values);
  return g;
}

// ---------------------------------------------------------------------------
// TabularPolicy

TabularPolicy::TabularPolicy(Matrix logits)
    : Policy(logits.rows(), logits.cols()), logits_(std::move(logits)) {
  for (double v : logits_.data()) {
    if (!std::isfinite(v)) throw DomainError("tabular logits must be finite");
  }
}

TabularPolicy TabularPolicy::uniform(std::size_t n_prompts, std::size_t n_responses) {
  return TabularPolicy(Matrix(n_prompts, n_responses, 0.0));
}

std::unique_ptr<Policy> TabularPolicy::clone() const {
  return std::make_unique<TabularPolicy>(*this);
}

double TabularPolicy::score(std::size_t prompt, std::size_t response) const {
  check_index(prompt, response);
  return logits_(prompt, response);
}

void TabularPolicy::accumulate_margin_gradient(std::size_t prompt, std::size_t chosen,
                                               std::size_t rejected, double scale,
                                               std::span<double> grad) const {
  check_pair(prompt, chosen, rejected);
  grad[prompt * n_responses() + chosen] += scale;
  grad[prompt * n_responses() + rejected] -= scale;
}

void TabularPolicy::accumulate_log_prob_gradient(std::size_t prompt, std::size_t response,
                                                 double scale, std::span<double> grad) const {
  const std::vector<double> lp = log_probs(prompt);
  check_index(prompt, response);
  const std::size_t base = prompt * n_responses();
  for (std::size_t y = 0; y < n_responses(); ++y) {
    grad[base + y] -= scale * std::exp(lp[y]);
  }
  grad[base + response] += scale;
}

// ---------------------------------------------------------------------------
// FeatureMap / LogLinearPolicy

FeatureMap::FeatureMap(std::size_t n_prompts, std::size_t n_responses, std::size_t dim,
                       std::uint64_t seed)
    : n_prompts_(n_prompts), n_responses_(n_responses), dim_(dim), seed_(seed) {
  check_vocabulary(n_prompts, n_responses);
  if (dim == 0) throw ParameterError("feature dimension must be >= 1");
  Rng rng = make_rng(seed, Stream::Features);
  std::normal_distribution<double> normal(0.0, 1.0);
  table_.resize(n_prompts * n_responses * dim);
  for (double& v : table_) v = normal(rng);
}

std::span<const double> FeatureMap::features(std::size_t prompt, std::size_t response) const {
  return {table_.data() + (prompt * n_responses_ + response) * dim_, dim_};
}

LogLinearPolicy::LogLinearPolicy(std::shared_ptr<const FeatureMap> features,
                                 std::vector<double> theta)
    : Policy(features ? features->n_prompts() : 0, features ? features->n_responses() : 0),
      features_(std::move(features)),
      theta_(std::move(theta)) {
  if (theta_.size() != features_->dim()) {
    throw ParameterError("theta has " + std::to_string(theta_.size()) +
                         " entries but features have dimension " +
                         std::to_string(features_->dim()));
  }
  for (double v : theta_) {
    if (!std::isfinite(v)) throw DomainError("log-linear parameters must be finite");
  }
}

LogLinearPolicy::LogLinearPolicy(std::shared_ptr<const FeatureMap> features)
    : LogLinearPolicy(features, std::vector<double>(features ? features->dim() : 0, 0.0)) {}

std::unique_ptr<Policy> LogLinearPolicy::clone() const {
  return std::make_unique<LogLinearPolicy>(*this);
}

double LogLinearPolicy::score(std::size_t prompt, std::size_t response) const {
  check_index(prompt, response);
  const auto phi = features_->features(prompt, response);
  double s = 0.0;
  for (std::size_t k = 0; k < theta_.size(); ++k) s += theta_[k] * phi[k];
  return s;
}

void LogLinearPolicy::accumulate_margin_gradient(std::size_t prompt, std::size_t chosen,
                                                 std::size_t rejected, double scale,
                                                 std::span<double> grad) const {
  check_pair(prompt, chosen, rejected);
  const auto plus = features_->features(prompt, chosen);
  const auto minus = features_->features(prompt, rejected);
  for (std::size_t k = 0; k < theta_.size(); ++k) grad[k] += scale * (plus[k] - minus[k]);
}

void LogLinearPolicy::accumulate_log_prob_gradient(std::size_t prompt, std::size_t response,
                                                   double scale, std::span<double> grad) const {
  const std::vector<double> lp = log_probs(prompt);
  check_index(prompt, response);
  const auto target = features_->features(prompt, response);
  for (std::size_t k = 0; k < theta_.size(); ++k) grad[k] += scale * target[k];
  for (std::size_t y = 0; y < n_responses(); ++y) {
    const double p = std::exp(lp[y]);
    const auto phi = features_->features(prompt, y);
    for (std::size_t k = 0; k < theta_.size(); ++k) grad[k] -= scale * p * phi[k];
  }
}

// ---------------------------------------------------------------------------

GradientVector finite_diff_gradient(const std::function<double(const Policy&)>& f,
                                    const Policy& policy, double step) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw ParameterError("finite difference step must be finite and > 0");
  }
  std::unique_ptr<Policy> probe = policy.clone();
  auto params = probe->parameters();
  GradientVector g{std::vector<double>(params.size(), 0.0)};
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double original = params[i];
    params[i] = original + step;
    const double up = f(*probe);
    params[i] = original - step;
    const double down = f(*probe);
    params[i] = original;
    g.values[i] = (up - down) / (2.0 * step);
  }
  return g;
}

TabularPolicy gibbs_optimum(const TabularPolicy& ref, const Matrix& reward, double tau) {
  if (!std::isfinite(tau) || tau <= 0.0) throw ParameterError("tau must be finite and > 0");
  if (reward.rows() != ref.n_prompts() || reward.cols() != ref.n_responses()) {
    throw ParameterError("reward shape does not match the reference vocabulary");
  }
  Matrix logits(ref.n_prompts(), ref.n_responses());
  for (std::size_t x = 0; x < ref.n_prompts(); ++x) {
    const std::vector<double> lp = ref.log_probs(x);
    auto row = logits.row(x);
    for (std::size_t y = 0; y < ref.n_responses(); ++y) {
      if (!std::isfinite(reward(x, y))) throw DomainError("reward entries must be finite");
      row[y] = lp[y] + reward(x, y) / tau;
    }
    log_normalize(row);
  }
  return TabularPolicy(std::move(logits));
}

}  // namespace hypo
