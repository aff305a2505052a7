// SPDX-License-Identifier: Apache-2.0
//
// Differentiable categorical policies pi(y | x) over small prompt/response vocabularies.
// A response is a single categorical draw, so sequence log-likelihood margins reduce to
// differences of log-softmax entries.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "hypo/matrix.hpp"

namespace hypo {

/// Vocabulary cap for both prompts and responses; keeps exhaustive oracles tractable.
inline constexpr std::size_t kMaxVocabulary = 64;

enum class PolicyClass { Tabular, LogLinear };

std::string_view to_string(PolicyClass cls);
PolicyClass parse_policy_class(std::string_view name);

struct GradientVector {
  std::vector<double> values;
};

/// Common interface of the toy policy classes.
///
/// A policy assigns each (prompt, response) an unnormalized score; log_prob is the
/// log-softmax of the scores over the prompt's responses. Because the partition function
/// cancels, policy_margin is a plain score difference.
class Policy {
 public:
  virtual ~Policy() = default;

  virtual PolicyClass policy_class() const = 0;
  virtual std::unique_ptr<Policy> clone() const = 0;

  std::size_t n_prompts() const noexcept { return n_prompts_; }
  std::size_t n_responses() const noexcept { return n_responses_; }

  virtual std::span<const double> parameters() const = 0;
  virtual std::span<double> parameters() = 0;
  std::size_t n_parameters() const { return parameters().size(); }

  /// Unnormalized log-score. Throws LookupError on out-of-range indices.
  virtual double score(std::size_t prompt, std::size_t response) const = 0;

  /// Log-softmax of the prompt's scores.
  std::vector<double> log_probs(std::size_t prompt) const;
  double log_prob(std::size_t prompt, std::size_t response) const;

  /// log pi(chosen | prompt) - log pi(rejected | prompt). Throws ArgumentError if equal.
  double policy_margin(std::size_t prompt, std::size_t chosen, std::size_t rejected) const;

  /// Gradient of policy_margin with respect to parameters().
  GradientVector margin_gradient(std::size_t prompt, std::size_t chosen,
                                 std::size_t rejected) const;

  /// grad += scale * d(policy_margin)/d(parameters).
  virtual void accumulate_margin_gradient(std::size_t prompt, std::size_t chosen,
                                          std::size_t rejected, double scale,
                                          std::span<double> grad) const = 0;

  /// grad += scale * d(log_prob(prompt, response))/d(parameters).
  virtual void accumulate_log_prob_gradient(std::size_t prompt, std::size_t response,
                                            double scale, std::span<double> grad) const = 0;

 protected:
  Policy(std::size_t n_prompts, std::size_t n_responses);
  Policy(const Policy&) = default;
  Policy& operator=(const Policy&) = default;

  void check_index(std::size_t prompt, std::size_t response) const;
  void check_pair(std::size_t prompt, std::size_t chosen, std::size_t rejected) const;

 private:
  std::size_t n_prompts_;
  std::size_t n_responses_;
};

/// One free logit per (prompt, response).
class TabularPolicy final : public Policy {
 public:
  explicit TabularPolicy(Matrix logits);
  static TabularPolicy uniform(std::size_t n_prompts, std::size_t n_responses);

  PolicyClass policy_class() const override { return PolicyClass::Tabular; }
  std::unique_ptr<Policy> clone() const override;

  std::span<const double> parameters() const override { return logits_.data(); }
  std::span<double> parameters() override { return logits_.data(); }
  const Matrix& logits() const noexcept { return logits_; }

  double score(std::size_t prompt, std::size_t response) const override;
  void accumulate_margin_gradient(std::size_t prompt, std::size_t chosen, std::size_t rejected,
                                  double scale, std::span<double> grad) const override;
  void accumulate_log_prob_gradient(std::size_t prompt, std::size_t response, double scale,
                                    std::span<double> grad) const override;

 private:
  Matrix logits_;
};

/// Deterministic feature table phi(x, y) in R^dim, standard-normal entries drawn from `seed`.
class FeatureMap {
 public:
  FeatureMap(std::size_t n_prompts, std::size_t n_responses, std::size_t dim, std::uint64_t seed);

  std::size_t n_prompts() const noexcept { return n_prompts_; }
  std::size_t n_responses() const noexcept { return n_responses_; }
  std::size_t dim() const noexcept { return dim_; }
  std::uint64_t seed() const noexcept { return seed_; }

  std::span<const double> features(std::size_t prompt, std::size_t response) const;

 private:
  std::size_t n_prompts_;
  std::size_t n_responses_;
  std::size_t dim_;
  std::uint64_t seed_;
  std::vector<double> table_;
};

/// score(x, y) = theta . phi(x, y).
class LogLinearPolicy final : public Policy {
 public:
  LogLinearPolicy(std::shared_ptr<const FeatureMap> features, std::vector<double> theta);
  /// theta = 0, i.e. uniform over responses.
  explicit LogLinearPolicy(std::shared_ptr<const FeatureMap> features);

  PolicyClass policy_class() const override { return PolicyClass::LogLinear; }
  std::unique_ptr<Policy> clone() const override;

  std::span<const double> parameters() const override { return theta_; }
  std::span<double> parameters() override { return theta_; }
  const FeatureMap& feature_map() const noexcept { return *features_; }
  std::shared_ptr<const FeatureMap> shared_feature_map() const noexcept { return features_; }

  double score(std::size_t prompt, std::size_t response) const override;
  void accumulate_margin_gradient(std::size_t prompt, std::size_t chosen, std::size_t rejected,
                                  double scale, std::span<double> grad) const override;
  void accumulate_log_prob_gradient(std::size_t prompt, std::size_t response, double scale,
                                    std::span<double> grad) const override;

 private:
  std::shared_ptr<const FeatureMap> features_;
  std::vector<double> theta_;
};

/// Central differences of `f` over every parameter of `policy`. Deterministic.
GradientVector finite_diff_gradient(const std::function<double(const Policy&)>& f,
                                    const Policy& policy, double step);

/// pi*(y|x) proportional to ref(y|x) exp(reward(x,y) / tau), exactly normalized per prompt.
/// The result's logits are the normalized log-probabilities.
TabularPolicy gibbs_optimum(const TabularPolicy& ref, const Matrix& reward, double tau);

}  // namespace hypo
