// SPDX-License-Identifier: Apache-2.0
#include "hypo/core_math.hpp"

#include <cmath>
#include <string>

#include "hypo/errors.hpp"

namespace hypo {

void require_finite(double x, std::string_view what) {
  if (!std::isfinite(x)) {
    throw DomainError(std::string(what) + " must be finite, got " + std::to_string(x));
  }
}

void require_finite(const MarginPair& pair) {
  require_finite(pair.delta_theta, "delta_theta");
  require_finite(pair.delta_ref, "delta_ref");
}

void HyperParams::validate() const {
  if (!std::isfinite(beta) || beta <= 0.0) {
    throw ParameterError("beta must be finite and > 0");
  }
  if (!std::isfinite(gamma)) throw ParameterError("gamma must be finite");
  if (alpha && (!std::isfinite(*alpha) || *alpha <= 0.0)) {
    throw ParameterError("alpha must be finite and > 0 when present");
  }
  if (!std::isfinite(h) || h < 0.0) throw ParameterError("h must be finite and >= 0");
  if (!std::isfinite(lambda_sft) || lambda_sft < 0.0) {
    throw ParameterError("lambda_sft must be finite and >= 0");
  }
}

double HyperParams::alpha_from_tau(double tau) {
  if (!std::isfinite(tau) || tau <= 0.0) throw ParameterError("tau must be finite and > 0");
  return 1.0 / tau;
}

double HyperParams::tau_from_alpha(double alpha) {
  if (!std::isfinite(alpha) || alpha <= 0.0) {
    throw ParameterError("alpha must be finite and > 0");
  }
  return 1.0 / alpha;
}

double stable_sigmoid(double x) {
  require_finite(x, "sigmoid argument");
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_log1pexp(double x) {
  require_finite(x, "log1pexp argument");
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double clip_ref_margin(double delta_ref, double gamma) {
  require_finite(delta_ref, "delta_ref");
  require_finite(gamma, "gamma");
  return delta_ref >= gamma ? delta_ref : gamma;
}

double smooth_ref_margin(double delta_ref, double gamma, double alpha) {
  require_finite(delta_ref, "delta_ref");
  require_finite(gamma, "gamma");
  if (!std::isfinite(alpha) || alpha <= 0.0) {
    throw ParameterError("smoothing alpha must be finite and > 0");
  }
  return gamma + stable_log1pexp(alpha * (delta_ref - gamma)) / alpha;
}

}  // namespace hypo
