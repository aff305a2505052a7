// SPDX-License-Identifier: Apache-2.0
//
// Scalar kernels shared by every objective: overflow-free logistic functions and the
// hard/soft reference-margin transforms. All functions are pure and thread-safe.
#pragma once

#include <optional>
#include <string_view>

namespace hypo {

/// Policy and reference log-likelihood margins (nats) of one preference pair.
struct MarginPair {
  double delta_theta = 0.0;
  double delta_ref = 0.0;
};

/// Every tunable scalar of the objective family.
///
/// `alpha` is the softplus sharpness of the smoothed clip; absent means hard clip.
/// `tau` in configuration files is the reciprocal of `alpha`.
struct HyperParams {
  double beta = 1.0;
  double gamma = 0.0;
  std::optional<double> alpha;
  double h = 0.0;
  double lambda_sft = 0.0;

  /// Throws ParameterError when any field is out of range or non-finite.
  void validate() const;

  static double alpha_from_tau(double tau);
  static double tau_from_alpha(double alpha);
};

/// Throws DomainError naming `what` when `x` is NaN or infinite.
void require_finite(double x, std::string_view what);
void require_finite(const MarginPair& pair);

/// 1 / (1 + e^{-x}) without overflow.
double stable_sigmoid(double x);

/// log(1 + e^x) without overflow or premature underflow.
double stable_log1pexp(double x);

/// max(delta_ref, gamma).
double clip_ref_margin(double delta_ref, double gamma);

/// gamma + log(1 + exp(alpha * (delta_ref - gamma))) / alpha. Exceeds the hard clip by
/// at most ln(2) / alpha.
double smooth_ref_margin(double delta_ref, double gamma, double alpha);

}  // namespace hypo
