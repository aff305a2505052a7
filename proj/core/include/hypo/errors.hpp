// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hypo {

/// Non-finite or out-of-domain numeric input (NaN margins, positive log-probabilities).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Invalid hyperparameter or configuration value.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid call arguments (empty inputs, chosen == rejected, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Prompt or response index outside a policy's vocabulary.
class LookupError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent experiment configuration. `key()` names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(message), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Non-finite loss or gradient encountered during optimization.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(std::size_t step, std::vector<std::size_t> record_ids, const std::string& message)
      : std::runtime_error(message), step_(step), record_ids_(std::move(record_ids)) {}
  std::size_t step() const noexcept { return step_; }
  const std::vector<std::size_t>& record_ids() const noexcept { return record_ids_; }

 private:
  std::size_t step_;
  std::vector<std::size_t> record_ids_;
};

/// Pessimism calibration could not reach its target; carries the closest fraction seen.
class CalibrationError : public std::runtime_error {
 public:
  CalibrationError(double best_fraction, double best_misalignment, const std::string& message)
      : std::runtime_error(message),
        best_fraction_(best_fraction),
        best_misalignment_(best_misalignment) {}
  double best_fraction() const noexcept { return best_fraction_; }
  double best_misalignment() const noexcept { return best_misalignment_; }

 private:
  double best_fraction_;
  double best_misalignment_;
};

}  // namespace hypo
