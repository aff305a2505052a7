// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

namespace hypo {

using Rng = std::mt19937_64;

/// Independent named streams derived from one experiment seed.
enum class Stream : std::uint32_t {
  Rewards = 1,
  RefNoise = 2,
  Pairs = 3,
  Split = 4,
  Shuffle = 5,
  Features = 6,
  WinMatrix = 7,
  Init = 8,
};

inline Rng make_rng(std::uint64_t seed, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return Rng(seq);
}

}  // namespace hypo
