// Copyright 2026 The spikefirst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Counter-based random numbers (Philox4x32-10). Every draw is a pure function
// of (seed, stream_id, counter), so a stream can be positioned anywhere and
// replayed bit-exactly regardless of the order in which samples are visited.

#ifndef SPIKEFIRST_RNG_HPP_
#define SPIKEFIRST_RNG_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "spikefirst/errors.hpp"
#include "spikefirst/tensor.hpp"

namespace spikefirst {

using Philox4x32 = std::array<std::uint32_t, 4>;

inline Philox4x32 philox4x32_10(Philox4x32 ctr, std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u, kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u, kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

// splitmix64 finalizer; used to derive stream ids from structured keys.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

template <typename... Parts>
std::uint64_t stream_key(std::uint64_t first, Parts... rest) {
  std::uint64_t h = mix64(first);
  ((h = mix64(h ^ static_cast<std::uint64_t>(rest))), ...);
  return h;
}

struct RngStream {
  std::uint64_t seed = 0;
  std::uint64_t stream_id = 0;
  std::uint64_t counter = 0;

  Philox4x32 block() const {
    return philox4x32_10(
        {static_cast<std::uint32_t>(counter),
         static_cast<std::uint32_t>(counter >> 32),
         static_cast<std::uint32_t>(stream_id),
         static_cast<std::uint32_t>(stream_id >> 32)},
        {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
  }

  // Uniform in [0, 1) with 53 random bits; consumes one counter value.
  double uniform() {
    const Philox4x32 b = block();
    ++counter;
    const std::uint64_t bits = (std::uint64_t{b[0]} << 32) | b[1];
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

  // Standard normal by Box-Muller on the two halves of one block; consumes
  // one counter value.
  double normal() {
    const Philox4x32 b = block();
    ++counter;
    const std::uint64_t bits1 = (std::uint64_t{b[0]} << 32) | b[1];
    const std::uint64_t bits2 = (std::uint64_t{b[2]} << 32) | b[3];
    const double u1 = 1.0 - static_cast<double>(bits1 >> 11) * 0x1.0p-53;  // (0,1]
    const double u2 = static_cast<double>(bits2 >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Uniform integer in [0, n) by rejection on 64 bits.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ParameterError("RngStream::below(0)");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    for (;;) {
      const Philox4x32 b = block();
      ++counter;
      const std::uint64_t bits = (std::uint64_t{b[0]} << 32) | b[1];
      if (bits < limit) return bits % n;
    }
  }

  friend bool operator==(const RngStream&, const RngStream&) = default;
};

inline Tensor rng_uniform(RngStream& stream, const Shape& shape) {
  Tensor t(shape);
  for (double& x : t.data()) x = stream.uniform();
  return t;
}

inline Tensor rng_gaussian(RngStream& stream, const Shape& shape, double mean,
                           double std) {
  if (!(std >= 0.0)) throw ParameterError("rng_gaussian: std must be >= 0");
  Tensor t(shape);
  for (double& x : t.data()) x = mean + std * stream.normal();
  return t;
}

}  // namespace spikefirst

#endif  // SPIKEFIRST_RNG_HPP_
