#pragma once

#include "z2lgt/errors.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <string>

namespace z2lgt {

/// Identifier recorded in every output header; changes whenever draws would change.
inline constexpr const char* kRngAlgorithm = "mt19937_64/seed_seq(seed,stream)/edge-order-sweeps";

using Engine = std::mt19937_64;

/// A random stream fully determined by (seed, stream id).
struct RngSpec {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;

  friend bool operator==(const RngSpec&, const RngSpec&) = default;
};

inline Engine make_engine(const RngSpec& spec) {
  std::seed_seq seq{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32),
                    static_cast<std::uint32_t>(spec.stream), static_cast<std::uint32_t>(spec.stream >> 32),
                    0x5a32u};
  return Engine(seq);
}

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(Engine& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline bool bernoulli(Engine& rng, double p) { return uniform01(rng) < p; }

}  // namespace z2lgt
