#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace partnr {

using Rng = std::mt19937_64;

// Independent sub-stream seed for a named consumer ("scene", "expert-noise",
// "train-shuffle", ...). Stable across platforms.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

inline Rng make_rng(std::uint64_t seed, std::string_view stream) {
  return Rng(derive_seed(seed, stream));
}

}  // namespace partnr
