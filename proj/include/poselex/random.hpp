#pragma once

#include <cstdint>
#include <random>

namespace poselex::detail {

// Uniform double in [0,1) from the top 53 bits of a mt19937_64 draw;
// avoids distribution classes whose output is implementation-specified.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace poselex::detail
