#ifndef UNISHAP_RNG_H_
#define UNISHAP_RNG_H_

#include <cstdint>
#include <random>

namespace unishap {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used to derive independent, reproducible substream
// seeds from (seed, stream id) pairs.
std::uint64_t SplitMix64(std::uint64_t x);

std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream,
                         std::uint64_t substream);

inline Rng MakeRng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(DeriveSeed(seed, stream));
}

}  // namespace unishap

#endif  // UNISHAP_RNG_H_
