#ifndef BOSH_RANDOM_HPP
#define BOSH_RANDOM_HPP

#include <cstdint>
#include <random>

namespace bosh {

using Rng = std::mt19937_64;

// Fixed labels for the independent random streams of one run. Every stream
// is a pure function of (run seed, label), so adding draws to one component
// never perturbs another.
enum class StreamLabel : std::uint32_t {
  kModelFit = 1,
  kDesign = 2,
  kMaxValue = 3,
  kBenchmark = 4,
};

inline Rng derive_stream(std::uint64_t seed, std::uint32_t label) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32), label, 0x9e3779b9u};
  return Rng(seq);
}

inline Rng derive_stream(std::uint64_t seed, StreamLabel label) {
  return derive_stream(seed, static_cast<std::uint32_t>(label));
}

}  // namespace bosh

#endif  // BOSH_RANDOM_HPP
