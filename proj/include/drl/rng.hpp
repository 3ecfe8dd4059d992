#ifndef DRL_RNG_HPP_
#define DRL_RNG_HPP_

#include <cstdint>
#include <random>

namespace drl {

using Rng = std::mt19937_64;

// Independent stream derived from a base seed and a stream index (worker,
// network, run ...). Streams with different indices do not overlap in practice.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x5eedu};
  return Rng(seq);
}

inline double standard_normal(Rng& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(rng);
}

inline double uniform(Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi_inclusive) {
  std::uniform_int_distribution<int> dist(lo, hi_inclusive);
  return dist(rng);
}

}  // namespace drl

#endif  // DRL_RNG_HPP_
