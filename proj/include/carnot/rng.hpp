#ifndef CARNOT_RNG_HPP
#define CARNOT_RNG_HPP

#include <cmath>
#include <cstdint>

namespace carnot {

// splitmix64: tiny, well-mixed, and cheap to re-seed, which is what the
// determinism contract needs: every sample index gets its own stream, so
// results do not depend on how samples are distributed over threads.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1), 53-bit mantissa.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo,hi).
  double next_in(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Standard normal via Box-Muller; one value per call, no cached spare so
  // the stream stays position-independent.
  double next_normal() {
    double u = 0.0;
    while (u == 0.0) u = next_double();
    double v = next_double();
    return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586476925287 * v);
  }

 private:
  uint64_t state_;
};

// Decorrelates (seed, stream, index) triples before seeding a SplitMix64.
inline uint64_t mix_seed(uint64_t seed, uint64_t stream, uint64_t index) {
  uint64_t z = seed ^ (stream * 0x9e3779b97f4a7c15ull) ^ (index * 0xd1342543de82ef95ull);
  z = (z ^ (z >> 32)) * 0xff51afd7ed558ccdull;
  z = (z ^ (z >> 32)) * 0xc4ceb9fe1a85ec53ull;
  return z ^ (z >> 32);
}

// Per-sample generator: stream_at(seed, k, i) is independent of evaluation
// order, so parallel loops reproduce the sequential result bit for bit.
inline SplitMix64 stream_at(uint64_t seed, uint64_t stream, uint64_t index) {
  return SplitMix64(mix_seed(seed, stream, index));
}

}  // namespace carnot

#endif
