#pragma once

#include <cstdint>
#include <random>

namespace lipfit {

/// Seedable source of all randomness in the library.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Conversions to real numbers are done here rather than through
/// <random> distributions (those are implementation-defined):
///   uniform  = (next() >> 11) * 2^-53, in [0, 1)
///   normal   = Box-Muller on two uniforms, both outputs used in order
/// so identical seeds give identical streams on every conforming toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();

  // Independent child stream, e.g. one per trial. Derived deterministically
  // from the parent seed material via SplitMix64 mixing of `stream`.
  Rng fork(std::uint64_t stream);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace lipfit
