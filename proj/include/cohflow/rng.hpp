#ifndef COHFLOW_RNG_HPP
#define COHFLOW_RNG_HPP

#include <cmath>
#include <cstdint>

namespace cohflow {

// Counter-based generator; per-particle substreams come from hashing
// (seed, id), so ensembles are reproducible independent of scheduling.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }  // [0, 1)

  // Box-Muller; one normal per call, second draw cached.
  double normal() {
    if (have_cache_) {
      have_cache_ = false;
      return cache_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.28318530717958647692 * u2;
    cache_ = r * std::sin(a);
    have_cache_ = true;
    return r * std::cos(a);
  }

 private:
  double cache_ = 0.0;
  bool have_cache_ = false;
};

inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t id) {
  SplitMix64 h(seed ^ (id * 0xD1B54A32D192ED03ull + 0x8CB92BA72F3D8DD7ull));
  return h.next();
}

}  // namespace cohflow

#endif
