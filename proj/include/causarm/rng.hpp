#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace causarm {

// splitmix64 step; used to derive independent seeds for sub-streams
// (per-episode, per-fold, per-epoch) from one user-facing seed.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t s = base ^ (0xd1b54a32d192ed03ull * (stream + 1));
  return splitmix64(s);
}

// Deterministic RNG: mt19937_64 core (bit-exact across platforms) with
// hand-rolled distributions, because the std:: distribution algorithms are
// implementation-defined and would break reproducibility of datasets.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // uniform in [0, 1)
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // uniform integer in [0, n)
  std::size_t index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  // uniform integer in [lo, hi] inclusive
  long uniform_int(long lo, long hi) {
    return lo + static_cast<long>(index(static_cast<std::size_t>(hi - lo + 1)));
  }

  // Box-Muller without spare caching so the stream stays splittable.
  double normal() {
    double u1 = uniform01();
    while (u1 == 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Resample until the draw lands inside [lo, hi].
  double truncated_normal(double mean, double stddev, double lo, double hi) {
    for (;;) {
      const double x = normal(mean, stddev);
      if (x >= lo && x <= hi) return x;
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      const std::size_t j = index(i + 1);
      std::swap(v[i], v[j]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    shuffle(p);
    return p;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace causarm
