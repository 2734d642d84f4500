#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace deeppink::rng {

// SplitMix64 finalizer, used for deriving child seeds.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Purpose tags for sub-stream derivation. The seed hierarchy is
//   experiment seed -> repetition -> {design, beta, noise, knockoff, ensemble}
//   ensemble seed   -> one train_run per network
//   train_run seed  -> {init, shuffle}
// so that regenerating one ingredient (say, the noise) never perturbs the
// draws of any other.
enum class Stream : std::uint64_t {
  repetition = 1,
  design = 2,
  beta = 3,
  noise = 4,
  knockoff = 5,
  ensemble = 6,
  train_run = 7,
  init = 8,
  shuffle = 9,
};

inline std::uint64_t substream(std::uint64_t seed, Stream tag,
                               std::uint64_t index = 0) noexcept {
  std::uint64_t h = splitmix64(seed ^ 0x6a09e667f3bcc909ULL);
  h = splitmix64(h ^ splitmix64(static_cast<std::uint64_t>(tag)));
  return splitmix64(h ^ splitmix64(index));
}

// Seeded generator on top of std::mt19937_64. The uniform/normal transforms
// live here rather than in <random> distributions so that a given seed yields
// the same stream on every standard library.
class Generator {
 public:
  explicit Generator(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller; consumes two engine draws.
  double normal() {
    double u1 = uniform();
    while (u1 == 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  // Unbiased integer in [0, bound), bound >= 1. Lemire's multiply-shift.
  std::uint64_t below(std::uint64_t bound) {
    unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = -bound % bound;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(engine_()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  static constexpr double kTwoPi = 6.283185307179586476925286766559;
  std::mt19937_64 engine_;
};

}  // namespace deeppink::rng
