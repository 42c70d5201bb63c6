#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

namespace moldsynth {

/// Philox4x32 with 10 rounds (Salmon et al., Random123). Stateless: the
/// output is a pure function of (counter, key).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter apply(Counter ctr, Key key);
};

/// SplitMix64 finalizer. Used to derive independent seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) { return mix64(a ^ mix64(b)); }

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  return mix64(mix64(a, b), c);
}

/// Map 52 random bits to the open interval (0, 1). With 53 bits the top
/// value would round to exactly 1.
inline double to_open_unit(std::uint64_t bits) {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Sequential draws over a Philox counter space. Each stream is keyed by a
/// 64-bit seed; the counter advances once per 128 bits consumed.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t next_u64();
  /// Uniform on (0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; values are produced in pairs.
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }
  /// Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  template <typename T>
  void shuffle(std::span<T> items) {
    for (size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// A seeded permutation of 0..n-1.
  std::vector<size_t> permutation(size_t n);

 private:
  Philox4x32::Key key_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace moldsynth
