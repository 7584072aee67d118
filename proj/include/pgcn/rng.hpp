#pragma once

#include <cstdint>
#include <random>

namespace pgcn {

/// Single-owner pseudo-random stream. The engine (mt19937_64) and the
/// conversions below are fully specified, so a seed reproduces the same
/// values across platforms and standard library versions.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi); returns lo when lo == hi.
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Standard normal via Box-Muller (one draw per call, no cached pair).
  double normal();

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  /// Child stream keyed by (this stream's seed, stream id); independent of how
  /// many values the parent has drawn.
  SeededRng derive(std::uint64_t stream_id) const { return SeededRng(mix_seed(seed_, stream_id)); }

  static std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream_id);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

/// Fisher-Yates shuffle driven by SeededRng::below.
template <typename Container>
void shuffle(Container& items, SeededRng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace pgcn
