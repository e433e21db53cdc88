#pragma once

#include <cstdint>
#include <random>

namespace bbkit {

/// Seeded generator with platform-independent output. std::mt19937_64 is
/// fully specified; the standard distributions are not, so draws are
/// derived from raw engine output here.
class seeded_rng {
public:
  explicit seeded_rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t v;
    do
      v = engine_();
    while (v >= limit);
    return v % bound;
  }

  /// Uniform in [0, 1).
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool chance(double p) { return unit() < p; }

private:
  std::mt19937_64 engine_;
};

} // namespace bbkit
