#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace neid {

/// Deterministic random source. The raw mt19937_64 stream is mapped to
/// doubles and bounded integers with fixed arithmetic so that sequences do
/// not depend on the standard library's distribution implementations, and
/// the full generator state (including the cached Box-Muller value) can be
/// serialized into checkpoints.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Requires n > 0.
  std::int64_t uniform_int(std::int64_t n);

  /// Gaussian via Box-Muller; one spare value is cached between calls.
  double normal(double mean = 0.0, double stddev = 1.0);

  std::string serialize() const;
  static Rng deserialize(const std::string& text);

  bool operator==(const Rng& other) const {
    return engine_ == other.engine_ && have_spare_ == other.have_spare_ &&
           (!have_spare_ || spare_ == other.spare_);
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace neid
