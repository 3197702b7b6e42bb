#include "neid/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "neid/errors.hpp"

namespace neid {

std::int64_t Rng::uniform_int(std::int64_t n) {
  if (n <= 0) throw InvalidSize("uniform_int: n must be positive");
  // Multiply-shift map of the 64-bit stream onto [0, n). The bias is at most
  // n / 2^64 per draw, immaterial for n used here.
  const unsigned __int128 prod =
      static_cast<unsigned __int128>(next_u64()) * static_cast<std::uint64_t>(n);
  return static_cast<std::int64_t>(prod >> 64);
}

double Rng::normal(double mean, double stddev) {
  if (have_spare_) {
    have_spare_ = false;
    return mean + stddev * spare_;
  }
  // u1 in (0, 1] so the log is finite.
  const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  have_spare_ = true;
  return mean + stddev * radius * std::cos(angle);
}

std::string Rng::serialize() const {
  std::ostringstream out;
  out << engine_ << ' ' << (have_spare_ ? 1 : 0);
  if (have_spare_) out << ' ' << std::hexfloat << spare_;
  return out.str();
}

Rng Rng::deserialize(const std::string& text) {
  Rng rng;
  std::istringstream in(text);
  int spare_flag = 0;
  in >> rng.engine_ >> spare_flag;
  if (in.fail()) throw CorruptCheckpoint("bad RNG state string");
  rng.have_spare_ = spare_flag != 0;
  if (rng.have_spare_) {
    in >> std::hexfloat >> rng.spare_;
    if (in.fail()) throw CorruptCheckpoint("bad RNG spare value");
  }
  return rng;
}

}  // namespace neid
