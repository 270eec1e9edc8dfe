#include "optstop/rng.hpp"

#include <cmath>
#include <numbers>

namespace optstop {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t substream, std::uint64_t path)
    : engine_(mix64(mix64(mix64(seed) ^ substream) ^ (path * 0xd1b54a32d192ed03ULL))) {}

double RngStream::uniform() {
  // Top 53 bits, offset by half an ulp so 0 is never returned.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::standard_normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double radius = std::sqrt(-2.0 * std::log(uniform()));
  const double angle = 2.0 * std::numbers::pi * uniform();
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

double q_function(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

double log_q_function(double z) {
  if (z < 35.0) return std::log(q_function(z));
  // Asymptotic expansion of the Mills ratio.
  const double inv2 = 1.0 / (z * z);
  return -0.5 * z * z - std::log(z) - 0.5 * std::log(2.0 * std::numbers::pi) +
         std::log1p(-inv2 + 3.0 * inv2 * inv2 - 15.0 * inv2 * inv2 * inv2);
}

double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace optstop
