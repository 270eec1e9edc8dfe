#ifndef OPTSTOP_RNG_HPP
#define OPTSTOP_RNG_HPP

#include <cstdint>
#include <random>

namespace optstop {

// Sub-stream identifiers. Each (seed, substream, path) triple names an
// independent, reproducible stream of draws.
namespace substream {
inline constexpr std::uint64_t training = 1;
inline constexpr std::uint64_t test = 2;
inline constexpr std::uint64_t independent_myopic = 3;
inline constexpr std::uint64_t subsample = 4;
inline constexpr std::uint64_t tree_sampling = 5;
}  // namespace substream

/// SplitMix64 finalizer; used to derive engine seeds from stream keys.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Deterministic pseudorandom stream keyed by (seed, substream, path).
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard; the uniform and normal transforms are implemented here so the
/// draws do not depend on the standard library's distribution classes.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t substream, std::uint64_t path);

  /// Uniform on the open interval (0, 1) with 53 bits of resolution.
  double uniform();

  /// Standard normal variate via the Box-Muller transform.
  double standard_normal();

  double normal(double mean, double stddev) { return mean + stddev * standard_normal(); }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Upper-tail probability of the standard normal, Pr(Z > z).
double q_function(double z);

/// log Q(z), accurate deep into the upper tail where Q underflows.
double log_q_function(double z);

/// Standard normal density.
double normal_pdf(double z);

}  // namespace optstop

#endif  // OPTSTOP_RNG_HPP
