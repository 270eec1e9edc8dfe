#ifndef OPTSTOP_MODEL_HPP
#define OPTSTOP_MODEL_HPP

#include <cstdint>
#include <optional>

namespace optstop {

/// Scalar parameters of the Gaussian consumer/seller model.
///
/// Defaults are the reference experiment: T = 25, gamma = 1,
/// sigma_eps = 0.1, sigma_xi = 1, prior N(1, 1).
struct ModelParams {
  int horizon = 25;          ///< decision epochs are 0..horizon
  double gamma = 1.0;        ///< CARA risk aversion
  double sigma_eps = 0.1;    ///< consumer valuation shock std-dev
  double sigma_xi = 1.0;     ///< seller observation noise std-dev
  double mu_prior = 1.0;     ///< seller prior mean of v_0
  double sigma_v = 1.0;      ///< seller prior std-dev of v_0
  std::uint64_t seed = 0;

  /// When set, every path starts at this valuation instead of a prior draw.
  std::optional<double> initial_valuation;

  /// Throws std::invalid_argument when an invariant is violated.
  void validate() const;
};

}  // namespace optstop

#endif  // OPTSTOP_MODEL_HPP
