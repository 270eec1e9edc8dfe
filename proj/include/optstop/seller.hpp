#ifndef OPTSTOP_SELLER_HPP
#define OPTSTOP_SELLER_HPP

#include <optional>

#include "optstop/model.hpp"
#include "optstop/rng.hpp"

namespace optstop {

/// The seller's Gaussian posterior on the consumer's current valuation.
struct GaussianBelief {
  double mean = 0.0;
  double variance = 1.0;

  double stddev() const;
};

GaussianBelief prior_belief(const ModelParams& params);

/// Identity transition with additive process noise sigma_eps^2.
GaussianBelief kalman_predict(const GaussianBelief& belief, const ModelParams& params);

/// Conjugate update with observation y = v + xi, xi ~ N(0, sigma_xi^2).
GaussianBelief kalman_correct(const GaussianBelief& belief, double y, const ModelParams& params);

/// Expected revenue p * Q((p - mean) / stddev).
double expected_revenue(double price, const GaussianBelief& belief);

/// Maximizer over p > 0 of expected_revenue. Throws std::domain_error when
/// belief.variance <= 0.
///
/// log(p) + log Q(z) is strictly concave in p, so a golden-section search on
/// (0, max(mean, 0) + 10 stddev] brackets the unique maximum; Newton steps on
/// the stationarity condition p = stddev * Q(z) / phi(z) then polish it. A
/// grid scan replaces the Newton result if it leaves the bracket or loses
/// objective value.
double myopic_price(const GaussianBelief& belief);

/// Price offered for any belief, including the point-mass limit
/// (variance 0), which is priced at the supremum max(mean, 0).
double offered_price(const GaussianBelief& belief);

struct SellerStep {
  double price = 0.0;
  GaussianBelief belief;
  std::optional<double> observation;  ///< y_t; empty at t = 0
};

/// One epoch of the seller. At t = 0 the prior is priced as is; for t >= 1 the
/// belief is predicted, corrected with y_t = true_v + sigma_xi * noise, then
/// priced. `noise` is a standard-normal value.
SellerStep seller_step(const GaussianBelief& belief, double true_v, int t, double noise,
                       const ModelParams& params);

/// As above, drawing the observation noise from `stream` (only when t >= 1).
SellerStep seller_step(const GaussianBelief& belief, double true_v, int t, RngStream& stream,
                       const ModelParams& params);

}  // namespace optstop

#endif  // OPTSTOP_SELLER_HPP
