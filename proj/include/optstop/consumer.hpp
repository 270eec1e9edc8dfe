#ifndef OPTSTOP_CONSUMER_HPP
#define OPTSTOP_CONSUMER_HPP

#include "optstop/model.hpp"
#include "optstop/rng.hpp"

namespace optstop {

/// The consumer's information at epoch t: her current valuation mean and the
/// remaining variance (T - t) * sigma_eps^2 of her final valuation.
struct ConsumerState {
  int t = 0;
  double valuation = 0.0;
  double residual_var = 0.0;
};

/// Exponent at which the CARA term saturates.
inline constexpr double kPayoffExponentCap = 700.0;

ConsumerState initial_consumer_state(double v0, const ModelParams& params);

/// Advances by one epoch with an explicit shock (already scaled to value units).
ConsumerState advance_valuation(const ConsumerState& state, double shock, const ModelParams& params);

/// Advances by one epoch with a shock drawn N(0, sigma_eps^2) from `stream`.
/// Throws std::out_of_range when state.t >= T.
ConsumerState step_valuation(const ConsumerState& state, RngStream& stream, const ModelParams& params);

/// Certainty-equivalent CARA payoff of purchasing at `price`:
///   1 - exp(-gamma (v_t - p)) * exp(gamma^2 (T - t) sigma_eps^2 / 2).
/// The combined exponent is capped at kPayoffExponentCap.
double purchase_payoff(const ConsumerState& state, double price, const ModelParams& params);

/// max(pi, 0): the better of purchasing and rejecting.
inline double exit_payoff(double pi) { return pi > 0.0 ? pi : 0.0; }

}  // namespace optstop

#endif  // OPTSTOP_CONSUMER_HPP
