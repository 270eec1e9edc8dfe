#include "optstop/consumer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace optstop {

void ModelParams::validate() const {
  if (horizon < 1) throw std::invalid_argument("model: horizon must be >= 1");
  if (!(gamma > 0.0)) throw std::invalid_argument("model: gamma must be > 0");
  if (!(sigma_eps >= 0.0)) throw std::invalid_argument("model: sigma_eps must be >= 0");
  if (!(sigma_xi >= 0.0)) throw std::invalid_argument("model: sigma_xi must be >= 0");
  if (!(sigma_v >= 0.0)) throw std::invalid_argument("model: sigma_v must be >= 0");
  if (!std::isfinite(mu_prior)) throw std::invalid_argument("model: mu_prior must be finite");
  if (initial_valuation && !std::isfinite(*initial_valuation))
    throw std::invalid_argument("model: initial_valuation must be finite");
}

namespace {

double residual_variance(int t, const ModelParams& params) {
  return static_cast<double>(params.horizon - t) * params.sigma_eps * params.sigma_eps;
}

}  // namespace

ConsumerState initial_consumer_state(double v0, const ModelParams& params) {
  return {0, v0, residual_variance(0, params)};
}

ConsumerState advance_valuation(const ConsumerState& state, double shock, const ModelParams& params) {
  if (state.t >= params.horizon)
    throw std::out_of_range("step_valuation: t = " + std::to_string(state.t) + " is already at the horizon");
  const int next = state.t + 1;
  return {next, state.valuation + shock, residual_variance(next, params)};
}

ConsumerState step_valuation(const ConsumerState& state, RngStream& stream, const ModelParams& params) {
  if (state.t >= params.horizon)
    throw std::out_of_range("step_valuation: t = " + std::to_string(state.t) + " is already at the horizon");
  return advance_valuation(state, params.sigma_eps * stream.standard_normal(), params);
}

double purchase_payoff(const ConsumerState& state, double price, const ModelParams& params) {
  const double g = params.gamma;
  const double exponent = -g * (state.valuation - price) + 0.5 * g * g * state.residual_var;
  return 1.0 - std::exp(std::min(exponent, kPayoffExponentCap));
}

}  // namespace optstop
