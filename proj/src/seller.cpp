#include "optstop/seller.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace optstop {

double GaussianBelief::stddev() const { return std::sqrt(variance); }

GaussianBelief prior_belief(const ModelParams& params) {
  return {params.mu_prior, params.sigma_v * params.sigma_v};
}

GaussianBelief kalman_predict(const GaussianBelief& belief, const ModelParams& params) {
  return {belief.mean, belief.variance + params.sigma_eps * params.sigma_eps};
}

GaussianBelief kalman_correct(const GaussianBelief& belief, double y, const ModelParams& params) {
  const double noise_var = params.sigma_xi * params.sigma_xi;
  if (noise_var == 0.0) return {y, 0.0};
  const double gain = belief.variance / (belief.variance + noise_var);
  return {belief.mean + gain * (y - belief.mean), (1.0 - gain) * belief.variance};
}

double expected_revenue(double price, const GaussianBelief& belief) {
  return price * q_function((price - belief.mean) / belief.stddev());
}

namespace {

constexpr double kInvPhi = 0.6180339887498948482;  // 1 / golden ratio

double log_revenue(double price, double mean, double sd) {
  if (price <= 0.0) return -HUGE_VAL;
  return std::log(price) + log_q_function((price - mean) / sd);
}

// Mills ratio Q(z) / phi(z), computed in log space so it stays finite in the tail.
double mills_ratio(double z) {
  constexpr double kLogSqrt2Pi = 0.91893853320467274178;
  return std::exp(log_q_function(z) + 0.5 * z * z + kLogSqrt2Pi);
}

double golden_section_max(double lo, double hi, double mean, double sd, double tol) {
  double c = hi - kInvPhi * (hi - lo);
  double d = lo + kInvPhi * (hi - lo);
  double fc = log_revenue(c, mean, sd);
  double fd = log_revenue(d, mean, sd);
  while (hi - lo > tol) {
    if (fc > fd) {
      hi = d;
      d = c;
      fd = fc;
      c = hi - kInvPhi * (hi - lo);
      fc = log_revenue(c, mean, sd);
    } else {
      lo = c;
      c = d;
      fc = fd;
      d = lo + kInvPhi * (hi - lo);
      fd = log_revenue(d, mean, sd);
    }
  }
  return 0.5 * (lo + hi);
}

double grid_max(double lo, double hi, double mean, double sd) {
  constexpr int kCells = 20000;
  const double step = (hi - lo) / kCells;
  int best = 1;
  double best_value = log_revenue(lo + step, mean, sd);
  for (int i = 2; i <= kCells; ++i) {
    const double value = log_revenue(lo + i * step, mean, sd);
    if (value > best_value) {
      best_value = value;
      best = i;
    }
  }
  return golden_section_max(lo + (best - 1) * step, std::min(hi, lo + (best + 1) * step), mean, sd,
                            1e-13 * hi);
}

}  // namespace

double myopic_price(const GaussianBelief& belief) {
  if (!(belief.variance > 0.0))
    throw std::domain_error("myopic_price: belief variance must be positive, got " +
                            std::to_string(belief.variance));
  const double mean = belief.mean;
  const double sd = belief.stddev();
  const double hi = std::max(mean, 0.0) + 10.0 * sd;

  const double start = golden_section_max(0.0, hi, mean, sd, 1e-9 * hi);

  // Newton on r(p) = p - sd * m(z); r'(p) = 2 - z m(z).
  double p = start;
  bool converged = false;
  for (int iter = 0; iter < 50; ++iter) {
    const double z = (p - mean) / sd;
    const double m = mills_ratio(z);
    const double slope = 2.0 - z * m;
    if (!(slope > 0.0)) break;
    const double next = p - (p - sd * m) / slope;
    if (!(next > 0.0 && next <= hi)) break;
    const double delta = std::abs(next - p);
    p = next;
    if (delta <= 1e-15 * p) break;
  }
  // Far in the tail the Mills ratio carries ~1e-13 relative noise, so Newton
  // may stall just above the step tolerance; judge by the residual instead.
  if (p > 0.0 && p <= hi) converged = std::abs(p - sd * mills_ratio((p - mean) / sd)) <= 1e-10 * p;
  const double start_value = log_revenue(start, mean, sd);
  if (!converged || log_revenue(p, mean, sd) < start_value - 1e-14 * std::max(1.0, std::abs(start_value)))
    return grid_max(0.0, hi, mean, sd);
  return p;
}

double offered_price(const GaussianBelief& belief) {
  if (belief.variance > 0.0) return myopic_price(belief);
  return std::max(belief.mean, 0.0);
}

SellerStep seller_step(const GaussianBelief& belief, double true_v, int t, double noise,
                       const ModelParams& params) {
  if (t < 0 || t > params.horizon)
    throw std::out_of_range("seller_step: t = " + std::to_string(t) + " outside 0..T");
  SellerStep step;
  step.belief = belief;
  if (t > 0) {
    const double y = true_v + params.sigma_xi * noise;
    step.belief = kalman_correct(kalman_predict(belief, params), y, params);
    step.observation = y;
  }
  step.price = offered_price(step.belief);
  return step;
}

SellerStep seller_step(const GaussianBelief& belief, double true_v, int t, RngStream& stream,
                       const ModelParams& params) {
  const double noise = t > 0 ? stream.standard_normal() : 0.0;
  return seller_step(belief, true_v, t, noise, params);
}

}  // namespace optstop
