#include "optstop/paths.hpp"

#include <bit>
#include <stdexcept>

#include "optstop/consumer.hpp"
#include "optstop/rng.hpp"
#include "optstop/seller.hpp"

namespace optstop {

SamplePath generate_path(const ModelParams& params, std::uint64_t substream, std::uint64_t index) {
  params.validate();
  const int horizon = params.horizon;
  RngStream rng(params.seed, substream, index);

  SamplePath path;
  path.valuation.resize(horizon + 1);
  path.observation.resize(horizon);
  path.price.resize(horizon + 1);
  path.purchase.resize(horizon + 1);
  path.exit.resize(horizon + 1);
  path.seller_mean.resize(horizon + 1);
  path.seller_variance.resize(horizon + 1);

  const double v0 = params.initial_valuation ? *params.initial_valuation
                                             : rng.normal(params.mu_prior, params.sigma_v);
  ConsumerState consumer = initial_consumer_state(v0, params);
  GaussianBelief belief = prior_belief(params);

  for (int t = 0; t <= horizon; ++t) {
    if (t > 0) consumer = step_valuation(consumer, rng, params);
    const SellerStep step = seller_step(belief, consumer.valuation, t, rng, params);
    belief = step.belief;
    if (step.observation) path.observation[t - 1] = *step.observation;

    const double pi = purchase_payoff(consumer, step.price, params);
    path.valuation[t] = consumer.valuation;
    path.price[t] = step.price;
    path.purchase[t] = pi;
    path.exit[t] = exit_payoff(pi);
    path.seller_mean[t] = belief.mean;
    path.seller_variance[t] = belief.variance;
  }
  return path;
}

std::vector<SamplePath> generate_paths(const ModelParams& params, std::uint64_t substream,
                                       std::size_t count) {
  std::vector<SamplePath> paths;
  paths.reserve(count);
  for (std::size_t n = 0; n < count; ++n) paths.push_back(generate_path(params, substream, n));
  return paths;
}

namespace {

template <typename Select>
Eigen::MatrixXd stack_rows(const std::vector<SamplePath>& paths, Select select) {
  if (paths.empty()) return {};
  const Eigen::Index cols = select(paths.front()).size();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(paths.size()), cols);
  for (std::size_t n = 0; n < paths.size(); ++n) {
    const Eigen::VectorXd& row = select(paths[n]);
    if (row.size() != cols) throw std::invalid_argument("paths have mismatched horizons");
    out.row(static_cast<Eigen::Index>(n)) = row.transpose();
  }
  return out;
}

}  // namespace

Eigen::MatrixXd exit_matrix(const std::vector<SamplePath>& paths) {
  return stack_rows(paths, [](const SamplePath& p) -> const Eigen::VectorXd& { return p.exit; });
}

Eigen::MatrixXd purchase_matrix(const std::vector<SamplePath>& paths) {
  return stack_rows(paths, [](const SamplePath& p) -> const Eigen::VectorXd& { return p.purchase; });
}

std::uint64_t checksum(const std::vector<SamplePath>& paths) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  auto feed = [&hash](const Eigen::VectorXd& values) {
    for (double v : values) {
      auto bits = std::bit_cast<std::uint64_t>(v);
      for (int byte = 0; byte < 8; ++byte) {
        hash ^= (bits >> (8 * byte)) & 0xffU;
        hash *= 0x100000001b3ULL;
      }
    }
  };
  for (const SamplePath& p : paths) {
    feed(p.valuation);
    feed(p.observation);
    feed(p.price);
    feed(p.purchase);
    feed(p.exit);
  }
  return hash;
}

}  // namespace optstop
