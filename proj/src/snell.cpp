#include "optstop/snell.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

#include "optstop/consumer.hpp"
#include "optstop/rng.hpp"
#include "optstop/seller.hpp"

namespace optstop {

namespace {

constexpr double kProbabilityTolerance = 1e-12;

}  // namespace

std::size_t FiniteStopProblem::node_count() const {
  std::size_t total = 0;
  for (const auto& epoch : epochs) total += epoch.size();
  return total;
}

double FiniteStopProblem::initial_probability(std::size_t node) const {
  if (initial.empty()) return node == 0 ? 1.0 : 0.0;
  return initial[node];
}

void FiniteStopProblem::validate() const {
  if (epochs.empty() || epochs.front().empty())
    throw std::invalid_argument("stop problem: epoch 0 has no nodes");
  if (initial.empty()) {
    if (epochs.front().size() != 1)
      throw std::invalid_argument("stop problem: several epoch-0 nodes need an initial distribution");
  } else {
    if (initial.size() != epochs.front().size())
      throw std::invalid_argument("stop problem: initial distribution size does not match epoch 0");
    double total = 0.0;
    for (double p : initial) {
      if (!(p >= 0.0)) throw std::invalid_argument("stop problem: negative initial probability");
      total += p;
    }
    if (std::abs(total - 1.0) > kProbabilityTolerance)
      throw std::invalid_argument("stop problem: initial distribution sums to " + std::to_string(total));
  }

  const int last = horizon();
  for (int t = 0; t <= last; ++t) {
    const auto& nodes = epochs[static_cast<std::size_t>(t)];
    if (nodes.empty()) throw std::invalid_argument("stop problem: epoch " + std::to_string(t) + " is empty");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const StopNode& node = nodes[i];
      const std::string where = "node (" + std::to_string(t) + ", " + std::to_string(i) + ")";
      if (!std::isfinite(node.exit_payoff))
        throw std::invalid_argument("stop problem: non-finite payoff at " + where);
      if (t == last) {
        if (!node.children.empty())
          throw std::invalid_argument("stop problem: terminal " + where + " has children");
        continue;
      }
      if (node.children.empty())
        throw std::invalid_argument("stop problem: " + where + " has no transitions");
      double total = 0.0;
      for (const Transition& edge : node.children) {
        if (edge.child >= epochs[static_cast<std::size_t>(t) + 1].size())
          throw std::invalid_argument("stop problem: " + where + " points at a missing child");
        if (!(edge.probability >= 0.0))
          throw std::invalid_argument("stop problem: negative probability at " + where);
        total += edge.probability;
      }
      if (std::abs(total - 1.0) > kProbabilityTolerance)
        throw std::invalid_argument("stop problem: transitions at " + where + " sum to " +
                                    std::to_string(total));
    }
  }
}

SnellSolution backward_induction(const FiniteStopProblem& problem) {
  problem.validate();
  const auto epochs = problem.epochs.size();
  SnellSolution solution;
  solution.envelope.resize(epochs);
  solution.stop.resize(epochs);

  for (std::size_t t = epochs; t-- > 0;) {
    const auto& nodes = problem.epochs[t];
    auto& value = solution.envelope[t];
    auto& stop = solution.stop[t];
    value.resize(nodes.size());
    stop.resize(nodes.size());
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double h = nodes[i].exit_payoff;
      if (t + 1 == epochs) {
        value[i] = h;
        stop[i] = 1;
        continue;
      }
      double continuation = 0.0;
      for (const Transition& edge : nodes[i].children)
        continuation += edge.probability * solution.envelope[t + 1][edge.child];
      value[i] = std::max(h, continuation);
      stop[i] = std::abs(value[i] - h) <= kStopTolerance ? 1 : 0;
    }
  }

  for (std::size_t i = 0; i < problem.epochs.front().size(); ++i)
    solution.root_value += problem.initial_probability(i) * solution.envelope.front()[i];
  return solution;
}

int StoppingRule::stopping_time(std::span<const std::size_t> node_path) const {
  const int last = static_cast<int>(stop_.size()) - 1;
  if (node_path.size() != stop_.size())
    throw std::invalid_argument("stopping_time: node path length does not match the horizon");
  for (int t = 0; t < last; ++t)
    if (stops(t, node_path[static_cast<std::size_t>(t)])) return t;
  return last;
}

StoppingRule tau_min(const FiniteStopProblem& problem, const SnellSolution& solution) {
  if (solution.stop.size() != problem.epochs.size())
    throw std::invalid_argument("tau_min: solution does not belong to this problem");
  return StoppingRule(solution.stop);
}

double expected_stopped_payoff(const FiniteStopProblem& problem,
                               const std::function<bool(int, std::size_t)>& stop_at) {
  problem.validate();
  const int last = problem.horizon();
  // Probability mass reaching each node without having stopped.
  std::vector<double> alive(problem.epochs.front().size());
  for (std::size_t i = 0; i < alive.size(); ++i) alive[i] = problem.initial_probability(i);

  double total = 0.0;
  for (int t = 0; t <= last; ++t) {
    const auto& nodes = problem.epochs[static_cast<std::size_t>(t)];
    std::vector<double> next(t < last ? problem.epochs[static_cast<std::size_t>(t) + 1].size() : 0, 0.0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (alive[i] == 0.0) continue;
      if (t == last || stop_at(t, i)) {
        total += alive[i] * nodes[i].exit_payoff;
        continue;
      }
      for (const Transition& edge : nodes[i].children) next[edge.child] += alive[i] * edge.probability;
    }
    alive = std::move(next);
  }
  return total;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite_rule(int levels) {
  if (levels < 1) throw std::invalid_argument("gauss_hermite_rule: levels must be >= 1");
  // Golub-Welsch on the Jacobi matrix of the probabilists' Hermite recurrence.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(levels, levels);
  for (int i = 1; i < levels; ++i) {
    jacobi(i, i - 1) = std::sqrt(static_cast<double>(i));
    jacobi(i - 1, i) = jacobi(i, i - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  Eigen::VectorXd nodes = eig.eigenvalues();
  Eigen::VectorXd weights = eig.eigenvectors().row(0).transpose().array().square();

  // Enforce the exact symmetry of the rule.
  for (int i = 0; i < levels / 2; ++i) {
    const int j = levels - 1 - i;
    const double x = 0.5 * (nodes[j] - nodes[i]);
    const double w = 0.5 * (weights[i] + weights[j]);
    nodes[i] = -x;
    nodes[j] = x;
    weights[i] = weights[j] = w;
  }
  if (levels % 2 == 1) nodes[levels / 2] = 0.0;
  weights /= weights.sum();
  return {nodes, weights};
}

DiscretizedProblem discretize_consumer_problem(const ModelParams& params, int levels,
                                               std::size_t node_budget) {
  params.validate();
  if (levels < 1) throw std::invalid_argument("discretize: levels must be >= 1");
  const auto [points, weights] = gauss_hermite_rule(levels);
  const std::size_t roots = params.initial_valuation ? 1 : static_cast<std::size_t>(levels);
  const std::size_t branching = static_cast<std::size_t>(levels) * static_cast<std::size_t>(levels);

  std::size_t total = 0;
  std::size_t width = roots;
  for (int t = 0; t <= params.horizon; ++t) {
    total += width;
    if (total > node_budget)
      throw std::length_error("discretize: tree exceeds the node budget of " + std::to_string(node_budget));
    width *= branching;
  }

  DiscretizedProblem out;
  auto& epochs = out.problem.epochs;
  auto& states = out.states;
  epochs.resize(static_cast<std::size_t>(params.horizon) + 1);
  states.resize(epochs.size());

  const GaussianBelief prior = prior_belief(params);
  std::vector<ConsumerState> consumers;
  std::vector<GaussianBelief> beliefs;
  auto add_node = [&](std::size_t t, const ConsumerState& consumer, const SellerStep& step) {
    const double pi = purchase_payoff(consumer, step.price, params);
    epochs[t].push_back(StopNode{exit_payoff(pi), {}});
    states[t].push_back(LatticeState{consumer.valuation, step.belief.mean, step.belief.variance, step.price, pi});
    consumers.push_back(consumer);
    beliefs.push_back(step.belief);
  };

  if (params.initial_valuation) {
    add_node(0, initial_consumer_state(*params.initial_valuation, params), seller_step(prior, 0.0, 0, 0.0, params));
  } else {
    for (int i = 0; i < levels; ++i) {
      const double v0 = params.mu_prior + params.sigma_v * points[i];
      add_node(0, initial_consumer_state(v0, params), seller_step(prior, v0, 0, 0.0, params));
      out.problem.initial.push_back(weights[i]);
    }
  }

  for (std::size_t t = 1; t < epochs.size(); ++t) {
    std::vector<ConsumerState> parents_consumer = std::move(consumers);
    std::vector<GaussianBelief> parents_belief = std::move(beliefs);
    consumers.clear();
    beliefs.clear();
    for (std::size_t parent = 0; parent < parents_consumer.size(); ++parent) {
      for (int i = 0; i < levels; ++i) {
        const ConsumerState consumer =
            advance_valuation(parents_consumer[parent], params.sigma_eps * points[i], params);
        for (int j = 0; j < levels; ++j) {
          const SellerStep step =
              seller_step(parents_belief[parent], consumer.valuation, static_cast<int>(t), points[j], params);
          epochs[t - 1][parent].children.push_back({epochs[t].size(), weights[i] * weights[j]});
          add_node(t, consumer, step);
        }
      }
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> sample_node_paths(const FiniteStopProblem& problem,
                                                        std::size_t count, std::uint64_t seed,
                                                        std::uint64_t substream) {
  problem.validate();
  const auto epochs = problem.epochs.size();
  std::vector<std::vector<std::size_t>> paths(count, std::vector<std::size_t>(epochs));
  for (std::size_t n = 0; n < count; ++n) {
    RngStream rng(seed, substream, n);
    // Inverse-CDF pick; the last candidate absorbs rounding slack.
    double u = rng.uniform();
    std::size_t node = problem.epochs.front().size() - 1;
    for (std::size_t i = 0; i < problem.epochs.front().size(); ++i) {
      u -= problem.initial_probability(i);
      if (u < 0.0) {
        node = i;
        break;
      }
    }
    paths[n][0] = node;
    for (std::size_t t = 1; t < epochs; ++t) {
      const auto& children = problem.epochs[t - 1][node].children;
      double r = rng.uniform();
      std::size_t pick = children.back().child;
      for (const Transition& edge : children) {
        r -= edge.probability;
        if (r < 0.0) {
          pick = edge.child;
          break;
        }
      }
      node = pick;
      paths[n][t] = node;
    }
  }
  return paths;
}

Eigen::MatrixXd node_path_payoffs(const FiniteStopProblem& problem,
                                  const std::vector<std::vector<std::size_t>>& node_paths) {
  const auto epochs = static_cast<Eigen::Index>(problem.epochs.size());
  Eigen::MatrixXd out(static_cast<Eigen::Index>(node_paths.size()), epochs);
  for (std::size_t n = 0; n < node_paths.size(); ++n)
    for (Eigen::Index t = 0; t < epochs; ++t)
      out(static_cast<Eigen::Index>(n), t) =
          problem.epochs[static_cast<std::size_t>(t)][node_paths[n][static_cast<std::size_t>(t)]].exit_payoff;
  return out;
}

}  // namespace optstop
