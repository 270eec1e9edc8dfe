#ifndef OPTSTOP_SNELL_HPP
#define OPTSTOP_SNELL_HPP

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "optstop/model.hpp"

namespace optstop {

struct Transition {
  std::size_t child = 0;  ///< index into the next epoch's node list
  double probability = 0.0;
};

struct StopNode {
  double exit_payoff = 0.0;
  std::vector<Transition> children;  ///< empty exactly at the terminal epoch
};

/// An explicit finite filtration: nodes per epoch, each node an information
/// state, with transition probabilities to the next epoch. `initial` is the
/// distribution over epoch-0 nodes (empty means a single root).
struct FiniteStopProblem {
  std::vector<std::vector<StopNode>> epochs;
  std::vector<double> initial;

  int horizon() const { return static_cast<int>(epochs.size()) - 1; }
  std::size_t node_count() const;
  double initial_probability(std::size_t node) const;

  /// Throws std::invalid_argument on malformed transition rows, bad child
  /// indices, non-finite payoffs, or probabilities not summing to 1 +- 1e-12.
  void validate() const;
};

/// Absolute tolerance for the U = H stopping test.
inline constexpr double kStopTolerance = 1e-12;

struct SnellSolution {
  std::vector<std::vector<double>> envelope;  ///< U per node
  std::vector<std::vector<char>> stop;        ///< 1 where U = H within kStopTolerance
  double root_value = 0.0;                    ///< E[U_0] under the initial distribution
};

/// U_T = H_T; U_t = max(H_t, sum_c P(c) U_{t+1}(c)).
SnellSolution backward_induction(const FiniteStopProblem& problem);

/// First epoch whose node carries a stop label.
class StoppingRule {
 public:
  explicit StoppingRule(std::vector<std::vector<char>> stop) : stop_(std::move(stop)) {}

  bool stops(int t, std::size_t node) const { return stop_[static_cast<std::size_t>(t)][node] != 0; }

  /// `node_path[t]` is the node index realized at epoch t.
  int stopping_time(std::span<const std::size_t> node_path) const;

 private:
  std::vector<std::vector<char>> stop_;
};

StoppingRule tau_min(const FiniteStopProblem& problem, const SnellSolution& solution);

/// Exact E[H_tau] for the adapted rule "stop at the first node where
/// stop_at(t, node) holds", forced at the terminal epoch.
double expected_stopped_payoff(const FiniteStopProblem& problem,
                               const std::function<bool(int, std::size_t)>& stop_at);

/// Probabilists' Gauss-Hermite rule with weights normalized to sum to 1, so
/// sum w_i x_i^k matches the standard-normal moments for k < 2 * levels.
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite_rule(int levels);

/// Per-node model state carried by a discretized consumer problem.
struct LatticeState {
  double valuation = 0.0;
  double seller_mean = 0.0;
  double seller_variance = 0.0;
  double price = 0.0;
  double purchase = 0.0;
};

struct DiscretizedProblem {
  FiniteStopProblem problem;
  std::vector<std::vector<LatticeState>> states;
};

inline constexpr std::size_t kDefaultNodeBudget = 10000;

/// Finite tree version of the Gaussian consumer model. v_0 (unless fixed),
/// each valuation shock and each observation noise are replaced by `levels`
/// Gauss-Hermite support points; one epoch therefore branches levels^2 ways
/// (product rule over the two independent shocks). The seller recursion runs
/// on the quantized observations. Throws std::length_error when the tree
/// would exceed `node_budget` nodes.
DiscretizedProblem discretize_consumer_problem(const ModelParams& params, int levels,
                                               std::size_t node_budget = kDefaultNodeBudget);

/// Samples `count` node paths (one node index per epoch) from the problem's
/// transition law.
std::vector<std::vector<std::size_t>> sample_node_paths(const FiniteStopProblem& problem,
                                                        std::size_t count, std::uint64_t seed,
                                                        std::uint64_t substream);

/// Exit payoffs along sampled node paths, as an N x (T+1) matrix.
Eigen::MatrixXd node_path_payoffs(const FiniteStopProblem& problem,
                                  const std::vector<std::vector<std::size_t>>& node_paths);

}  // namespace optstop

#endif  // OPTSTOP_SNELL_HPP
