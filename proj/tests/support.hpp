#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "optstop/model.hpp"
#include "optstop/rng.hpp"
#include "optstop/snell.hpp"

namespace testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(OPTSTOP_FIXTURE_DIR) / name;
}

// Fresh empty directory under the system temp dir; removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("optstop-" + tag + "-" + std::to_string(optstop::mix64(rd()) & 0xffffffffu));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

// Depth-first walk of every root-to-stop history, accumulating probability
// mass. Written independently of the library's forward propagation.
inline double dfs_value(const optstop::FiniteStopProblem& problem,
                        const std::function<bool(int, std::size_t)>& stop_at) {
  const int horizon = problem.horizon();
  std::function<double(int, std::size_t)> walk = [&](int t, std::size_t node) -> double {
    const optstop::StopNode& n = problem.epochs[static_cast<std::size_t>(t)][node];
    if (t == horizon || stop_at(t, node)) return n.exit_payoff;
    double acc = 0.0;
    for (const optstop::Transition& c : n.children) acc += c.probability * walk(t + 1, c.child);
    return acc;
  };
  double total = 0.0;
  for (std::size_t r = 0; r < problem.epochs.front().size(); ++r)
    total += problem.initial_probability(r) * walk(0, r);
  return total;
}

struct Enumeration {
  std::vector<double> values;  // one per labeling of the non-terminal nodes
  double best = -HUGE_VAL;
};

// Every deterministic adapted rule is a stop/continue label on each
// non-terminal node (stopping is forced at the horizon). Enumerates all
// 2^(non-terminal nodes) labelings.
inline Enumeration enumerate_rules(const optstop::FiniteStopProblem& problem) {
  std::vector<std::pair<int, std::size_t>> slots;
  for (int t = 0; t < problem.horizon(); ++t)
    for (std::size_t i = 0; i < problem.epochs[static_cast<std::size_t>(t)].size(); ++i) slots.emplace_back(t, i);
  if (slots.size() > 22) throw std::length_error("enumerate_rules: tree too large");

  std::vector<std::vector<char>> label(problem.epochs.size());
  for (std::size_t t = 0; t < problem.epochs.size(); ++t) label[t].assign(problem.epochs[t].size(), 0);

  Enumeration out;
  const std::uint64_t count = std::uint64_t{1} << slots.size();
  out.values.reserve(count);
  for (std::uint64_t mask = 0; mask < count; ++mask) {
    for (std::size_t k = 0; k < slots.size(); ++k)
      label[static_cast<std::size_t>(slots[k].first)][slots[k].second] = static_cast<char>((mask >> k) & 1u);
    const double v = dfs_value(problem, [&](int t, std::size_t i) { return label[static_cast<std::size_t>(t)][i] != 0; });
    out.values.push_back(v);
    if (v > out.best) out.best = v;
  }
  return out;
}

// Number of distinct stopping rules on a tree (labels below a stop are
// irrelevant): R(leaf) = 1, R(node) = 1 + prod R(child); roots multiply.
inline double count_distinct_rules(const optstop::FiniteStopProblem& problem) {
  std::function<double(int, std::size_t)> rules = [&](int t, std::size_t node) -> double {
    if (t == problem.horizon()) return 1.0;
    double prod = 1.0;
    for (const optstop::Transition& c : problem.epochs[static_cast<std::size_t>(t)][node].children)
      prod *= rules(t + 1, c.child);
    return 1.0 + prod;
  };
  double total = 1.0;
  for (std::size_t r = 0; r < problem.epochs.front().size(); ++r) total *= rules(0, r);
  return total;
}

// Random tree: `branching` children per node, uniform payoffs in [0, 1),
// Dirichlet-ish transition weights.
inline optstop::FiniteStopProblem random_tree(int horizon, int branching, std::uint64_t seed) {
  optstop::RngStream rng(seed, 99, 0);
  optstop::FiniteStopProblem p;
  p.epochs.resize(static_cast<std::size_t>(horizon) + 1);
  p.epochs[0].push_back({rng.uniform(), {}});
  for (int t = 0; t < horizon; ++t) {
    auto& next = p.epochs[static_cast<std::size_t>(t) + 1];
    for (optstop::StopNode& node : p.epochs[static_cast<std::size_t>(t)]) {
      std::vector<double> w(static_cast<std::size_t>(branching));
      double sum = 0.0;
      for (double& x : w) sum += (x = -std::log(rng.uniform()));
      for (double& x : w) {
        node.children.push_back({next.size(), x / sum});
        next.push_back({rng.uniform(), {}});
      }
      // Exact normalization: put rounding residue on the last edge.
      double partial = 0.0;
      for (std::size_t k = 0; k + 1 < node.children.size(); ++k) partial += node.children[k].probability;
      node.children.back().probability = 1.0 - partial;
    }
  }
  return p;
}

// One-shot conjugate posterior of v_t given y_1..y_t, assembled from the joint
// Gaussian of (v_0, eps_1..eps_t, xi_1..xi_t).
inline std::pair<double, double> batch_posterior(const optstop::ModelParams& params, const std::vector<double>& ys) {
  const auto t = static_cast<Eigen::Index>(ys.size());
  const double sv2 = params.sigma_v * params.sigma_v;
  const double se2 = params.sigma_eps * params.sigma_eps;
  const double sx2 = params.sigma_xi * params.sigma_xi;
  if (t == 0) return {params.mu_prior, sv2};
  Eigen::MatrixXd cov_yy(t, t);
  Eigen::VectorXd cov_vy(t);
  Eigen::VectorXd resid(t);
  for (Eigen::Index s = 0; s < t; ++s) {
    for (Eigen::Index r = 0; r < t; ++r)
      cov_yy(s, r) = sv2 + static_cast<double>(std::min(s, r) + 1) * se2 + (s == r ? sx2 : 0.0);
    cov_vy[s] = sv2 + static_cast<double>(s + 1) * se2;
    resid[s] = ys[static_cast<std::size_t>(s)] - params.mu_prior;
  }
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(cov_yy);
  const double mean = params.mu_prior + cov_vy.dot(ldlt.solve(resid));
  const double var = sv2 + static_cast<double>(t) * se2 - cov_vy.dot(ldlt.solve(cov_vy));
  return {mean, var};
}

// Maximizer of f over lo + k * step, k = 1..floor((hi - lo) / step).
template <typename F>
std::pair<double, double> grid_argmax(F f, double lo, double hi, double step) {
  const auto cells = static_cast<long>(std::floor((hi - lo) / step + 1e-9));
  double best_x = lo + step;
  double best_f = f(best_x);
  for (long k = 2; k <= cells; ++k) {
    const double x = lo + static_cast<double>(k) * step;
    const double v = f(x);
    if (v > best_f) {
      best_f = v;
      best_x = x;
    }
  }
  return {best_x, best_f};
}

}  // namespace testing
