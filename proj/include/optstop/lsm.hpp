#ifndef OPTSTOP_LSM_HPP
#define OPTSTOP_LSM_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "optstop/paths.hpp"
#include "optstop/regression.hpp"

namespace optstop {

struct PolicyMetadata {
  std::size_t n_train = 0;
  std::uint64_t seed = 0;
  std::string backend = "kernel";
  KernelSpec kernel;
  int poly_degree = 3;
  std::size_t support_cap = 0;
  bool merge_duplicates = false;
  /// Every non-literal choice active at training time, by short name.
  std::vector<std::string> deviations;
  /// Free-form description of the run that produced the policy (config echo).
  std::string provenance;
};

/// Continuation-value estimators f_0..f_{T-1}.
class StoppingPolicy {
 public:
  StoppingPolicy() = default;
  StoppingPolicy(std::vector<FittedRegressor> regressors, PolicyMetadata metadata);

  int horizon() const { return static_cast<int>(regressors_.size()); }
  const FittedRegressor& regressor(int t) const { return regressors_.at(static_cast<std::size_t>(t)); }
  const std::vector<FittedRegressor>& regressors() const { return regressors_; }
  const PolicyMetadata& metadata() const { return metadata_; }

 private:
  std::vector<FittedRegressor> regressors_;
  PolicyMetadata metadata_;
};

/// Raised when a regression fails during training; carries the epoch.
class TrainingError : public std::runtime_error {
 public:
  TrainingError(int t, const std::string& what)
      : std::runtime_error("train: regression failed at t = " + std::to_string(t) + ": " + what), t_(t) {}
  int epoch() const { return t_; }

 private:
  int t_;
};

/// N x (T+1) realized payoffs under the trained rule. Each row holds at most
/// one nonzero entry, equal to H at that (path, time).
struct CashflowMatrix {
  Eigen::MatrixXd values;
};

struct TrainingResult {
  StoppingPolicy policy;
  CashflowMatrix cashflow;
  Eigen::VectorXi exit_time;  ///< per-path time of the realized cashflow
};

/// Backward regression over sample paths of exit payoffs (N x (T+1)).
///
/// For t = T-1..0: the in-the-money set is {n : H_t^n > 0}; f_t is zero when
/// that set is empty and otherwise regresses each path's realized future
/// cashflow on its feature at t. Then every path with H_t^n > f_t(feature)
/// is moved to stop at t. The future cashflow of each row is kept as a
/// single (time, value) pair. `features`, when given, replaces H as the
/// regression input (same shape); H still selects the in-the-money set.
TrainingResult train(const Eigen::Ref<const Eigen::MatrixXd>& exit_payoffs, const RegressionSpec& spec,
                     const Eigen::MatrixXd* features = nullptr);

enum class Action { purchase, reject };

std::string_view to_string(Action action);

struct ExitDecision {
  int t = 0;
  Action action = Action::reject;
  double payoff = 0.0;
};

/// One online step of the trained rule. `h_prefix` holds H_0..H_t. Returns
/// nothing to continue. Before T an exit is a purchase when pi_t > 0 and a
/// reject otherwise; at T it is a purchase iff H_T > 0.
std::optional<ExitDecision> decide(const StoppingPolicy& policy, std::span<const double> h_prefix, double pi_t);

/// Greedy rule: purchase at the first t with H_t > 0, reject at T otherwise.
std::optional<ExitDecision> myopic_decide(std::span<const double> h_prefix, double pi_t, int horizon);

/// Runs a rule over H and pi, feeding only prefixes, until it exits.
ExitDecision run_policy(const StoppingPolicy& policy, std::span<const double> h, std::span<const double> pi);
ExitDecision run_myopic(std::span<const double> h, std::span<const double> pi);

struct StrategyOutcome {
  ExitDecision decision;
  double price = 0.0;            ///< offered price at the exit epoch
  double valuation_mean = 0.0;   ///< v_t at exit
  double valuation_std = 0.0;    ///< sqrt((T - t)) * sigma_eps at exit
};

struct TrialRecord {
  std::size_t trial = 0;
  StrategyOutcome algorithmic;
  StrategyOutcome myopic;
  double difference() const { return algorithmic.decision.payoff - myopic.decision.payoff; }
};

struct EvaluationAggregates {
  double mean_algorithmic = 0.0;
  double mean_myopic = 0.0;
  double mean_difference = 0.0;
  double stderr_difference = 0.0;
  std::size_t purchases_algorithmic = 0;
  std::size_t purchases_myopic = 0;
  std::size_t equal_payoff = 0;
};

struct EvaluationReport {
  std::vector<TrialRecord> records;
  EvaluationAggregates aggregates;
  bool paired = true;
  std::uint64_t checksum_algorithmic = 0;
  std::uint64_t checksum_myopic = 0;
};

/// Recomputes every aggregate from the per-trial records.
EvaluationAggregates aggregate(const std::vector<TrialRecord>& records);

/// Runs both strategies path by path. With `myopic_paths == nullptr` the
/// comparison is paired on `paths`; otherwise the myopic rule runs on the
/// given independent set (same size required).
EvaluationReport evaluate(const StoppingPolicy& policy, const std::vector<SamplePath>& paths, double sigma_eps,
                          const std::vector<SamplePath>* myopic_paths = nullptr);

}  // namespace optstop

#endif  // OPTSTOP_LSM_HPP
