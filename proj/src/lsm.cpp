#include "optstop/lsm.hpp"

#include <cmath>
#include <vector>

namespace optstop {

StoppingPolicy::StoppingPolicy(std::vector<FittedRegressor> regressors, PolicyMetadata metadata)
    : regressors_(std::move(regressors)), metadata_(std::move(metadata)) {
  if (regressors_.empty()) throw std::invalid_argument("StoppingPolicy: needs at least one regressor");
}

namespace {

PolicyMetadata make_metadata(std::size_t n_train, const RegressionSpec& spec, bool custom_features) {
  PolicyMetadata meta;
  meta.n_train = n_train;
  meta.seed = spec.seed;
  meta.backend = std::string(to_string(spec.backend));
  meta.kernel = spec.kernel;
  meta.poly_degree = spec.poly_degree;
  meta.support_cap = spec.support_cap;
  meta.merge_duplicates = spec.merge_duplicates;
  if (spec.backend == RegressionBackend::kernel) {
    if (spec.kernel.ridge > 0.0) meta.deviations.push_back("ridge_regularization");
    if (spec.merge_duplicates) meta.deviations.push_back("duplicate_feature_merge");
    if (spec.support_cap > 0) meta.deviations.push_back("support_subsample_cap");
  }
  meta.deviations.push_back("early_exit_rejects_nonpositive_purchase");
  if (custom_features) meta.deviations.push_back("custom_feature_stream");
  return meta;
}

}  // namespace

TrainingResult train(const Eigen::Ref<const Eigen::MatrixXd>& exit_payoffs, const RegressionSpec& spec,
                     const Eigen::MatrixXd* features) {
  const Eigen::Index n_paths = exit_payoffs.rows();
  const Eigen::Index epochs = exit_payoffs.cols();
  if (n_paths < 1) throw std::invalid_argument("train: need at least one path");
  if (epochs < 2) throw std::invalid_argument("train: need a horizon of at least 1");
  if (!exit_payoffs.allFinite() || (exit_payoffs.array() < 0.0).any())
    throw std::invalid_argument("train: exit payoffs must be finite and non-negative");
  if (features && (features->rows() != n_paths || features->cols() != epochs))
    throw std::invalid_argument("train: feature matrix shape differs from the payoff matrix");
  const Eigen::MatrixXd feature = features ? *features : Eigen::MatrixXd(exit_payoffs);

  const int horizon = static_cast<int>(epochs) - 1;
  // Single realized future cashflow per row.
  Eigen::VectorXi cash_time = Eigen::VectorXi::Constant(n_paths, horizon);
  Eigen::VectorXd cash_value = exit_payoffs.col(horizon);

  std::vector<FittedRegressor> regressors(static_cast<std::size_t>(horizon));
  std::vector<Eigen::Index> in_money;
  in_money.reserve(static_cast<std::size_t>(n_paths));

  for (int t = horizon - 1; t >= 0; --t) {
    in_money.clear();
    for (Eigen::Index n = 0; n < n_paths; ++n)
      if (exit_payoffs(n, t) > 0.0) in_money.push_back(n);

    FittedRegressor model = zero_regressor();
    if (!in_money.empty()) {
      Eigen::VectorXd xs(static_cast<Eigen::Index>(in_money.size()));
      Eigen::VectorXd ys(xs.size());
      for (std::size_t i = 0; i < in_money.size(); ++i) {
        xs[static_cast<Eigen::Index>(i)] = feature(in_money[i], t);
        ys[static_cast<Eigen::Index>(i)] = cash_value[in_money[i]];
      }
      try {
        model = fit(xs, ys, spec, static_cast<std::uint64_t>(t));
      } catch (const std::exception& err) {
        throw TrainingError(t, err.what());
      }
    }

    const Eigen::VectorXd continuation = model.predict(feature.col(t));
    for (Eigen::Index n = 0; n < n_paths; ++n) {
      if (exit_payoffs(n, t) > continuation[n]) {
        cash_time[n] = t;
        cash_value[n] = exit_payoffs(n, t);
      }
    }
    regressors[static_cast<std::size_t>(t)] = std::move(model);
  }

  TrainingResult result;
  result.cashflow.values = Eigen::MatrixXd::Zero(n_paths, epochs);
  for (Eigen::Index n = 0; n < n_paths; ++n) result.cashflow.values(n, cash_time[n]) = cash_value[n];
  result.exit_time = std::move(cash_time);
  result.policy = StoppingPolicy(std::move(regressors),
                                 make_metadata(static_cast<std::size_t>(n_paths), spec, features != nullptr));
  return result;
}

std::string_view to_string(Action action) { return action == Action::purchase ? "purchase" : "reject"; }

namespace {

ExitDecision terminal_decision(int horizon, double h_terminal) {
  return h_terminal > 0.0 ? ExitDecision{horizon, Action::purchase, h_terminal}
                          : ExitDecision{horizon, Action::reject, 0.0};
}

ExitDecision early_exit(int t, double h, double pi) {
  return pi > 0.0 ? ExitDecision{t, Action::purchase, h} : ExitDecision{t, Action::reject, h};
}

}  // namespace

std::optional<ExitDecision> decide(const StoppingPolicy& policy, std::span<const double> h_prefix, double pi_t) {
  const int horizon = policy.horizon();
  if (h_prefix.empty()) throw std::invalid_argument("decide: empty payoff prefix");
  if (h_prefix.size() > static_cast<std::size_t>(horizon) + 1)
    throw std::invalid_argument("decide: payoff prefix is longer than T + 1");
  const int t = static_cast<int>(h_prefix.size()) - 1;
  const double h = h_prefix.back();
  if (t == horizon) return terminal_decision(horizon, h);
  if (h > policy.regressor(t).predict(h)) return early_exit(t, h, pi_t);
  return std::nullopt;
}

std::optional<ExitDecision> myopic_decide(std::span<const double> h_prefix, double pi_t, int horizon) {
  if (h_prefix.empty()) throw std::invalid_argument("myopic_decide: empty payoff prefix");
  if (h_prefix.size() > static_cast<std::size_t>(horizon) + 1)
    throw std::invalid_argument("myopic_decide: payoff prefix is longer than T + 1");
  const int t = static_cast<int>(h_prefix.size()) - 1;
  const double h = h_prefix.back();
  if (t == horizon) return terminal_decision(horizon, h);
  if (h > 0.0) return early_exit(t, h, pi_t);
  return std::nullopt;
}

namespace {

template <typename Rule>
ExitDecision run_rule(Rule rule, std::span<const double> h, std::span<const double> pi) {
  if (h.size() != pi.size() || h.empty()) throw std::invalid_argument("run_policy: H and pi lengths differ");
  for (std::size_t t = 0; t < h.size(); ++t)
    if (auto exit = rule(h.first(t + 1), pi[t])) return *exit;
  throw std::logic_error("run_policy: rule never exited");
}

}  // namespace

ExitDecision run_policy(const StoppingPolicy& policy, std::span<const double> h, std::span<const double> pi) {
  if (h.size() != static_cast<std::size_t>(policy.horizon()) + 1)
    throw std::invalid_argument("run_policy: path horizon differs from the policy horizon");
  return run_rule([&](std::span<const double> prefix, double p) { return decide(policy, prefix, p); }, h, pi);
}

ExitDecision run_myopic(std::span<const double> h, std::span<const double> pi) {
  const int horizon = static_cast<int>(h.size()) - 1;
  return run_rule([&](std::span<const double> prefix, double p) { return myopic_decide(prefix, p, horizon); }, h,
                  pi);
}

EvaluationAggregates aggregate(const std::vector<TrialRecord>& records) {
  EvaluationAggregates agg;
  if (records.empty()) return agg;
  const double m = static_cast<double>(records.size());
  double sum_sq = 0.0;
  for (const TrialRecord& r : records) {
    agg.mean_algorithmic += r.algorithmic.decision.payoff;
    agg.mean_myopic += r.myopic.decision.payoff;
    agg.mean_difference += r.difference();
    if (r.algorithmic.decision.action == Action::purchase) ++agg.purchases_algorithmic;
    if (r.myopic.decision.action == Action::purchase) ++agg.purchases_myopic;
    if (r.algorithmic.decision.payoff == r.myopic.decision.payoff) ++agg.equal_payoff;
  }
  agg.mean_algorithmic /= m;
  agg.mean_myopic /= m;
  agg.mean_difference /= m;
  for (const TrialRecord& r : records) {
    const double d = r.difference() - agg.mean_difference;
    sum_sq += d * d;
  }
  agg.stderr_difference = records.size() > 1 ? std::sqrt(sum_sq / (m - 1.0) / m) : 0.0;
  return agg;
}

namespace {

std::span<const double> as_span(const Eigen::VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

StrategyOutcome describe(const ExitDecision& decision, const SamplePath& path, double sigma_eps) {
  const auto t = static_cast<Eigen::Index>(decision.t);
  StrategyOutcome out;
  out.decision = decision;
  out.price = path.price[t];
  out.valuation_mean = path.valuation[t];
  out.valuation_std = std::sqrt(static_cast<double>(path.horizon() - decision.t)) * sigma_eps;
  return out;
}

}  // namespace

EvaluationReport evaluate(const StoppingPolicy& policy, const std::vector<SamplePath>& paths, double sigma_eps,
                          const std::vector<SamplePath>* myopic_paths) {
  if (myopic_paths && myopic_paths->size() != paths.size())
    throw std::invalid_argument("evaluate: independent myopic set must match the test set size");
  const std::vector<SamplePath>& baseline = myopic_paths ? *myopic_paths : paths;

  EvaluationReport report;
  report.paired = myopic_paths == nullptr;
  report.records.reserve(paths.size());
  for (std::size_t n = 0; n < paths.size(); ++n) {
    const SamplePath& path = paths[n];
    if (path.horizon() != policy.horizon())
      throw std::invalid_argument("evaluate: path horizon differs from the policy horizon");
    const SamplePath& base = baseline[n];
    TrialRecord record;
    record.trial = n;
    record.algorithmic = describe(run_policy(policy, as_span(path.exit), as_span(path.purchase)), path, sigma_eps);
    record.myopic = describe(run_myopic(as_span(base.exit), as_span(base.purchase)), base, sigma_eps);
    report.records.push_back(record);
  }
  report.aggregates = aggregate(report.records);
  report.checksum_algorithmic = checksum(paths);
  report.checksum_myopic = checksum(baseline);
  return report;
}

}  // namespace optstop
