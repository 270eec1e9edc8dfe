#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"

#include "optstop/consumer.hpp"
#include "optstop/lsm.hpp"
#include "optstop/paths.hpp"
#include "optstop/snell.hpp"
#include "support.hpp"

using namespace optstop;

namespace {

std::span<const double> span_of(const Eigen::VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

StoppingPolicy constant_policy(int horizon, double level) {
  std::vector<FittedRegressor> regs;
  for (int t = 0; t < horizon; ++t) regs.push_back(FittedRegressor::polynomial(Eigen::VectorXd::Constant(1, level)));
  return StoppingPolicy(regs, {});
}

}  // namespace

TEST_SUITE("lsm") {

TEST_CASE("hand trace on a single two-epoch path") {
  Eigen::MatrixXd h(1, 2);
  h << 0.5, 0.2;
  RegressionSpec spec;
  spec.kernel.ridge = 0.0;
  const TrainingResult r = train(h, spec);
  CHECK(r.policy.horizon() == 1);
  CHECK(r.policy.regressor(0).predict(0.5) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(r.cashflow.values(0, 0) == 0.5);
  CHECK(r.cashflow.values(0, 1) == 0.0);
  CHECK(r.exit_time[0] == 0);
  const std::vector<double> prefix{0.5};
  const auto d = decide(r.policy, prefix, 0.5);
  REQUIRE(d.has_value());
  CHECK(d->t == 0);
  CHECK(d->action == Action::purchase);
}

TEST_CASE("all-zero payoffs train zero regressors") {
  const Eigen::MatrixXd h = Eigen::MatrixXd::Zero(20, 6);
  const TrainingResult r = train(h, RegressionSpec{});
  for (const FittedRegressor& f : r.policy.regressors()) CHECK(f.kind() == FittedRegressor::Kind::zero);
  CHECK(r.cashflow.values.isZero(0.0));
}

TEST_CASE("a zero regressor step stops iff H > 0") {
  const StoppingPolicy p(std::vector<FittedRegressor>(3), {});
  const std::vector<double> zero{0.0}, pos{0.1};
  CHECK_FALSE(decide(p, zero, -0.4).has_value());
  CHECK(decide(p, pos, 0.1).has_value());
}

TEST_CASE("cashflow rows hold one entry equal to H") {
  const ModelParams params;
  const Eigen::MatrixXd h = exit_matrix(generate_paths(params, substream::training, 500));
  for (RegressionBackend backend : {RegressionBackend::kernel, RegressionBackend::polynomial, RegressionBackend::tabular}) {
    RegressionSpec spec;
    spec.backend = backend;
    const TrainingResult r = train(h, spec);
    CHECK(r.policy.horizon() == params.horizon);
    for (Eigen::Index n = 0; n < h.rows(); ++n) {
      int nonzero = 0;
      for (Eigen::Index t = 0; t < h.cols(); ++t) {
        if (r.cashflow.values(n, t) != 0.0) {
          ++nonzero;
          CHECK(r.cashflow.values(n, t) == h(n, t));
          CHECK(r.exit_time[n] == t);
        }
      }
      CHECK(nonzero <= 1);
    }
  }
}

TEST_CASE("decide terminal and early branches") {
  const StoppingPolicy p = constant_policy(3, 0.1);
  const std::vector<double> end_pos{0.0, 0.0, 0.0, 0.3};
  const auto a = decide(p, end_pos, 0.3);
  REQUIRE(a);
  CHECK(a->t == 3);
  CHECK(a->action == Action::purchase);
  CHECK(a->payoff == 0.3);

  const std::vector<double> end_zero{0.0, 0.0, 0.0, 0.0};
  const auto b = decide(p, end_zero, -0.2);
  REQUIRE(b);
  CHECK(b->action == Action::reject);
  CHECK(b->payoff == 0.0);

  const std::vector<double> early{0.4};
  const auto c = decide(p, early, 0.4);
  REQUIRE(c);
  CHECK(c->t == 0);
  CHECK(c->action == Action::purchase);
  CHECK(c->payoff == 0.4);

  const std::vector<double> tie{0.1};
  CHECK_FALSE(decide(p, tie, 0.1).has_value());

  const std::vector<double> too_long{0, 0, 0, 0, 0};
  CHECK_THROWS_AS(decide(p, too_long, 0.0), std::invalid_argument);
}

TEST_CASE("zero-payoff early exit is a reject") {
  const StoppingPolicy p = constant_policy(3, -0.5);
  const std::vector<double> h{0.0};
  const auto d = decide(p, h, -0.3);
  REQUIRE(d);
  CHECK(d->action == Action::reject);
  CHECK(d->payoff == 0.0);
}

TEST_CASE("myopic rule") {
  const std::vector<double> h{0.0, 0.0, 0.1, 0.5, 0.0};
  const std::vector<double> pi{-0.1, -0.2, 0.1, 0.5, -0.1};
  const ExitDecision d = run_myopic(h, pi);
  CHECK(d.t == 2);
  CHECK(d.action == Action::purchase);
  CHECK(d.payoff == 0.1);

  const std::vector<double> zeros(5, 0.0), negs(5, -1.0);
  const ExitDecision r = run_myopic(zeros, negs);
  CHECK(r.t == 4);
  CHECK(r.action == Action::reject);
  CHECK(r.payoff == 0.0);

  const std::vector<double> first{0.2, 0.9, 0.9};
  CHECK(run_myopic(first, first).t == 0);
}

TEST_CASE("decisions satisfy the exit invariants and terminate") {
  const ModelParams params;
  const auto train_set = generate_paths(params, substream::training, 300);
  const StoppingPolicy policy = train(exit_matrix(train_set), RegressionSpec{}).policy;
  for (const SamplePath& path : generate_paths(params, substream::test, 300)) {
    for (const ExitDecision& d : {run_policy(policy, span_of(path.exit), span_of(path.purchase)),
                                  run_myopic(span_of(path.exit), span_of(path.purchase))}) {
      CHECK(d.t >= 0);
      CHECK(d.t <= params.horizon);
      if (d.action == Action::purchase) CHECK(d.payoff == path.purchase[d.t]);
      else CHECK(d.payoff == 0.0);
    }
  }
}

TEST_CASE("myopic against itself differs by zero everywhere") {
  const ModelParams params;
  const auto paths = generate_paths(params, substream::test, 200);
  const StoppingPolicy as_myopic(std::vector<FittedRegressor>(static_cast<std::size_t>(params.horizon)), {});
  const EvaluationReport report = evaluate(as_myopic, paths, params.sigma_eps);
  for (const TrialRecord& r : report.records) CHECK(r.difference() == 0.0);
  CHECK(report.aggregates.equal_payoff == paths.size());
  CHECK(report.checksum_algorithmic == report.checksum_myopic);
}

TEST_CASE("decisions are adapted: future entries never matter") {
  const ModelParams params;
  const StoppingPolicy policy = train(exit_matrix(generate_paths(params, substream::training, 300)), RegressionSpec{}).policy;
  RngStream noise(1, 0, 0);
  for (const SamplePath& path : generate_paths(params, substream::test, 200)) {
    for (int t = 0; t <= params.horizon; ++t) {
      Eigen::VectorXd h = path.exit, pi = path.purchase;
      for (int s = t + 1; s <= params.horizon; ++s) {
        pi[s] = noise.normal(0.0, 1.0);
        h[s] = exit_payoff(pi[s]);
      }
      const auto n = static_cast<std::size_t>(t) + 1;
      const auto a = decide(policy, span_of(path.exit).first(n), path.purchase[t]);
      const auto b = decide(policy, span_of(h).first(n), pi[t]);
      CHECK(a.has_value() == b.has_value());
      if (a && b) CHECK(a->payoff == b->payoff);
      const auto c = myopic_decide(span_of(path.exit).first(n), path.purchase[t], params.horizon);
      const auto d = myopic_decide(span_of(h).first(n), pi[t], params.horizon);
      CHECK(c.has_value() == d.has_value());
    }
  }
}

TEST_CASE("trained policy does not lose to waiting until the horizon") {
  const ModelParams params;
  const StoppingPolicy policy = train(exit_matrix(generate_paths(params, substream::training, 500)), RegressionSpec{}).policy;
  const auto test = generate_paths(params, substream::test, 1000);
  const EvaluationReport report = evaluate(policy, test, params.sigma_eps);
  double sum = 0.0, sum_sq = 0.0;
  for (const SamplePath& p : test) {
    sum += p.exit[params.horizon];
    sum_sq += p.exit[params.horizon] * p.exit[params.horizon];
  }
  const double n = static_cast<double>(test.size());
  const double terminal = sum / n;
  double s2 = 0.0;
  for (const TrialRecord& r : report.records) s2 += std::pow(r.algorithmic.decision.payoff - report.aggregates.mean_algorithmic, 2);
  const double se = std::sqrt(s2 / (n - 1) / n + (sum_sq / n - terminal * terminal) / n);
  CHECK(report.aggregates.mean_algorithmic >= terminal - 3.0 * se);
}

TEST_CASE("aggregates are recomputable from records") {
  const ModelParams params;
  const StoppingPolicy policy = train(exit_matrix(generate_paths(params, substream::training, 200)), RegressionSpec{}).policy;
  const EvaluationReport report = evaluate(policy, generate_paths(params, substream::test, 400), params.sigma_eps);
  double a = 0.0, m = 0.0;
  std::size_t pa = 0, pm = 0, eq = 0;
  for (const TrialRecord& r : report.records) {
    a += r.algorithmic.decision.payoff;
    m += r.myopic.decision.payoff;
    pa += r.algorithmic.decision.action == Action::purchase;
    pm += r.myopic.decision.action == Action::purchase;
    eq += r.algorithmic.decision.payoff == r.myopic.decision.payoff;
  }
  CHECK(std::abs(report.aggregates.mean_algorithmic - a / 400) <= 1e-12);
  CHECK(std::abs(report.aggregates.mean_myopic - m / 400) <= 1e-12);
  CHECK(std::abs(report.aggregates.mean_difference - (a - m) / 400) <= 1e-12);
  CHECK(report.aggregates.purchases_algorithmic == pa);
  CHECK(report.aggregates.purchases_myopic == pm);
  CHECK(report.aggregates.equal_payoff == eq);
}

TEST_CASE("metadata lists the active deviations") {
  const Eigen::MatrixXd h = exit_matrix(generate_paths(ModelParams{}, substream::training, 50));
  const auto meta = train(h, RegressionSpec{}).policy.metadata();
  auto has = [&](const char* name) {
    return std::find(meta.deviations.begin(), meta.deviations.end(), name) != meta.deviations.end();
  };
  CHECK(has("ridge_regularization"));
  CHECK(has("duplicate_feature_merge"));
  CHECK(has("support_subsample_cap"));
  CHECK(has("early_exit_rejects_nonpositive_purchase"));
  CHECK(meta.n_train == 50);

  RegressionSpec plain;
  plain.kernel.ridge = 0.0;
  plain.merge_duplicates = false;
  plain.support_cap = 0;
  plain.backend = RegressionBackend::tabular;
  const auto m2 = train(h, plain).policy.metadata();
  CHECK(m2.backend == "tabular");
  CHECK(m2.deviations == std::vector<std::string>{"early_exit_rejects_nonpositive_purchase"});
}

TEST_CASE("custom feature stream") {
  const auto paths = generate_paths(ModelParams{}, substream::training, 100);
  const Eigen::MatrixXd h = exit_matrix(paths);
  const Eigen::MatrixXd pi = purchase_matrix(paths);
  RegressionSpec spec;
  spec.backend = RegressionBackend::polynomial;
  const TrainingResult r = train(h, spec, &pi);
  const auto& dev = r.policy.metadata().deviations;
  CHECK(std::find(dev.begin(), dev.end(), "custom_feature_stream") != dev.end());
  const Eigen::MatrixXd wrong = Eigen::MatrixXd::Zero(3, 3);
  CHECK_THROWS_AS(train(h, spec, &wrong), std::invalid_argument);
}

TEST_CASE("training input validation and error epochs") {
  CHECK_THROWS_AS(train(Eigen::MatrixXd(0, 3), RegressionSpec{}), std::invalid_argument);
  CHECK_THROWS_AS(train(Eigen::MatrixXd::Ones(3, 1), RegressionSpec{}), std::invalid_argument);
  CHECK_THROWS_AS(train(-Eigen::MatrixXd::Ones(3, 3), RegressionSpec{}), std::invalid_argument);

  Eigen::MatrixXd h(2, 3);
  h << 0.5, 0.5, 0.2,
       0.5, 0.5, 0.9;
  RegressionSpec singular;
  singular.kernel.ridge = 0.0;
  singular.merge_duplicates = false;
  try {
    train(h, singular);
    FAIL("expected a training error");
  } catch (const TrainingError& e) {
    CHECK(e.epoch() == 1);
  }
}

TEST_CASE("in-sample value on a small lattice is close to the exact value") {
  ModelParams params;
  params.horizon = 3;
  const DiscretizedProblem d = discretize_consumer_problem(params, 3);
  const double u0 = backward_induction(d.problem).root_value;
  const auto nodes = sample_node_paths(d.problem, 100000, 1, substream::tree_sampling);
  RegressionSpec spec;
  spec.backend = RegressionBackend::tabular;
  const TrainingResult r = train(node_path_payoffs(d.problem, nodes), spec);
  const double in_sample = r.cashflow.values.rowwise().sum().mean();
  CHECK(std::abs(in_sample - u0) <= 0.01 * u0);
}

}
