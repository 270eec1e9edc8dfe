// optstop command-line front end: simulate, train, evaluate, trace, oracle.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "optstop/experiment.hpp"
#include "optstop/io.hpp"
#include "optstop/rng.hpp"
#include "optstop/snell.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace optstop;

namespace {

struct CommonOptions {
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string backend;
  bool paired = false;
  bool independent = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_backend) {
  cmd->add_option("--config", opts.config_file, "JSON config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", opts.seed, "RNG seed (overrides the config)");
  cmd->add_option("--out", opts.out, "output directory (replaced on success)");
  if (with_backend)
    cmd->add_option("--backend", opts.backend, "regression backend")
        ->check(CLI::IsMember({"kernel", "poly", "polynomial", "tabular"}));
}

ExperimentConfig resolve(const CommonOptions& opts) {
  ExperimentConfig config = opts.config_file.empty() ? ExperimentConfig{} : load_config(opts.config_file);
  if (opts.seed) config.model.seed = *opts.seed;
  if (!opts.out.empty()) config.output_dir = opts.out;
  if (!opts.backend.empty()) config.regression.backend = parse_backend(opts.backend);
  if (opts.paired) config.paired = true;
  if (opts.independent) config.paired = false;
  config.validate();
  return config;
}

json summary_line(const ExperimentResult& result) {
  const EvaluationAggregates& a = result.report.aggregates;
  return {{"mean_difference", a.mean_difference},
          {"mean_payoff_algorithmic", a.mean_algorithmic},
          {"mean_payoff_myopic", a.mean_myopic},
          {"purchases_algorithmic", a.purchases_algorithmic},
          {"purchases_myopic", a.purchases_myopic},
          {"equal_payoff_trials", a.equal_payoff}};
}

int cmd_simulate(const CommonOptions& opts, const std::string& set, std::optional<std::size_t> count) {
  ExperimentConfig config = resolve(opts);
  const bool train_set = set == "train";
  const std::size_t n = count.value_or(train_set ? config.n_train : config.n_test);
  const auto paths = generate_paths(config.model, train_set ? substream::training : substream::test, n);
  StagedDirectory staged(config.output_dir);
  std::ostringstream csv;
  write_paths_csv(csv, paths, config_preamble(config) + " set: " + set);
  write_text_file(staged.path() / "paths.csv", csv.str());
  staged.commit();
  std::cout << json{{"paths", n}, {"set", set}, {"file", (config.output_dir / "paths.csv").string()}}.dump() << '\n';
  return 0;
}

int cmd_train(const CommonOptions& opts, const std::string& paths_file) {
  ExperimentConfig config = resolve(opts);
  std::vector<SamplePath> paths;
  if (paths_file.empty()) {
    paths = training_paths(config);
  } else {
    std::ifstream in(paths_file);
    if (!in) throw std::runtime_error("cannot open '" + paths_file + "'");
    paths = read_paths_csv(in);
    if (paths.empty()) throw FormatError("paths csv: no paths");
    if (paths.front().horizon() != config.model.horizon) config.model.horizon = paths.front().horizon();
  }
  const StoppingPolicy policy = train_policy(config, paths);
  StagedDirectory staged(config.output_dir);
  save_policy(policy, staged.path() / "policy.json");
  staged.commit();
  std::cout << json{{"policy", (config.output_dir / "policy.json").string()},
                    {"horizon", policy.horizon()},
                    {"n_train", paths.size()}}
                   .dump()
            << '\n';
  return 0;
}

int cmd_evaluate(const CommonOptions& opts, const std::string& policy_file) {
  const ExperimentConfig config = resolve(opts);
  const ExperimentResult result =
      policy_file.empty() ? run_experiment(config) : run_evaluation(config, load_policy(policy_file));
  std::cout << summary_line(result).dump() << '\n';
  return 0;
}

int cmd_trace(const CommonOptions& opts, const std::string& policy_file, std::size_t index) {
  const ExperimentConfig config = resolve(opts);
  const StoppingPolicy policy =
      policy_file.empty() ? train_policy(config, training_paths(config)) : load_policy(policy_file);
  if (policy.horizon() != config.model.horizon) throw std::invalid_argument("trace: policy horizon mismatch");
  const SamplePath path = generate_path(config.model, substream::test, index);
  StagedDirectory staged(config.output_dir);
  write_text_file(staged.path() / "trace.csv",
                  trace_csv(path, policy, config.model, config_preamble(config) + " trace_index: " + std::to_string(index)));
  staged.commit();
  std::cout << json{{"trace", (config.output_dir / "trace.csv").string()}, {"index", index}}.dump() << '\n';
  return 0;
}

int cmd_oracle(const CommonOptions& opts, const std::string& fixture, std::optional<int> levels) {
  FiniteStopProblem problem;
  if (!fixture.empty()) {
    problem = load_problem(fixture);
  } else if (levels) {
    problem = discretize_consumer_problem(resolve(opts).model, *levels).problem;
  } else {
    throw std::invalid_argument("oracle: pass --fixture <file> or --levels <n>");
  }
  const SnellSolution solution = backward_induction(problem);
  json envelope = json::array();
  json stop = json::array();
  for (std::size_t t = 0; t < solution.envelope.size(); ++t) {
    envelope.push_back(solution.envelope[t]);
    json labels = json::array();
    for (char s : solution.stop[t]) labels.push_back(s != 0);
    stop.push_back(std::move(labels));
  }
  const StoppingRule rule = tau_min(problem, solution);
  const double attained = expected_stopped_payoff(problem, [&](int t, std::size_t i) { return rule.stops(t, i); });
  json out = {{"root_value", solution.root_value},
              {"tau_min_expected_payoff", attained},
              {"horizon", problem.horizon()},
              {"nodes", problem.node_count()},
              {"envelope", envelope},
              {"stop", stop}};
  if (!opts.out.empty()) {
    StagedDirectory staged(opts.out);
    write_text_file(staged.path() / "oracle.json", out.dump(2) + "\n");
    staged.commit();
  }
  std::cout << json{{"root_value", solution.root_value},
                    {"tau_min_expected_payoff", attained},
                    {"nodes", problem.node_count()}}
                   .dump()
            << '\n';
  return 0;
}

void print_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimal purchase timing against a surveilling seller"};
  app.require_subcommand(1);

  CommonOptions opts;

  auto* simulate = app.add_subcommand("simulate", "generate sample paths as CSV");
  add_common(simulate, opts, false);
  std::string set = "train";
  std::optional<std::size_t> count;
  simulate->add_option("--set", set, "which sub-stream to draw")->check(CLI::IsMember({"train", "test"}));
  simulate->add_option("--count", count, "number of paths (defaults to n_train / n_test)");

  auto* train_cmd = app.add_subcommand("train", "train a stopping policy");
  add_common(train_cmd, opts, true);
  std::string paths_file;
  train_cmd->add_option("--paths", paths_file, "train on a paths CSV instead of simulating")->check(CLI::ExistingFile);

  auto* evaluate_cmd = app.add_subcommand("evaluate", "evaluate against the myopic strategy and emit figure data");
  add_common(evaluate_cmd, opts, true);
  std::string policy_file;
  evaluate_cmd->add_option("--policy", policy_file, "pre-trained policy file (trains in-process if omitted)")
      ->check(CLI::ExistingFile);
  auto* paired_flag = evaluate_cmd->add_flag("--paired", opts.paired, "both strategies on the same paths");
  evaluate_cmd->add_flag("--independent", opts.independent, "myopic strategy on an independent path set")
      ->excludes(paired_flag);

  auto* trace_cmd = app.add_subcommand("trace", "single-path diagnostic table");
  add_common(trace_cmd, opts, true);
  std::size_t index = 0;
  trace_cmd->add_option("--policy", policy_file, "pre-trained policy file")->check(CLI::ExistingFile);
  trace_cmd->add_option("--index", index, "test path index");

  auto* oracle_cmd = app.add_subcommand("oracle", "exact backward induction on a finite stop problem");
  add_common(oracle_cmd, opts, false);
  std::string fixture;
  std::optional<int> levels;
  oracle_cmd->add_option("--fixture", fixture, "stop-problem JSON file")->check(CLI::ExistingFile);
  oracle_cmd->add_option("--levels", levels, "discretize the configured model with this many support points");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (*simulate) return cmd_simulate(opts, set, count);
    if (*train_cmd) return cmd_train(opts, paths_file);
    if (*evaluate_cmd) return cmd_evaluate(opts, policy_file);
    if (*trace_cmd) return cmd_trace(opts, policy_file, index);
    if (*oracle_cmd) return cmd_oracle(opts, fixture, levels);
  } catch (const FormatError& e) {
    print_error("format", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    print_error("invalid_argument", e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("runtime", e.what());
    return 1;
  }
  return 1;
}
