#ifndef OPTSTOP_EXPERIMENT_HPP
#define OPTSTOP_EXPERIMENT_HPP

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "optstop/lsm.hpp"
#include "optstop/model.hpp"
#include "optstop/paths.hpp"
#include "optstop/regression.hpp"

namespace optstop {

/// Fixed-width bins over [lo, hi]; out-of-range values land in the edge bins.
struct HistogramSpec {
  double lo = 0.0;
  double hi = 1.0;
  double width = 0.05;

  std::size_t bins() const;
  std::size_t bin_of(double value) const;
  double edge(std::size_t k) const { return lo + static_cast<double>(k) * width; }
  void validate() const;
};

struct ExperimentConfig {
  ModelParams model;
  std::size_t n_train = 500;
  std::size_t n_test = 1000;
  RegressionSpec regression;
  bool paired = true;
  std::filesystem::path output_dir = "out";
  std::vector<std::size_t> trace_paths;
  HistogramSpec payoff_bins{-0.5, 1.0, 0.05};
  HistogramSpec price_bins{0.0, 3.0, 0.05};

  void validate() const;
};

/// Nested JSON config. Missing keys keep their defaults; unknown keys are
/// rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& config);
ExperimentConfig load_config(const std::filesystem::path& file);

/// Training and test sets come from disjoint sub-streams of the model seed.
std::vector<SamplePath> training_paths(const ExperimentConfig& config);
std::vector<SamplePath> test_paths(const ExperimentConfig& config);

/// Trains on `paths` with the configured backend; the subsample seed is the
/// model seed.
StoppingPolicy train_policy(const ExperimentConfig& config, const std::vector<SamplePath>& paths);

/// Evaluates on fresh test paths: paired, or against an independent myopic
/// set when `config.paired` is false.
EvaluationReport evaluate_policy(const ExperimentConfig& config, const StoppingPolicy& policy);

nlohmann::json report_to_json(const EvaluationReport& report, const ExperimentConfig& config,
                              const StoppingPolicy& policy);

/// Writes exits.csv, payoff_hist.csv, price_hist.csv, prices_paid.csv and
/// differences.csv into `dir`.
void emit_figures_data(const EvaluationReport& report, const ExperimentConfig& config,
                       const std::filesystem::path& dir);

/// Per-epoch diagnostic table for one path with both strategies' exit epochs.
std::string trace_csv(const SamplePath& path, const StoppingPolicy& policy, const ModelParams& params,
                      const std::string& preamble);

struct ExperimentResult {
  StoppingPolicy policy;
  EvaluationReport report;
};

/// Full pipeline: simulate, train, evaluate, write every output file into
/// config.output_dir. Files are staged in a sibling directory and moved into
/// place only after all of them are written.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Same as run_experiment with a pre-trained policy.
ExperimentResult run_evaluation(const ExperimentConfig& config, const StoppingPolicy& policy);

/// Stages files in a sibling directory; commit() swaps it into `target`.
/// Destruction without commit removes the staging directory.
class StagedDirectory {
 public:
  explicit StagedDirectory(std::filesystem::path target);
  ~StagedDirectory();
  StagedDirectory(const StagedDirectory&) = delete;
  StagedDirectory& operator=(const StagedDirectory&) = delete;

  const std::filesystem::path& path() const { return staging_; }
  void commit();

 private:
  std::filesystem::path target_;
  std::filesystem::path staging_;
  bool committed_ = false;
};

/// Compact JSON of the config, used as the "# config:" preamble of tables.
std::string config_preamble(const ExperimentConfig& config);

}  // namespace optstop

#endif  // OPTSTOP_EXPERIMENT_HPP
