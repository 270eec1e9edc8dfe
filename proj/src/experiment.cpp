#include "optstop/experiment.hpp"

#include <cmath>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "optstop/io.hpp"
#include "optstop/rng.hpp"

namespace optstop {

using nlohmann::json;

std::size_t HistogramSpec::bins() const {
  return static_cast<std::size_t>(std::llround((hi - lo) / width));
}

std::size_t HistogramSpec::bin_of(double value) const {
  const double k = std::floor((value - lo) / width);
  if (k <= 0.0) return 0;
  return std::min(static_cast<std::size_t>(k), bins() - 1);
}

void HistogramSpec::validate() const {
  if (!(width > 0.0) || !(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
    throw std::invalid_argument("histogram: need lo < hi and width > 0");
  if (bins() < 1) throw std::invalid_argument("histogram: range holds no bins");
}

void ExperimentConfig::validate() const {
  model.validate();
  regression.kernel.validate();
  if (n_train < 1) throw std::invalid_argument("config: n_train must be >= 1");
  if (n_test < 1) throw std::invalid_argument("config: n_test must be >= 1");
  if (regression.poly_degree < 0) throw std::invalid_argument("config: poly_degree must be >= 0");
  payoff_bins.validate();
  price_bins.validate();
}

namespace {

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
  if (!j.is_object()) throw std::invalid_argument(std::string("config: '") + where + "' must be an object");
  std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& item : j.items())
    if (!allowed.count(item.key()))
      throw std::invalid_argument(std::string("config: unknown key '") + item.key() + "' in '" + where + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

json histogram_to_json(const HistogramSpec& h) { return {{"lo", h.lo}, {"hi", h.hi}, {"width", h.width}}; }

HistogramSpec histogram_from_json(const json& j, HistogramSpec h, const char* where) {
  reject_unknown(j, {"lo", "hi", "width"}, where);
  read(j, "lo", h.lo);
  read(j, "hi", h.hi);
  read(j, "width", h.width);
  return h;
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    reject_unknown(j, {"model", "experiment", "regression", "histograms", "output_dir"}, "root");
    if (j.contains("model")) {
      const json& m = j.at("model");
      reject_unknown(m, {"horizon", "gamma", "sigma_eps", "sigma_xi", "mu_prior", "sigma_v", "seed",
                         "initial_valuation"}, "model");
      read(m, "horizon", c.model.horizon);
      read(m, "gamma", c.model.gamma);
      read(m, "sigma_eps", c.model.sigma_eps);
      read(m, "sigma_xi", c.model.sigma_xi);
      read(m, "mu_prior", c.model.mu_prior);
      read(m, "sigma_v", c.model.sigma_v);
      read(m, "seed", c.model.seed);
      if (m.contains("initial_valuation") && !m.at("initial_valuation").is_null())
        c.model.initial_valuation = m.at("initial_valuation").get<double>();
    }
    if (j.contains("experiment")) {
      const json& e = j.at("experiment");
      reject_unknown(e, {"n_train", "n_test", "paired", "trace_paths"}, "experiment");
      read(e, "n_train", c.n_train);
      read(e, "n_test", c.n_test);
      read(e, "paired", c.paired);
      read(e, "trace_paths", c.trace_paths);
    }
    if (j.contains("regression")) {
      const json& r = j.at("regression");
      reject_unknown(r, {"backend", "bandwidth", "ridge", "poly_degree", "support_cap", "merge_duplicates"},
                     "regression");
      if (r.contains("backend")) c.regression.backend = parse_backend(r.at("backend").get<std::string>());
      read(r, "bandwidth", c.regression.kernel.bandwidth);
      read(r, "ridge", c.regression.kernel.ridge);
      read(r, "poly_degree", c.regression.poly_degree);
      read(r, "support_cap", c.regression.support_cap);
      read(r, "merge_duplicates", c.regression.merge_duplicates);
    }
    if (j.contains("histograms")) {
      const json& h = j.at("histograms");
      reject_unknown(h, {"payoff", "price"}, "histograms");
      if (h.contains("payoff")) c.payoff_bins = histogram_from_json(h.at("payoff"), c.payoff_bins, "payoff");
      if (h.contains("price")) c.price_bins = histogram_from_json(h.at("price"), c.price_bins, "price");
    }
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  } catch (const json::exception& err) {
    throw std::invalid_argument(std::string("config: ") + err.what());
  }
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json model = {
      {"horizon", c.model.horizon},     {"gamma", c.model.gamma},       {"sigma_eps", c.model.sigma_eps},
      {"sigma_xi", c.model.sigma_xi},   {"mu_prior", c.model.mu_prior}, {"sigma_v", c.model.sigma_v},
      {"seed", c.model.seed},
  };
  model["initial_valuation"] = c.model.initial_valuation ? json(*c.model.initial_valuation) : json(nullptr);
  return {
      {"model", model},
      {"experiment",
       {{"n_train", c.n_train}, {"n_test", c.n_test}, {"paired", c.paired}, {"trace_paths", c.trace_paths}}},
      {"regression",
       {{"backend", std::string(to_string(c.regression.backend))},
        {"bandwidth", c.regression.kernel.bandwidth},
        {"ridge", c.regression.kernel.ridge},
        {"poly_degree", c.regression.poly_degree},
        {"support_cap", c.regression.support_cap},
        {"merge_duplicates", c.regression.merge_duplicates}}},
      {"histograms", {{"payoff", histogram_to_json(c.payoff_bins)}, {"price", histogram_to_json(c.price_bins)}}},
      {"output_dir", c.output_dir.string()},
  };
}

ExperimentConfig load_config(const std::filesystem::path& file) {
  json j;
  try {
    j = json::parse(read_text_file(file));
  } catch (const json::exception& err) {
    throw FormatError("config: " + file.string() + ": " + err.what());
  }
  return config_from_json(j);
}

std::string config_preamble(const ExperimentConfig& config) {
  json echo = config_to_json(config);
  echo.erase("output_dir");
  return "config: " + echo.dump();
}

std::vector<SamplePath> training_paths(const ExperimentConfig& config) {
  return generate_paths(config.model, substream::training, config.n_train);
}

std::vector<SamplePath> test_paths(const ExperimentConfig& config) {
  return generate_paths(config.model, substream::test, config.n_test);
}

StoppingPolicy train_policy(const ExperimentConfig& config, const std::vector<SamplePath>& paths) {
  RegressionSpec spec = config.regression;
  spec.seed = config.model.seed;
  TrainingResult result = train(exit_matrix(paths), spec);
  PolicyMetadata meta = result.policy.metadata();
  meta.n_train = paths.size();
  meta.deviations.push_back("disjoint_train_test_streams");
  meta.provenance = config_preamble(config);
  return StoppingPolicy(result.policy.regressors(), std::move(meta));
}

EvaluationReport evaluate_policy(const ExperimentConfig& config, const StoppingPolicy& policy) {
  if (policy.horizon() != config.model.horizon)
    throw std::invalid_argument("evaluate: policy horizon " + std::to_string(policy.horizon()) +
                                " differs from the model horizon " + std::to_string(config.model.horizon));
  const std::vector<SamplePath> paths = test_paths(config);
  if (config.paired) return evaluate(policy, paths, config.model.sigma_eps);
  const std::vector<SamplePath> baseline =
      generate_paths(config.model, substream::independent_myopic, config.n_test);
  return evaluate(policy, paths, config.model.sigma_eps, &baseline);
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

json report_to_json(const EvaluationReport& report, const ExperimentConfig& config, const StoppingPolicy& policy) {
  const EvaluationAggregates& a = report.aggregates;
  json echo = config_to_json(config);
  echo.erase("output_dir");
  const PolicyMetadata& meta = policy.metadata();
  return {
      {"config", echo},
      {"policy",
       {{"horizon", policy.horizon()},
        {"n_train", meta.n_train},
        {"backend", meta.backend},
        {"deviations", meta.deviations}}},
      {"evaluation",
       {{"mode", report.paired ? "paired" : "independent"},
        {"trials", report.records.size()},
        {"checksum_algorithmic_paths", hex64(report.checksum_algorithmic)},
        {"checksum_myopic_paths", hex64(report.checksum_myopic)}}},
      {"aggregates",
       {{"mean_payoff_algorithmic", a.mean_algorithmic},
        {"mean_payoff_myopic", a.mean_myopic},
        {"mean_difference", a.mean_difference},
        {"stderr_difference", a.stderr_difference},
        {"purchases_algorithmic", a.purchases_algorithmic},
        {"purchases_myopic", a.purchases_myopic},
        {"equal_payoff_trials", a.equal_payoff}}},
  };
}

namespace {

void write_histogram(std::ostream& out, const HistogramSpec& spec, const std::vector<double>& algorithmic,
                     const std::vector<double>& myopic) {
  std::vector<std::size_t> count_a(spec.bins(), 0);
  std::vector<std::size_t> count_m(spec.bins(), 0);
  for (double x : algorithmic) ++count_a[spec.bin_of(x)];
  for (double x : myopic) ++count_m[spec.bin_of(x)];
  out << "bin_lo,bin_hi,algorithmic,myopic\n";
  for (std::size_t k = 0; k < spec.bins(); ++k)
    out << format_double(spec.edge(k)) << ',' << format_double(spec.edge(k + 1)) << ',' << count_a[k] << ','
        << count_m[k] << '\n';
}

void write_outcome(std::ostream& out, std::size_t trial, const char* strategy, const StrategyOutcome& o) {
  out << trial << ',' << strategy << ',' << o.decision.t << ',' << to_string(o.decision.action) << ','
      << format_double(o.valuation_mean) << ',' << format_double(o.valuation_std) << ','
      << format_double(o.price) << ',' << (o.decision.action == Action::purchase ? 1 : 0) << ','
      << format_double(o.decision.payoff) << '\n';
}

}  // namespace

void emit_figures_data(const EvaluationReport& report, const ExperimentConfig& config,
                       const std::filesystem::path& dir) {
  const std::string preamble = "# " + config_preamble(config) + "\n";

  std::ostringstream exits;
  exits << preamble << "trial,strategy,exit_t,action,valuation_mean,valuation_std,price,purchased,payoff\n";
  std::ostringstream paid;
  paid << preamble << "trial,strategy,price\n";
  std::ostringstream diffs;
  diffs << preamble << "trial,algorithmic_payoff,myopic_payoff,difference\n";

  std::vector<double> payoff_a, payoff_m, price_a, price_m;
  for (const TrialRecord& r : report.records) {
    write_outcome(exits, r.trial, "algorithmic", r.algorithmic);
    write_outcome(exits, r.trial, "myopic", r.myopic);
    if (r.algorithmic.decision.action == Action::purchase) {
      paid << r.trial << ",algorithmic," << format_double(r.algorithmic.price) << '\n';
      price_a.push_back(r.algorithmic.price);
    }
    if (r.myopic.decision.action == Action::purchase) {
      paid << r.trial << ",myopic," << format_double(r.myopic.price) << '\n';
      price_m.push_back(r.myopic.price);
    }
    payoff_a.push_back(r.algorithmic.decision.payoff);
    payoff_m.push_back(r.myopic.decision.payoff);
    diffs << r.trial << ',' << format_double(r.algorithmic.decision.payoff) << ','
          << format_double(r.myopic.decision.payoff) << ',' << format_double(r.difference()) << '\n';
  }

  std::ostringstream payoff_hist;
  payoff_hist << preamble;
  write_histogram(payoff_hist, config.payoff_bins, payoff_a, payoff_m);
  std::ostringstream price_hist;
  price_hist << preamble;
  write_histogram(price_hist, config.price_bins, price_a, price_m);

  write_text_file(dir / "exits.csv", exits.str());
  write_text_file(dir / "prices_paid.csv", paid.str());
  write_text_file(dir / "differences.csv", diffs.str());
  write_text_file(dir / "payoff_hist.csv", payoff_hist.str());
  write_text_file(dir / "price_hist.csv", price_hist.str());
}

std::string trace_csv(const SamplePath& path, const StoppingPolicy& policy, const ModelParams& params,
                      const std::string& preamble) {
  const std::span<const double> h(path.exit.data(), static_cast<std::size_t>(path.exit.size()));
  const std::span<const double> pi(path.purchase.data(), static_cast<std::size_t>(path.purchase.size()));
  const ExitDecision alg = run_policy(policy, h, pi);
  const ExitDecision myo = run_myopic(h, pi);

  std::ostringstream out;
  if (!preamble.empty()) out << "# " << preamble << '\n';
  out << "t,v,valuation_std,y,seller_mean,seller_std,p,pi,h,continuation,algorithmic_exit,myopic_exit\n";
  const int horizon = path.horizon();
  for (int t = 0; t <= horizon; ++t) {
    const auto i = static_cast<Eigen::Index>(t);
    out << t << ',' << format_double(path.valuation[i]) << ','
        << format_double(std::sqrt(static_cast<double>(horizon - t)) * params.sigma_eps) << ',';
    if (t > 0) out << format_double(path.observation[i - 1]);
    out << ',' << format_double(path.seller_mean[i]) << ',' << format_double(std::sqrt(path.seller_variance[i]))
        << ',' << format_double(path.price[i]) << ',' << format_double(path.purchase[i]) << ','
        << format_double(path.exit[i]) << ',';
    if (t < horizon) out << format_double(policy.regressor(t).predict(path.exit[i]));
    out << ',' << (alg.t == t ? 1 : 0) << ',' << (myo.t == t ? 1 : 0) << '\n';
  }
  return out.str();
}

StagedDirectory::StagedDirectory(std::filesystem::path target) : target_(std::move(target)) {
  if (target_.empty()) throw std::invalid_argument("output directory must not be empty");
  std::filesystem::path absolute = std::filesystem::absolute(target_).lexically_normal();
  if (absolute.filename().empty()) absolute = absolute.parent_path();
  target_ = absolute;
  std::filesystem::create_directories(target_.parent_path());
  std::random_device rd;
  for (int attempt = 0; attempt < 16; ++attempt) {
    staging_ = target_.parent_path() / ("." + target_.filename().string() + ".staging-" + hex64(mix64(rd())));
    if (std::filesystem::create_directory(staging_)) return;
  }
  throw std::runtime_error("cannot create a staging directory next to '" + target_.string() + "'");
}

StagedDirectory::~StagedDirectory() {
  if (!committed_) {
    std::error_code ec;
    std::filesystem::remove_all(staging_, ec);
  }
}

void StagedDirectory::commit() {
  std::filesystem::remove_all(target_);
  std::filesystem::rename(staging_, target_);
  committed_ = true;
}

namespace {

ExperimentResult finish(const ExperimentConfig& config, StoppingPolicy policy) {
  EvaluationReport report = evaluate_policy(config, policy);

  StagedDirectory staged(config.output_dir);
  const std::filesystem::path& dir = staged.path();
  json config_echo = config_to_json(config);
  config_echo.erase("output_dir");
  write_text_file(dir / "config.json", config_echo.dump(2) + "\n");
  save_policy(policy, dir / "policy.json");
  write_text_file(dir / "report.json", report_to_json(report, config, policy).dump(2) + "\n");
  emit_figures_data(report, config, dir);

  if (!config.trace_paths.empty()) {
    const std::vector<SamplePath> paths = test_paths(config);
    for (std::size_t index : config.trace_paths) {
      if (index >= paths.size())
        throw std::out_of_range("trace path " + std::to_string(index) + " is outside the test set");
      write_text_file(dir / ("trace_" + std::to_string(index) + ".csv"),
                      trace_csv(paths[index], policy, config.model, config_preamble(config)));
    }
  }
  staged.commit();
  return {std::move(policy), std::move(report)};
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  return finish(config, train_policy(config, training_paths(config)));
}

ExperimentResult run_evaluation(const ExperimentConfig& config, const StoppingPolicy& policy) {
  config.validate();
  return finish(config, policy);
}

}  // namespace optstop
