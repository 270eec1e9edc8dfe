#include "optstop/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace optstop {

using nlohmann::json;

std::string format_double(double value) {
  char buf[32];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw std::runtime_error("format_double: conversion failed");
  return {buf, end};
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) throw FormatError("cannot parse number '" + std::string(text) + "'");
  return value;
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

void write_paths_csv(std::ostream& out, const std::vector<SamplePath>& paths, const std::string& preamble) {
  if (!preamble.empty()) out << "# " << preamble << '\n';
  out << "path,t,v,y,p,pi,h,seller_mean,seller_var\n";
  for (std::size_t n = 0; n < paths.size(); ++n) {
    const SamplePath& p = paths[n];
    for (Eigen::Index t = 0; t < p.exit.size(); ++t) {
      out << n << ',' << t << ',' << format_double(p.valuation[t]) << ',';
      if (t > 0) out << format_double(p.observation[t - 1]);
      out << ',' << format_double(p.price[t]) << ',' << format_double(p.purchase[t]) << ','
          << format_double(p.exit[t]) << ',' << format_double(p.seller_mean[t]) << ','
          << format_double(p.seller_variance[t]) << '\n';
    }
  }
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

struct PathRow {
  double v, y, p, pi, h, mean, var;
};

SamplePath assemble(const std::vector<PathRow>& rows) {
  const auto epochs = static_cast<Eigen::Index>(rows.size());
  if (epochs < 2) throw FormatError("paths csv: a path needs at least two epochs");
  SamplePath path;
  path.valuation.resize(epochs);
  path.observation.resize(epochs - 1);
  path.price.resize(epochs);
  path.purchase.resize(epochs);
  path.exit.resize(epochs);
  path.seller_mean.resize(epochs);
  path.seller_variance.resize(epochs);
  for (Eigen::Index t = 0; t < epochs; ++t) {
    const PathRow& r = rows[static_cast<std::size_t>(t)];
    path.valuation[t] = r.v;
    if (t > 0) path.observation[t - 1] = r.y;
    path.price[t] = r.p;
    path.purchase[t] = r.pi;
    path.exit[t] = r.h;
    path.seller_mean[t] = r.mean;
    path.seller_variance[t] = r.var;
  }
  return path;
}

}  // namespace

std::vector<SamplePath> read_paths_csv(std::istream& in) {
  std::vector<SamplePath> paths;
  std::vector<PathRow> rows;
  std::string line;
  bool header_seen = false;
  std::size_t line_no = 0;
  long current = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header_seen) {
      if (line.rfind("path,t,v,y,p,pi,h", 0) != 0) throw FormatError("paths csv: unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    const auto cells = split_commas(line);
    if (cells.size() != 9) throw FormatError("paths csv: line " + std::to_string(line_no) + " has wrong column count");
    const long path = static_cast<long>(parse_double(cells[0]));
    const long t = static_cast<long>(parse_double(cells[1]));
    if (path != current) {
      if (!rows.empty()) paths.push_back(assemble(rows));
      rows.clear();
      if (path != static_cast<long>(paths.size()))
        throw FormatError("paths csv: path indices must be consecutive from 0 (line " + std::to_string(line_no) + ")");
      current = path;
    }
    if (t != static_cast<long>(rows.size()))
      throw FormatError("paths csv: time indices must run 0..T (line " + std::to_string(line_no) + ")");
    PathRow row{};
    row.v = parse_double(cells[2]);
    row.y = t > 0 ? parse_double(cells[3]) : 0.0;
    row.p = parse_double(cells[4]);
    row.pi = parse_double(cells[5]);
    row.h = parse_double(cells[6]);
    row.mean = parse_double(cells[7]);
    row.var = parse_double(cells[8]);
    rows.push_back(row);
  }
  if (!header_seen) throw FormatError("paths csv: missing header");
  if (!rows.empty()) paths.push_back(assemble(rows));
  for (const SamplePath& p : paths)
    if (p.horizon() != paths.front().horizon()) throw FormatError("paths csv: paths have different horizons");
  return paths;
}

namespace {

json to_array(const Eigen::VectorXd& v) {
  json arr = json::array();
  for (double x : v) arr.push_back(x);
  return arr;
}

Eigen::VectorXd from_array(const json& arr) {
  if (!arr.is_array()) throw FormatError("expected a numeric array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_number()) throw FormatError("expected a numeric array");
    v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
  }
  return v;
}

}  // namespace

json regressor_to_json(const FittedRegressor& model) {
  json j;
  j["kind"] = std::string(to_string(model.kind()));
  switch (model.kind()) {
    case FittedRegressor::Kind::zero:
      break;
    case FittedRegressor::Kind::kernel:
      j["bandwidth"] = model.kernel_spec().bandwidth;
      j["ridge"] = model.kernel_spec().ridge;
      j["support"] = to_array(model.support());
      j["weights"] = to_array(model.weights());
      break;
    case FittedRegressor::Kind::polynomial:
      j["coefficients"] = to_array(model.weights());
      break;
    case FittedRegressor::Kind::tabular:
      j["keys"] = to_array(model.support());
      j["values"] = to_array(model.weights());
      break;
  }
  return j;
}

FittedRegressor regressor_from_json(const json& j) {
  try {
    switch (parse_regressor_kind(j.at("kind").get<std::string>())) {
      case FittedRegressor::Kind::zero:
        return zero_regressor();
      case FittedRegressor::Kind::kernel:
        return FittedRegressor::kernel({j.at("bandwidth").get<double>(), j.at("ridge").get<double>()},
                                       from_array(j.at("support")), from_array(j.at("weights")));
      case FittedRegressor::Kind::polynomial:
        return FittedRegressor::polynomial(from_array(j.at("coefficients")));
      case FittedRegressor::Kind::tabular:
        return FittedRegressor::tabular(from_array(j.at("keys")), from_array(j.at("values")));
    }
  } catch (const json::exception& err) {
    throw FormatError(std::string("regressor: ") + err.what());
  } catch (const std::invalid_argument& err) {
    throw FormatError(std::string("regressor: ") + err.what());
  }
  throw FormatError("regressor: unknown kind");
}

json policy_to_json(const StoppingPolicy& policy) {
  const PolicyMetadata& meta = policy.metadata();
  json payload;
  payload["horizon"] = policy.horizon();
  payload["metadata"] = {
      {"n_train", meta.n_train},
      {"seed", meta.seed},
      {"backend", meta.backend},
      {"bandwidth", meta.kernel.bandwidth},
      {"ridge", meta.kernel.ridge},
      {"poly_degree", meta.poly_degree},
      {"support_cap", meta.support_cap},
      {"merge_duplicates", meta.merge_duplicates},
      {"deviations", meta.deviations},
      {"provenance", meta.provenance},
  };
  json regs = json::array();
  for (const FittedRegressor& r : policy.regressors()) regs.push_back(regressor_to_json(r));
  payload["regressors"] = std::move(regs);

  json doc;
  doc["format"] = kPolicyFormatName;
  doc["version"] = kPolicyFormatVersion;
  doc["checksum"] = fnv1a_hex(payload.dump());
  doc["payload"] = std::move(payload);
  return doc;
}

StoppingPolicy policy_from_json(const json& doc) {
  try {
    if (doc.at("format").get<std::string>() != kPolicyFormatName) throw FormatError("policy: not a policy file");
    const int version = doc.at("version").get<int>();
    if (version != kPolicyFormatVersion)
      throw FormatError("policy: unsupported version " + std::to_string(version) + " (expected " +
                        std::to_string(kPolicyFormatVersion) + ")");
    const json& payload = doc.at("payload");
    if (fnv1a_hex(payload.dump()) != doc.at("checksum").get<std::string>())
      throw FormatError("policy: checksum mismatch");

    const json& m = payload.at("metadata");
    PolicyMetadata meta;
    meta.n_train = m.at("n_train").get<std::size_t>();
    meta.seed = m.at("seed").get<std::uint64_t>();
    meta.backend = m.at("backend").get<std::string>();
    meta.kernel = {m.at("bandwidth").get<double>(), m.at("ridge").get<double>()};
    meta.poly_degree = m.at("poly_degree").get<int>();
    meta.support_cap = m.at("support_cap").get<std::size_t>();
    meta.merge_duplicates = m.at("merge_duplicates").get<bool>();
    meta.deviations = m.at("deviations").get<std::vector<std::string>>();
    meta.provenance = m.value("provenance", std::string{});

    std::vector<FittedRegressor> regs;
    for (const json& r : payload.at("regressors")) regs.push_back(regressor_from_json(r));
    if (static_cast<int>(regs.size()) != payload.at("horizon").get<int>())
      throw FormatError("policy: regressor count does not match the horizon");
    return StoppingPolicy(std::move(regs), std::move(meta));
  } catch (const json::exception& err) {
    throw FormatError(std::string("policy: ") + err.what());
  } catch (const std::invalid_argument& err) {
    throw FormatError(std::string("policy: ") + err.what());
  }
}

std::string read_text_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + file.string() + "' for reading");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text_file(const std::filesystem::path& file, std::string_view contents) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + file.string() + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw std::runtime_error("write to '" + file.string() + "' failed");
}

void save_policy(const StoppingPolicy& policy, const std::filesystem::path& file) {
  write_text_file(file, policy_to_json(policy).dump(1) + "\n");
}

StoppingPolicy load_policy(const std::filesystem::path& file) {
  const std::string text = read_text_file(file);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& err) {
    throw FormatError("policy: " + file.string() + ": " + err.what());
  }
  return policy_from_json(doc);
}

FiniteStopProblem problem_from_json(const json& j) {
  FiniteStopProblem problem;
  try {
    if (j.contains("initial")) problem.initial = j.at("initial").get<std::vector<double>>();
    for (const json& epoch : j.at("epochs")) {
      std::vector<StopNode> nodes;
      for (const json& node : epoch) {
        StopNode n;
        n.exit_payoff = node.at("payoff").get<double>();
        if (node.contains("children")) {
          for (const json& edge : node.at("children")) {
            if (!edge.is_array() || edge.size() != 2) throw FormatError("stop problem: children are [index, probability] pairs");
            n.children.push_back({edge[0].get<std::size_t>(), edge[1].get<double>()});
          }
        }
        nodes.push_back(std::move(n));
      }
      problem.epochs.push_back(std::move(nodes));
    }
    if (j.contains("horizon") && j.at("horizon").get<int>() != problem.horizon())
      throw FormatError("stop problem: declared horizon does not match the epoch list");
  } catch (const json::exception& err) {
    throw FormatError(std::string("stop problem: ") + err.what());
  }
  problem.validate();
  return problem;
}

json problem_to_json(const FiniteStopProblem& problem) {
  json epochs = json::array();
  for (const auto& nodes : problem.epochs) {
    json level = json::array();
    for (const StopNode& n : nodes) {
      json node = {{"payoff", n.exit_payoff}};
      if (!n.children.empty()) {
        json children = json::array();
        for (const Transition& e : n.children) children.push_back({e.child, e.probability});
        node["children"] = std::move(children);
      }
      level.push_back(std::move(node));
    }
    epochs.push_back(std::move(level));
  }
  json j = {{"horizon", problem.horizon()}, {"epochs", std::move(epochs)}};
  if (!problem.initial.empty()) j["initial"] = problem.initial;
  return j;
}

FiniteStopProblem load_problem(const std::filesystem::path& file) {
  json j;
  try {
    j = json::parse(read_text_file(file));
  } catch (const json::exception& err) {
    throw FormatError("stop problem: " + file.string() + ": " + err.what());
  }
  return problem_from_json(j);
}

}  // namespace optstop
