#ifndef OPTSTOP_IO_HPP
#define OPTSTOP_IO_HPP

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "optstop/lsm.hpp"
#include "optstop/paths.hpp"
#include "optstop/snell.hpp"

namespace optstop {

/// Malformed, truncated, or tampered input file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kPolicyFormatVersion = 1;
inline constexpr std::string_view kPolicyFormatName = "optstop-policy";

/// Shortest decimal that round-trips to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

/// FNV-1a 64, rendered as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// Path table: one row per (path, t); y is blank at t = 0. `preamble`, when
/// non-empty, is written as a leading "# " comment line.
void write_paths_csv(std::ostream& out, const std::vector<SamplePath>& paths, const std::string& preamble = {});
std::vector<SamplePath> read_paths_csv(std::istream& in);

nlohmann::json regressor_to_json(const FittedRegressor& model);
FittedRegressor regressor_from_json(const nlohmann::json& j);

/// Self-describing policy document: format tag, version, payload, checksum
/// of the serialized payload.
nlohmann::json policy_to_json(const StoppingPolicy& policy);
StoppingPolicy policy_from_json(const nlohmann::json& doc);

void save_policy(const StoppingPolicy& policy, const std::filesystem::path& file);
StoppingPolicy load_policy(const std::filesystem::path& file);

/// Stop-problem fixture:
///   {"initial": [p...] (optional), "epochs": [[{"payoff": h, "children": [[i, p], ...]}, ...], ...]}
FiniteStopProblem problem_from_json(const nlohmann::json& j);
nlohmann::json problem_to_json(const FiniteStopProblem& problem);
FiniteStopProblem load_problem(const std::filesystem::path& file);

std::string read_text_file(const std::filesystem::path& file);
void write_text_file(const std::filesystem::path& file, std::string_view contents);

}  // namespace optstop

#endif  // OPTSTOP_IO_HPP
