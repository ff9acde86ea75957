#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "minimax/harness.hpp"

namespace minimax {

inline constexpr const char* kToolVersion = "0.1.0";

/// Parses JSON text; syntax errors become InputError with line:column.
nlohmann::json parse_config_text(const std::string& text, const std::string& source);
nlohmann::json load_config_file(const std::string& path);

/// FNV-1a 64 of the config's canonical (key-sorted, compact) dump, as 16 hex digits.
std::string config_hash(const nlohmann::json& config);

struct SuiteResult {
  nlohmann::ordered_json report;
  std::vector<TrialRecord> trials;  ///< cell ids are prefixed with the experiment name
  bool pass = true;
  std::vector<std::string> failed_flags;  ///< "experiment/flag"
  // wall seconds per experiment; kept out of the report so it stays reproducible
  std::vector<std::pair<std::string, double>> timings;
};

/// Runs the experiments of a suite config. `types` restricts the run to those
/// experiment types (empty = all). Unknown keys anywhere in the config are
/// rejected with an InputError naming the offending path.
SuiteResult run_suite(const nlohmann::json& config, int threads = 1, const std::set<std::string>& types = {});

/// report.json text: 2-space indented, trailing newline. No timing data, so it
/// is byte-identical across thread counts.
std::string report_text(const SuiteResult& result);
/// trials.csv text with a leading "# tool version config_hash" comment line.
std::string trials_csv(const SuiteResult& result);
/// Writes report.json and trials.csv into `dir` (created if missing).
void write_suite_outputs(const SuiteResult& result, const std::string& dir);

}  // namespace minimax
