#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "umlr/core.hpp"

namespace umlr::cli {

// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitUsage = 2,      // bad flags or configuration
  kExitInput = 3,      // unreadable or invalid input data
  kExitNumerical = 4,  // estimation failed (singular, non-convergence, ...)
  kExitOutput = 5,     // report could not be written
};

int exit_code_for(ErrorCode code);

// Flat key/value settings; keys are the long flag names without dashes.
using Settings = std::map<std::string, std::string>;

// Lines of `key = value`; '#' starts a comment; blank lines ignored.
Settings parse_config_text(const std::string& text);
Settings read_config_file(const std::string& path);

// Settings recovered from the "config" section of an emitted report.
Settings settings_from_report(const nlohmann::json& report);

struct LoadedCsv {
  Dataset data;
  std::string outcome;
  std::string treatment;
  std::vector<std::string> covariates;
};

// `covariates` empty or {"all-others"}: every column except outcome and
// treatment, in file order.
LoadedCsv load_csv(const std::string& path, const std::string& outcome, const std::string& treatment,
                   const std::vector<std::string>& covariates);

// Columns of a header CSV as doubles, selected by name.
std::vector<Vector> read_numeric_columns(const std::string& path, const std::vector<std::string>& names);

// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

// Shortest round-trip decimal form; "nan" / "inf" for non-finite values.
std::string format_double(double v);

struct RunOutput {
  nlohmann::json report;
  std::string rendered;  // what goes to `out` ("-" = stdout)
};

// Resolves settings for `command`, runs it and writes every requested file.
// Throws umlr::Error.
RunOutput run(const std::string& command, const Settings& settings);

// Resolved configuration with defaults filled, as emitted in reports.
nlohmann::json resolve_config(const std::string& command, const Settings& settings);

nlohmann::json error_json(ErrorCode code, const std::string& message);

// Entry point shared by the executable and tests.
int main_entry(int argc, char** argv);

}  // namespace umlr::cli
