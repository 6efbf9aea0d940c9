#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "lrq/report.hpp"

namespace lrq::cli {

/// One harness run: a subcommand applied to a config file, with optional
/// command-line overrides.
struct Invocation {
  std::string command;
  std::filesystem::path config;
  std::optional<std::filesystem::path> output;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool timing = false;  // fill wall_ms; off keeps the CSV byte-reproducible
};

struct Result {
  std::vector<ReportRow> rows;
  std::optional<std::filesystem::path> csv;  // unset: CSV goes to the output stream
  std::vector<std::string> written;          // files written other than the CSV
};

const std::vector<std::string>& commands();

/// Runs the subcommand; throws ConfigError or NumericError on failure.
Result run(const Invocation& invocation);

/// Runs, writes the CSV (to the output path or `out`) and a one-line JSON
/// summary or error record to `err`. Returns the process exit code.
int execute(const Invocation& invocation, std::ostream& out, std::ostream& err);

/// Command-line entry point.
int main(int argc, char** argv, std::ostream& out, std::ostream& err);

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumeric = 3;

}  // namespace lrq::cli
