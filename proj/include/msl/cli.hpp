#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace msl {

struct RunOptions {
  std::string command;
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir = "msl_out";
  bool scale_max = false;
  std::optional<std::string> method;
};

/// Runs one command and writes its report, data files and manifest into
/// out_dir. Throws msl::Error on failure.
void run(const RunOptions& options);

/// Exit status for an exception escaping run(): 2 for validation, domain and
/// shape errors (including malformed configs), 3 for numerical failures.
int exit_code(const std::exception& e);

/// Command-line entry point.
int cli_main(int argc, char** argv);

}  // namespace msl
