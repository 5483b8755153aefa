#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lutdla/error.hpp"

namespace lutdla::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitInvalid = 2,
  kExitInfeasible = 3,
};

int exit_code(ErrorKind kind) noexcept;

std::string_view version() noexcept;

/// Stamped on every JSON summary, CSV table and trace the tool writes. No
/// wall-clock time, so reruns are byte-identical.
struct Provenance {
  std::string command;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  /// "# lutdla <version> command=<cmd> config_hash=<hex> seed=<n>"
  std::string csv_comment() const;
};

/// Whole command line minus the program name, e.g. {"--config", "x.yaml", "simulate"}.
/// Reports go to files under --out; `out` gets a short human summary and
/// `err` the diagnostics. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lutdla::cli
