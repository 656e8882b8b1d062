// Scenario-driven front end: JSON scenario parsing and validation, single runs,
// parameter sweeps, diagnostics on stored fields and the ladder calculator.
//
// Exit codes shared by every subcommand:
//   0  all invariants pass
//   1  configuration could not be parsed or validated
//   2  a solver aborted (blow-up, no convergence, linear solve failure)
//   3  the run completed but an invariant or aggregate assertion failed
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace sktlab::cli {

using Json = nlohmann::ordered_json;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitSolver = 2;
inline constexpr int kExitInvariant = 3;

/// Validation failure located by a JSON pointer into the scenario document.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, std::string pointer)
      : std::runtime_error(what), pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

/// A validated scenario. `doc` is the normalized document with every default
/// filled in; parsing `doc` again yields the same document.
struct Scenario {
  Json doc;
  std::vector<std::string> warnings;
  /// Directory relative input paths are resolved against.
  std::filesystem::path base_dir;
};

Scenario parse_scenario(const Json& doc, const std::filesystem::path& base_dir = {});

/// Reads and parses a JSON file; errors carry "path:line: message".
Json load_json(const std::filesystem::path& path);
/// Formats a ConfigError with the line of the offending key in `raw`.
std::string describe(const ConfigError& e, const std::filesystem::path& path, const std::string& raw);

struct RunResult {
  Json report;
  int exit_code = kExitOk;
};

/// Runs a scenario and writes report.json (plus monitor.csv and field files
/// when applicable) into `out_dir`, all atomically. `report.wall_clock_seconds`
/// is the only non-deterministic entry.
RunResult run_scenario(const Scenario& scenario, const std::filesystem::path& out_dir);

struct SweepPoint {
  Json overrides;  ///< pointer -> value
  Scenario scenario;
};

/// Expands {"base": scenario, "grid": {pointer: [values...]}, "aggregate": [...]}
/// into the cartesian product of overrides. Empty grids are rejected.
std::vector<SweepPoint> expand_sweep(const Json& sweep, const std::filesystem::path& base_dir = {},
                                     std::optional<std::uint64_t> seed = std::nullopt);

/// Runs every point with at most `jobs` concurrent scenarios, writing
/// per-scenario directories and an aggregate report.json into `out_dir`.
RunResult run_sweep(const Json& sweep, const std::filesystem::path& out_dir, std::size_t jobs,
                    const std::filesystem::path& base_dir = {}, std::optional<std::uint64_t> seed = std::nullopt);

/// {"n", "l1", "p0", "terms", "terminal", "unbounded", "mu": [{"q", "mu"}]}.
Json ladder_report(int n, double l1, double p0, const std::vector<double>& qs);

/// Entry point used by the executable.
int main(int argc, char** argv);

}  // namespace sktlab::cli
