#pragma once

#include "horizonlab/pmp.hpp"
#include "horizonlab/regularity.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace horizonlab {

inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes of the command-line tool.
enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitSolver = 3 };

std::vector<std::string> task_names();

struct ExperimentConfig {
  nlohmann::json problem = "linear-l1";  // built-in name or descriptor object
  std::string task = "example-suite";
  double h = 0.0;  // 0: per-problem default
  double dt = 0.0;
  double T = 0.0;
  std::optional<Vec> lower;
  std::optional<Vec> upper;
  TimeScheme scheme = TimeScheme::Euler;
  std::vector<double> horizons;  // empty: {2, 4, 8, 16}
  double tol = kDefaultCriteriaTolerance;
  std::string out_dir = "horizonlab-out";
  std::uint64_t seed = 1123;
  std::optional<nlohmann::json> control;  // ControlSignal JSON; unset: u = 0
  std::vector<Vec> points;                // query states; empty: per-problem default
  std::optional<StateBox> region;         // regularity region map
  std::vector<int> cells;
  std::string value_format = "csv";  // or "binary"
  std::string config_path;           // recorded in the manifest when set

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  /// Throws ArgumentError on an unknown task or an invalid field.
  void validate() const;

  ControlProblem build_problem() const;
  GridSpec grid_for(const ControlProblem& problem) const;
  HorizonSequence horizon_sequence() const;
  ControlSignal control_for(const ControlProblem& problem) const;
  std::vector<Vec> query_points(const ControlProblem& problem) const;
};

/// "h,dt,T" and "t0,ratio,count".
void apply_grid_flag(ExperimentConfig& config, const std::string& flag);
void apply_horizons_flag(ExperimentConfig& config, const std::string& flag);

struct RunResult {
  int exit_code = kExitOk;
  std::string message;
  std::vector<std::string> outputs;  // relative to out_dir
  nlohmann::json summary;
};

/// 2 for input errors; solver failures and anything unexpected give 3.
int exit_code_for(const std::exception& e);

/// Runs the task, writes its files plus summary.json, the plot data and
/// manifest.json. Errors map to exit codes instead of escaping.
RunResult run(const ExperimentConfig& config);

/// Long-format (series, x, y) CSVs built from the report files in `dir`.
/// Throws ArgumentError when no report file is present.
std::vector<std::string> emit_plot_data(const std::string& dir);

/// FNV-1a 64-bit digest of the file bytes as 16 hex digits.
std::string fnv1a64_file(const std::string& path);

/// Rewrites manifest.json in `dir` listing `outputs` (relative paths).
void write_manifest(const std::string& dir, const ExperimentConfig& config, const std::vector<std::string>& outputs);

}  // namespace horizonlab
