#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "adaptgd/core.hpp"

namespace adaptgd {

using Json = nlohmann::ordered_json;

/// Exit codes of the command-line runner.
enum ExitCode : int {
  kExitOk = 0,
  kExitViolation = 1,
  kExitConfig = 2,
  kExitDataset = 3,
  kExitDiverged = 4,
};

/// Environment variable naming the dataset root directory.
inline constexpr const char* kDataEnv = "ADAPTGD_DATA";

struct ProblemSpec {
  std::string kind;
  Json params = Json::object();  // validated against the kind's schema
};

struct MethodSpec {
  std::string type;
  std::string label;  // defaults to type
  Json params = Json::object();
  bool must_converge = false;
};

struct ExperimentConfig {
  std::string name = "experiment";
  ProblemSpec problem;
  std::vector<MethodSpec> methods;
  TerminationRule termination;
  std::vector<std::uint64_t> seeds{0};
  std::string x0 = "zeros";  // or "normal" (seeded)
  std::string output_dir = "out";
  int threads = 0;  // 0: hardware concurrency
  // Long adaptive run supplying f_ref (and x_ref) when the problem has no known f*.
  double reference_grad_tol = 1e-12;
  int reference_max_iter = 100000;

  /// Strict parse: unknown keys, wrong types and bad values throw ConfigError.
  static ExperimentConfig from_json(const Json& j);
  static ExperimentConfig load(const std::string& path);
  /// Fully explicit form; from_json(to_json()) reproduces the config.
  Json to_json() const;

  bool operator==(const ExperimentConfig& other) const { return to_json() == other.to_json(); }
};

/// A built problem: the deterministic oracle, optionally its finite-sum view,
/// ground truth, and whether convex certificates apply.
struct ProblemInstance {
  std::shared_ptr<const Objective> objective;
  const StochasticObjective* stochastic = nullptr;  // points into objective when available
  ProblemMeta meta;
  bool convex = true;
  std::function<Vector(std::uint64_t seed, const std::string& mode)> initial_point;
};

/// Datasets are resolved against $ADAPTGD_DATA unless the path is absolute.
/// Throws ConfigError for bad parameters and DatasetError for missing data.
ProblemInstance build_problem(const ProblemSpec& spec);

std::string resolve_data_path(const std::string& path);

/// Result of one (method, seed) cell.
struct CellResult {
  std::string label;
  std::string method;
  std::uint64_t seed = 0;
  RunTrace trace;
  std::string error;  // nonempty when the cell threw
  double wall_seconds = 0.0;
  Json violations = Json::object();
};

struct ExperimentResult {
  std::vector<CellResult> cells;
  std::optional<double> f_ref;
  Json summary;
  int exit_code = kExitOk;
};

/// Runs every (method, seed) cell, writes <label>_seed<seed>.csv files and
/// summary.json into output_dir, and reports the exit code.
ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream& log);

/// Column order of the trace files.
inline constexpr const char* kCsvHeader = "iter,f,grad_norm,lambda,theta,energy,ergodic_gap,oracle_calls";

void write_trace_csv(const RunTrace& trace, const std::string& path);

/// Per-invariant outcome of the verification suite.
struct InvariantResult {
  enum class Outcome { Pass, Fail, Skip };
  std::string name;
  Outcome outcome = Outcome::Pass;
  std::string detail;
};

std::vector<InvariantResult> run_invariant_suite();

/// Prints one [PASS]/[FAIL]/[SKIP] line per invariant; returns 0 or 1.
int cmd_verify(std::ostream& out);

/// CLI entry points returning process exit codes.
int cmd_run(const std::string& config_path, std::ostream& out, std::ostream& err);

/// Writes plot/<stem>_gap.dat and plot/<stem>_lambda.dat for every trace file
/// in dir. The gap uses summary.json's f_ref when present, else the smallest
/// f over all traces. Returns 3 when dir holds no traces.
int cmd_plotdata(const std::string& dir, std::ostream& out, std::ostream& err);

}  // namespace adaptgd
