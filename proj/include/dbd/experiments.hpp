#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dbd/dual_sdp.hpp"
#include "dbd/localization.hpp"
#include "dbd/serialization.hpp"

namespace dbd {

enum class Mode { Demo, Sweep, Certify };

std::string to_string(Mode mode);

/// Process exit codes of the CLI.
enum ExitCode : int {
  kExitOk = 0,
  kExitCertificateFailed = 1,
  kExitSolverFailure = 2,
  kExitConfigError = 3,
};

/// Raised for unreadable, malformed or invalid configuration files.
/// `line` is 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message), line(line) {}
  int line;
};

struct ExperimentConfig {
  Mode mode = Mode::Demo;
  SceneConfig scene;
  bool paper_scene = false;
  double min_separation = 0.0;
  double noise_std = 0.0;

  std::vector<int> sweep_L{1, 2, 3, 4, 5};
  std::vector<int> sweep_J{1, 2, 3, 4, 5};
  int trials = 10;
  int workers = 1;

  double grid_step = 1e-3;
  double tol_peak = 1e-2;
  double success_threshold = 1e-3;
  double certificate_tol = 1e-3;

  SolveOptions solver{.tol = 1e-7, .max_iter = 50000};
  GramCoupling coupling = GramCoupling::Shared;

  std::filesystem::path output_dir = "out";

  void validate() const;
  LocalizationOptions localization_options() const;
};

/// Parses JSON text; `origin` is used in messages only.
ExperimentConfig parse_config(const std::string& text, const std::string& origin = "<config>");
ExperimentConfig load_config(const std::filesystem::path& path);

/// Everything produced by one synthesize / solve / localize pass.
struct SceneOutcome {
  LiftedProblem problem;
  DualSolution solution;
  LocalizationResult localization;
  std::optional<CertificateReport> certificate;
  double expected_objective = 0.0;  // sum of |alpha| over both sides
};

/// Scene used by demo and certify: the fixed reference channels when
/// `paper_scene` is set, otherwise random channels from the scene seed.
LiftedProblem make_scene(const ExperimentConfig& config);

SceneOutcome run_scene(const LiftedProblem& problem, const ExperimentConfig& config, bool with_certificate);

/// Deterministic summary written to estimates.json (no timings).
json estimates_payload(const SceneOutcome& outcome, const ExperimentConfig& config);

struct DemoArtifacts {
  SceneOutcome outcome;
  int exit_code = kExitOk;
};

/// Writes dual_radar_grid.csv, dual_comm_grid.csv, estimates.json,
/// certificate.json, solve_report.json, dual_solution.json, scene.json and
/// measurements.csv into config.output_dir.
DemoArtifacts run_demo(const ExperimentConfig& config);

/// Same pipeline, reports only the certificate (certificate.json).
DemoArtifacts run_certify(const ExperimentConfig& config);

struct TrialSpec {
  int L = 0;
  int J = 0;
  int trial = 0;
  std::uint64_t seed = 0;

  std::string id() const;
};

/// Parses "L<l>-J<j>-t<k>".
TrialSpec parse_trial_id(const std::string& id, std::uint64_t base_seed);
TrialSpec make_trial(int L, int J, int trial, std::uint64_t base_seed);

struct TrialRecord {
  TrialSpec spec;
  int M = 0;
  int P = 0;
  std::string status;  // solver status, or "error"
  std::string error;
  int iterations = 0;
  double objective = 0.0;
  double expected_objective = 0.0;
  int radar_peaks = 0;
  int comm_peaks = 0;
  std::vector<double> radar_errors;
  std::vector<double> comm_errors;
  bool radar_success = false;
  bool comm_success = false;
  double seconds = 0.0;  // wall time, kept out of the deterministic payload
};

json to_json(const TrialRecord& record);

struct CellResult {
  int L = 0;
  int J = 0;
  int trials = 0;
  double p_success_radar = 0.0;
  double p_success_comm = 0.0;
};

struct SweepResult {
  std::vector<CellResult> cells;
  std::vector<TrialRecord> records;

  const CellResult* cell(int L, int J) const;
};

LiftedProblem make_trial_scene(const ExperimentConfig& config, const TrialSpec& spec);
TrialRecord run_trial(const ExperimentConfig& config, const TrialSpec& spec);

/// All planned trials in (L, J, trial) order.
std::vector<TrialSpec> plan_sweep(const ExperimentConfig& config);

/// Runs the sweep on a bounded worker pool. Records are written to
/// trials.jsonl in plan order by a single collector; sweep.csv and
/// timings.csv are written at the end.
SweepResult run_sweep(const ExperimentConfig& config);

/// Re-runs one trial in isolation and writes replay_<id>.json.
TrialRecord replay_trial(const ExperimentConfig& config, const std::string& trial_id);

}  // namespace dbd
