#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "softctl/harness/scenario.hpp"
#include "softctl/model/checkpoint.hpp"
#include "softctl/model/training.hpp"

namespace softctl::harness {

/// One control tick. `x` is the observed state the decision was made on and
/// `u` the control actually executed from it.
struct StepRecord {
  double t = 0.0;
  Vec x;
  Vec u;
  std::vector<double> h;    // per barrier, scenario order
  double margin = 0.0;      // selected candidate's margin (NaN without a filter)
  bool intervened = false;
  bool fallback = false;
  long long admissible = 0;
  double cost = 0.0;        // optimal candidate's cost (NaN without a planner)
  double tick_ms = 0.0;
  long long stimulations = 0;  // cumulative, before this tick's action
  bool covered = true;      // chosen prediction inside the calibrated box
};

struct TrialSummary {
  int trial = 0;
  std::uint64_t seed = 0;
  std::string controller;
  std::string status = "ok";
  int steps = 0;
  std::vector<double> min_h;         // per barrier
  double min_tsf = 0.0;              // NaN when no region is configured
  std::vector<double> min_asf;       // per configured obstacle
  double safety_ratio = 0.0;         // NaN when no corridor is configured
  long long stimulations = 0;
  int interventions = 0;
  int near_interventions = 0;
  int fallbacks = 0;
  Vec max_abs_u;
  double mean_tracking_error = 0.0;
  int uncovered_ticks = 0;
  double mean_tick_ms = 0.0;

  double overall_min_asf() const;
};

struct TrialLog {
  int trial = 0;
  std::uint64_t seed = 0;
  std::string error;  // empty when the trial completed
  std::vector<StepRecord> records;
  Vec final_state;
  long long final_stimulations = 0;
  TrialSummary summary;
};

struct ModelInfo {
  model::Checkpoint checkpoint;
  std::string source;  // "cache:<path>", "file:<path>" or "trained"
  model::TrainReport report;
  double train_seconds = 0.0;
};

struct RunResult {
  Scenario scenario;
  std::optional<ModelInfo> model;
  std::vector<TrialLog> trials;
};

struct RunOptions {
  /// Directory of cached checkpoints; empty disables caching.
  std::string cache_dir;
  /// Use this checkpoint instead of training.
  std::optional<std::string> checkpoint;
  std::size_t trial_workers = 1;
  /// Progress and warnings (may be null).
  std::ostream* log = nullptr;
};

/// Cache file name for the scenario's plant, data and model settings.
std::string model_cache_key(const Scenario& scenario);
/// Collects data, trains and calibrates the model, or loads it from the cache / checkpoint.
ModelInfo obtain_model(const Scenario& scenario, const RunOptions& options);

/// Runs every trial of the scenario. Trial errors are caught and recorded;
/// other trials proceed.
RunResult run_scenario(const Scenario& scenario, const RunOptions& options = {});
/// Runs with a model that is already available.
RunResult run_scenario(const Scenario& scenario, const std::optional<ModelInfo>& model, const RunOptions& options);

/// Summary statistics recomputed from the records and the final state.
TrialSummary summarize(const Scenario& scenario, const TrialLog& log);

std::string summary_csv(const RunResult& result);
/// Same table without the wall-clock column, for byte-for-byte comparisons.
std::string summary_csv_deterministic(const RunResult& result);
std::string runlog_jsonl(const Scenario& scenario, const TrialLog& log);
TrialLog parse_runlog(const Scenario& scenario, const std::string& text);
std::string runlog_filename(const Scenario& scenario, const TrialLog& log);
/// Paired per-seed comparison of two runs of the same scenario.
std::string compare_csv(const RunResult& a, const RunResult& b);

/// Writes run logs, the summary table and the resolved-config snapshot.
void write_outputs(const RunResult& result, const std::string& out_dir);

}  // namespace softctl::harness
