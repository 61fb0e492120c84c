#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "softctl/core/types.hpp"
#include "softctl/harness/metrics.hpp"
#include "softctl/model/network.hpp"
#include "softctl/model/training.hpp"
#include "softctl/planner/planner.hpp"
#include "softctl/plants/plants.hpp"
#include "softctl/safety/barrier.hpp"
#include "softctl/safety/filter.hpp"

namespace softctl::harness {

/// Schema violation in a scenario file. `key()` is the dotted path of the
/// offending entry.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string key, const std::string& what);
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

enum class PlantKind { Arm, Fish, Cyborg, Linear };
enum class ControllerKind { Framework, NoAcbf, Pid, Continuous };

std::string to_string(PlantKind k);
std::string to_string(ControllerKind k);
ControllerKind controller_from_string(const std::string& name);

struct PlantConfig {
  PlantKind kind = PlantKind::Linear;
  plants::ArmParams arm;
  plants::FishParams fish;
  plants::CyborgParams cyborg;
  Eigen::MatrixXd a, b;      // linear plant
  double control_bound = 1.0;  // linear plant, symmetric
  double noise_std = 0.0;      // linear plant
  Vec initial;
  /// Per-trial Gaussian jitter of the initial state (stddev per entry).
  Vec initial_jitter;
  /// Arm only: wear applied before the run (the model is fitted beforehand).
  long long fatigue_cycles = 0;

  int state_dim() const;
  int control_dim() const;
  /// Heading entries wrapped into (-pi, pi] before the state reaches the planner.
  std::vector<int> angle_indices() const;
  ControlLimits limits() const;
};

/// Target for the tracked state entries as a function of time.
struct ReferenceConfig {
  enum class Kind { Point, Path };
  Kind kind = Kind::Point;
  std::vector<int> tracked;
  Vec value;  // point
  std::vector<Eigen::Vector2d> points;
  bool closed = false;
  /// Path speed; with ramp_time > 0 it rises along a smoothstep from 0.
  double speed = 0.0;
  double ramp_time = 0.0;
  double start = 0.0;  // initial arc length

  double arc_length(double t) const;
  Vec at(double t) const;
};

struct TaskConfig {
  Vec tracking_weight;
  double input_weight = 0.0;
  Vec input_center;
  double rate_weight = 0.0;
  Vec terminal_weight;
};

struct BarrierConfig {
  safety::BarrierSpec spec;
  /// Soft cost term weight * max(0, margin - h)^2 in the planner (0 = none).
  double penalty_weight = 0.0;
  double penalty_margin = 0.0;
};

struct PlannerConfig {
  planner::SamplerConfig sampler;
  std::size_t workers = 1;
};

struct SafetyConfig {
  double alpha = 1.0;
  double gain = 1.0;
  /// theta_max = theta_max_factor * epsilon_bar.
  double theta_max_factor = 10.0;
  safety::Distance distance = safety::Distance::FirstDerivative;
};

struct ModelConfig {
  model::Architecture arch;  // dimensions filled from the plant
  model::TrainConfig train;
  /// Reuse a cached checkpoint keyed by the plant, data and model settings.
  bool cache = true;
};

struct DataConfig {
  int trajectories = 40;
  int validation_trajectories = 8;
  int steps = 200;
  std::uint64_t seed = 1;
  Vec initial_lo, initial_hi;
  /// AR(1) excitation around the control center, clamped and optionally snapped to levels.
  Vec stddev;
  Vec center;
  double correlation = 0.9;
  std::vector<double> levels;
};

struct PidConfig {
  PidGains gains;
  double amplitude = 0.3;  // fish: fixed tail amplitude
  double lookahead = 1.0;  // s ahead on the reference used for pursuit
  double threshold = 0.5;  // cyborg: output magnitude that triggers a stimulus
};

struct ContinuousConfig {
  double threshold = 0.1;  // rad
  double lookahead = 1.0;  // s
};

struct MetricsConfig {
  std::string tsf_region;
  double tsf_scale = 1.0;
  std::vector<std::string> asf_obstacles;
  std::string corridor;
  /// ASF below this counts as "near" an obstacle for intervention bookkeeping.
  double near_distance = 0.0;
  /// Acceptable mean tracking error for the scenario (0: no requirement).
  double tracking_threshold = 0.0;
};

struct Scenario {
  std::string name;
  PlantConfig plant;
  ReferenceConfig reference;
  TaskConfig task;
  std::vector<BarrierConfig> barriers;
  double dt = 0.05;
  double duration = 10.0;
  ControllerKind controller = ControllerKind::Framework;
  std::uint64_t seed = 1;
  int trials = 1;
  PlannerConfig planner;
  SafetyConfig safety;
  ModelConfig model;
  DataConfig data;
  PidConfig pid;
  ContinuousConfig continuous;
  MetricsConfig metrics;

  int steps() const;
  /// Seed of trial i.
  std::uint64_t trial_seed(int trial) const { return seed + static_cast<std::uint64_t>(trial); }
  const BarrierConfig* barrier(const std::string& name) const;
  /// Throws ScenarioError on any inconsistency.
  void validate() const;
};

/// Strict parse: unknown keys and type mismatches raise ScenarioError.
Scenario parse_scenario(const std::string& json_text);
Scenario load_scenario(const std::string& path);
/// Fully resolved configuration (every default spelled out); parsing it back
/// yields the same scenario.
std::string dump_scenario(const Scenario& scenario);

}  // namespace softctl::harness
