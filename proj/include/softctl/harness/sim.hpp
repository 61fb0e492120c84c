#pragma once

#include <string>
#include <variant>

#include "softctl/core/rng.hpp"
#include "softctl/core/types.hpp"
#include "softctl/harness/scenario.hpp"
#include "softctl/model/training.hpp"
#include "softctl/plants/plants.hpp"

namespace softctl::harness {

/// One plant instance behind a uniform step interface.
class SimPlant {
 public:
  /// Builds the plant at `initial`; arm wear from the config is applied when `wear` is set.
  SimPlant(const PlantConfig& config, const Vec& initial, bool wear);

  PlantKind kind() const { return kind_; }
  /// Raw simulator state (headings unwrapped).
  StateVector state() const;
  /// State handed to controllers: headings wrapped into (-pi, pi].
  StateVector observe() const;
  ControlLimits limits() const { return limits_; }
  long long stimulations() const;
  /// Applies u (clamped; for the cyborg mapped to a stimulus) and returns the
  /// control that was actually executed.
  Vec step(const ControlVector& u, double dt, RngStream& rng);

  const std::variant<plants::ArmPlant, plants::FishPlant, plants::CyborgPlant, plants::LinearPlant>& plant() const {
    return plant_;
  }

 private:
  PlantKind kind_;
  ControlLimits limits_;
  std::vector<int> angles_;
  std::variant<plants::ArmPlant, plants::FishPlant, plants::CyborgPlant, plants::LinearPlant> plant_;
};

/// Excitation trajectories: data.trajectories for training followed by
/// data.validation_trajectories for validation. Trajectory i starts uniformly
/// in [initial_lo, initial_hi] and is driven by AR(1) noise around the
/// control center, clamped to the limits (and snapped to levels if any).
/// The plant is unworn; randomness comes from RngStream(data.seed).child(i).
model::Dataset collect_dataset(const Scenario& scenario);

/// Line-delimited dataset file: a header line, then one record per state.
void write_dataset(const std::string& path, const Scenario& scenario, const model::Dataset& data);
std::string encode_dataset(const Scenario& scenario, const model::Dataset& data);
/// Throws std::runtime_error on malformed input.
model::Dataset read_dataset(const std::string& path, double* dt = nullptr);

}  // namespace softctl::harness
