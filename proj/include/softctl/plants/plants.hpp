#pragma once

#include <Eigen/Core>

#include <cstdint>

#include "softctl/core/rng.hpp"
#include "softctl/core/types.hpp"

namespace softctl::plants {

// ---------------------------------------------------------------------------
// Tendon-driven arm: tip attracted toward a point set by the tendon
// differentials, second-order spring-damper response.
//
//   attractor = kappa * (reach (u0 - u1)/2, reach (u2 - u3)/2, -lift (u0+u1+u2+u3)/4)
//   dv/dt     = w^2 (attractor - p) - 2 zeta w v
//
// State vector: (px, py, pz, vx, vy, vz). Controls: four tendons in [-1, 1].
// ---------------------------------------------------------------------------
struct ArmParams {
  double reach = 0.2;           // m of lateral attractor offset per unit differential
  double lift = 0.05;           // m of axial attractor offset under full co-contraction
  double natural_freq = 4.0;    // rad/s
  double damping_ratio = 0.8;
  double workspace_radius = 0.3;  // m, around the rest pose at the origin
  double noise_std = 0.0;       // m/s per sqrt(s), added to the velocity
  double fatigue_loss = 0.4;    // fraction of stiffness lost at saturation (rho)
  double fatigue_saturation = 3000.0;  // cycles (C_sat)
};

struct ArmPlant {
  ArmParams params;
  Eigen::Vector3d position = Eigen::Vector3d::Zero();
  Eigen::Vector3d velocity = Eigen::Vector3d::Zero();
  double stiffness = 1.0;          // kappa
  double nominal_stiffness = 1.0;  // kappa_0

  static constexpr int kStateDim = 6;
  static constexpr int kControlDim = 4;

  StateVector state() const;
  static ControlLimits limits() { return ControlLimits::symmetric(kControlDim, 1.0); }
};

Vec arm_field(const ArmParams& params, double stiffness, const Vec& x, const Vec& u);
ArmPlant arm_step(const ArmPlant& plant, const ControlVector& u, double dt, RngStream& rng);
/// kappa = kappa_0 (1 - rho min(cycles, C_sat) / C_sat).
ArmPlant apply_fatigue(const ArmPlant& plant, long long cycles);

// ---------------------------------------------------------------------------
// Robotic fish: unicycle with heading rate proportional to the tail bias and
// speed relaxing toward a cruise speed set by the tail amplitude.
//
//   dpsi/dt = k_turn * bias        ds/dt = (gain * A * f - s) / tau
//   dx/dt   = s cos psi            dy/dt = s sin psi
//
// State vector: (x, y, psi, s). Controls: (bias, amplitude).
// ---------------------------------------------------------------------------
struct FishParams {
  double turn_gain = 1.5;          // rad/s of heading rate per rad of bias
  double bias_limit = 0.5;         // rad (b_max)
  double amplitude_min = 0.1;      // rad
  double amplitude_max = 0.6;      // rad (A_max)
  double frequency = 1.5;          // Hz of tail oscillation
  double speed_gain = 0.45;        // m per rad per cycle
  double speed_time_constant = 0.5;  // s
  double heading_noise = 0.0;      // rad per sqrt(s)
};

struct FishPlant {
  FishParams params;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double amplitude = 0.3;
  double bias = 0.0;

  static constexpr int kStateDim = 4;
  static constexpr int kControlDim = 2;

  StateVector state() const;
  ControlLimits limits() const;
  double oscillation_freq() const;  // rad/s
  double cruise_speed() const { return cruise_speed(amplitude); }
  double cruise_speed(double amp) const;
};

Vec fish_field(const FishParams& params, const Vec& x, const Vec& u);
/// Steps with the plant's current amplitude. |bias| must not exceed b_max.
FishPlant fish_step(const FishPlant& plant, double bias, double dt, RngStream& rng);
/// Sets the amplitude (clamped to [A_min, A_max]) and steps with the bias.
FishPlant fish_step(const FishPlant& plant, const ControlVector& command, double dt, RngStream& rng);

// ---------------------------------------------------------------------------
// Cyborg insect: constant-speed walker whose heading random-walks; each
// stimulation kicks the heading by +-kick * g(c) with g(c) = exp(-c / scale).
//
// State vector: (x, y, psi). Control: one entry in [-1, 1], +1 = Left.
// ---------------------------------------------------------------------------
enum class Stimulus { None, Left, Right };

struct CyborgParams {
  double walking_speed = 0.05;     // m/s
  double kick = 0.3;               // rad
  double heading_noise = 0.05;     // rad per sqrt(s)
  double habituation_scale = 60.0; // stimulations
  double turn_bias = 0.0;          // rad/s of steady veering
  bool habituation = true;
};

struct CyborgPlant {
  CyborgParams params;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  long long stimulations = 0;

  static constexpr int kStateDim = 3;
  static constexpr int kControlDim = 1;

  StateVector state() const;
  static ControlLimits limits() { return ControlLimits::symmetric(kControlDim, 1.0); }
  double response_gain() const { return habituation_gain(stimulations); }
  double habituation_gain(long long count) const;
};

/// Control value to stimulus: >= 0.5 Left, <= -0.5 Right, otherwise None.
Stimulus stimulus_from_control(double u);
CyborgPlant cyborg_step(const CyborgPlant& plant, Stimulus stimulus, double dt, RngStream& rng);

// ---------------------------------------------------------------------------
// Linear test plant dx/dt = A x + B u with optional white process noise.
// ---------------------------------------------------------------------------
struct LinearPlant {
  Eigen::MatrixXd a;
  Eigen::MatrixXd b;
  Vec x;
  ControlLimits control_limits;
  double noise_std = 0.0;

  StateVector state() const { return StateVector(x); }
};

LinearPlant linear_step(const LinearPlant& plant, const ControlVector& u, double dt, RngStream& rng);

}  // namespace softctl::plants
