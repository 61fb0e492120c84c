#include "softctl/plants/plants.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "softctl/core/integrators.hpp"

namespace softctl::plants {

// ----------------------------------------------------------------- arm ----

StateVector ArmPlant::state() const {
  Vec x(kStateDim);
  x << position, velocity;
  return StateVector(std::move(x));
}

Vec arm_field(const ArmParams& params, double stiffness, const Vec& x, const Vec& u) {
  const double w = params.natural_freq;
  Eigen::Vector3d attractor(params.reach * (u[0] - u[1]) / 2.0, params.reach * (u[2] - u[3]) / 2.0,
                            -params.lift * (u[0] + u[1] + u[2] + u[3]) / 4.0);
  attractor *= stiffness;
  Vec dx(6);
  for (int i = 0; i < 3; ++i) {
    dx[i] = x[3 + i];
    dx[3 + i] = w * w * (attractor[i] - x[i]) - 2.0 * params.damping_ratio * w * x[3 + i];
  }
  return dx;
}

ArmPlant arm_step(const ArmPlant& plant, const ControlVector& u, double dt, RngStream& rng) {
  if (u.dim() != ArmPlant::kControlDim) throw std::invalid_argument("arm_step: expected 4 tendon inputs");
  const Vec uc = ArmPlant::limits().clamp(u.values());
  const auto field = [&](const Vec& x, const Vec& uu) { return arm_field(plant.params, plant.stiffness, x, uu); };
  const StateVector next = rk4_step(field, plant.state(), ControlVector(uc), dt);

  ArmPlant out = plant;
  out.position = next.values().head<3>();
  out.velocity = next.values().tail<3>();
  if (plant.params.noise_std > 0.0) {
    const double s = plant.params.noise_std * std::sqrt(dt);
    for (int i = 0; i < 3; ++i) out.velocity[i] += s * rng.normal();
  }
  const double r = out.position.norm();
  const double rmax = plant.params.workspace_radius;
  if (r > rmax) {
    const Eigen::Vector3d n = out.position / r;
    out.position = n * rmax;
    const double outward = out.velocity.dot(n);
    if (outward > 0.0) out.velocity -= outward * n;
  }
  return out;
}

ArmPlant apply_fatigue(const ArmPlant& plant, long long cycles) {
  if (cycles < 0) throw std::invalid_argument("apply_fatigue: cycles must be >= 0");
  const double sat = plant.params.fatigue_saturation;
  const double used = std::min(static_cast<double>(cycles), sat);
  ArmPlant out = plant;
  out.stiffness = plant.nominal_stiffness * (1.0 - plant.params.fatigue_loss * used / sat);
  return out;
}

// ---------------------------------------------------------------- fish ----

StateVector FishPlant::state() const { return StateVector{x, y, heading, speed}; }

ControlLimits FishPlant::limits() const {
  Vec lo(2), hi(2);
  lo << -params.bias_limit, params.amplitude_min;
  hi << params.bias_limit, params.amplitude_max;
  return {lo, hi};
}

double FishPlant::oscillation_freq() const { return 2.0 * std::numbers::pi * params.frequency; }

double FishPlant::cruise_speed(double amp) const { return params.speed_gain * amp * params.frequency; }

Vec fish_field(const FishParams& params, const Vec& x, const Vec& u) {
  const double heading = x[2];
  const double speed = x[3];
  const double cruise = params.speed_gain * u[1] * params.frequency;
  Vec dx(4);
  dx[0] = speed * std::cos(heading);
  dx[1] = speed * std::sin(heading);
  dx[2] = params.turn_gain * u[0];
  dx[3] = (cruise - speed) / params.speed_time_constant;
  return dx;
}

FishPlant fish_step(const FishPlant& plant, double bias, double dt, RngStream& rng) {
  const double bmax = plant.params.bias_limit;
  if (std::abs(bias) > bmax) throw std::invalid_argument("fish_step: |bias| exceeds the bias limit");
  const auto field = [&](const Vec& x, const Vec& u) { return fish_field(plant.params, x, u); };
  Vec u(2);
  u << bias, plant.amplitude;
  const StateVector next = rk4_step(field, plant.state(), ControlVector(u), dt);

  FishPlant out = plant;
  out.bias = bias;
  out.x = next[0];
  out.y = next[1];
  out.heading = next[2];
  out.speed = std::max(0.0, next[3]);
  if (plant.params.heading_noise > 0.0) out.heading += plant.params.heading_noise * std::sqrt(dt) * rng.normal();
  return out;
}

FishPlant fish_step(const FishPlant& plant, const ControlVector& command, double dt, RngStream& rng) {
  if (command.dim() != FishPlant::kControlDim) throw std::invalid_argument("fish_step: expected (bias, amplitude)");
  const Vec c = plant.limits().clamp(command.values());
  FishPlant p = plant;
  p.amplitude = c[1];
  return fish_step(p, c[0], dt, rng);
}

// -------------------------------------------------------------- cyborg ----

StateVector CyborgPlant::state() const { return StateVector{x, y, heading}; }

double CyborgPlant::habituation_gain(long long count) const {
  if (!params.habituation) return 1.0;
  // Floor keeps g strictly positive where exp() would underflow.
  return std::max(std::exp(-static_cast<double>(count) / params.habituation_scale), 1e-300);
}

Stimulus stimulus_from_control(double u) {
  if (u >= 0.5) return Stimulus::Left;
  if (u <= -0.5) return Stimulus::Right;
  return Stimulus::None;
}

CyborgPlant cyborg_step(const CyborgPlant& plant, Stimulus stimulus, double dt, RngStream& rng) {
  if (!(dt > 0.0)) throw std::invalid_argument("cyborg_step: dt must be positive");
  CyborgPlant out = plant;
  if (stimulus != Stimulus::None) {
    const double kick = plant.params.kick * plant.response_gain();
    out.heading += stimulus == Stimulus::Left ? kick : -kick;
    out.stimulations += 1;
  }
  out.x += plant.params.walking_speed * std::cos(out.heading) * dt;
  out.y += plant.params.walking_speed * std::sin(out.heading) * dt;
  out.heading += plant.params.turn_bias * dt;
  if (plant.params.heading_noise > 0.0) out.heading += plant.params.heading_noise * std::sqrt(dt) * rng.normal();
  return out;
}

// -------------------------------------------------------------- linear ----

LinearPlant linear_step(const LinearPlant& plant, const ControlVector& u, double dt, RngStream& rng) {
  const Vec uc = plant.control_limits.clamp(u.values());
  const auto field = [&](const Vec& x, const Vec& uu) -> Vec { return plant.a * x + plant.b * uu; };
  LinearPlant out = plant;
  out.x = rk4_step(field, plant.state(), ControlVector(uc), dt).values();
  if (plant.noise_std > 0.0) {
    for (Eigen::Index i = 0; i < out.x.size(); ++i) out.x[i] += plant.noise_std * std::sqrt(dt) * rng.normal();
  }
  return out;
}

}  // namespace softctl::plants
