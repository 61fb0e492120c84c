#pragma once

#include <Eigen/Core>

#include <utility>
#include <vector>

#include "softctl/core/types.hpp"
#include "softctl/plants/plants.hpp"
#include "softctl/safety/barrier.hpp"

namespace softctl::harness {

/// Wraps an angle into (-pi, pi].
double wrap_angle(double a);

/// Distance from p to the boundary of the band of half-width w around the
/// polyline, i.e. to the set of points lying exactly w away from the path.
double band_boundary_distance(const std::vector<Eigen::Vector2d>& path, bool closed, double half_width,
                              const Eigen::Vector2d& p);

/// Tracking safety function: distance to the band boundary, positive inside
/// the band and negative outside, multiplied by `scale`.
double tsf(const StateVector& x, const safety::BarrierSpec& region, double scale = 1.0);

/// Avoidance safety function: distance from the tracked point to the obstacle
/// surface (radius only, clearance excluded), positive outside.
double asf(const StateVector& x, const safety::BarrierSpec& obstacle);

/// Signed lateral offset from a corridor's centerline.
double corridor_offset(const StateVector& x, const safety::BarrierSpec& corridor);

/// Fraction of the trajectory's states with |lateral offset| <= half-width.
double safety_ratio(const Trajectory& trajectory, const safety::BarrierSpec& corridor);
double safety_ratio(const std::vector<StateVector>& states, const safety::BarrierSpec& corridor);

struct PidGains {
  double kp = 0.0;
  double ki = 0.0;
  double kd = 0.0;
};

/// Integrator and last error. The integrator accumulates the raw error with
/// no anti-windup, so it keeps growing while the output sits on a limit.
struct PidState {
  Vec integral;
  Vec previous_error;
  bool primed = false;
};

/// u = clamp(kp e + ki I + kd de/dt) with I <- I + e dt updated first. The
/// derivative term is zero on the first call.
std::pair<ControlVector, PidState> pid_step(const Vec& error, const PidGains& gains, const PidState& state,
                                            const ControlLimits& limits, double dt);

/// Left when heading_error > threshold, Right when < -threshold, else None.
plants::Stimulus continuous_stimulation_step(double heading_error, double threshold);

}  // namespace softctl::harness
