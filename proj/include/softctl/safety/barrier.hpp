#pragma once

#include <Eigen/Core>

#include <string>
#include <vector>

#include "softctl/core/types.hpp"

namespace softctl::safety {

enum class BarrierKind { Corridor, Obstacle, RegionBoundary, Box };

std::string to_string(BarrierKind kind);
BarrierKind barrier_kind_from_string(const std::string& name);

/// Safe set {x : h(x) >= 0} expressed over a few position coordinates of the
/// state. Build with the factory functions; every kind is a quadratic in the
/// distance to its geometry so h and its gradient are cheap and smooth.
///
///   corridor         h = d^2 - e^2          e: offset from a line through `center` at `axis_angle`
///   obstacle         h = |p - c|^2 - R^2    R = radius + clearance
///   region_boundary  h = w^2 - dist(p, path)^2
///   box              h = min_i (hi_i - p_i)(p_i - lo_i)
struct BarrierSpec {
  BarrierKind kind = BarrierKind::Obstacle;
  std::string name;
  /// State indices holding the position the barrier constrains.
  std::vector<int> position_indices;

  Vec center;              // obstacle center / point on the corridor centerline
  double radius = 0.0;     // obstacle radius
  double clearance = 0.0;  // extra standoff added to the radius
  double half_width = 0.0; // corridor half-width d, band half-width w
  double axis_angle = 0.0; // corridor direction (rad)
  std::vector<Eigen::Vector2d> path;  // region boundary polyline
  bool closed = false;                // polyline wraps around
  Vec lo, hi;                         // box bounds

  /// Enforced by the safety filter.
  bool filter = true;
  /// Contributes a proximity penalty to the planner cost.
  bool penalty = false;

  int dimension() const { return static_cast<int>(position_indices.size()); }
  /// Throws std::invalid_argument on inconsistent parameters.
  void validate() const;
};

BarrierSpec corridor(std::string name, std::vector<int> indices, Eigen::Vector2d point, double axis_angle,
                     double half_width);
BarrierSpec obstacle(std::string name, std::vector<int> indices, Vec center, double radius, double clearance = 0.0);
BarrierSpec region_boundary(std::string name, std::vector<int> indices, std::vector<Eigen::Vector2d> path, bool closed,
                            double half_width);
BarrierSpec box(std::string name, std::vector<int> indices, Vec lo, Vec hi);

struct BarrierValue {
  double h = 0.0;
  Vec grad;  // dh/dx over the full state
};

BarrierValue barrier_eval(const BarrierSpec& spec, const StateVector& x);
BarrierValue barrier_eval(const BarrierSpec& spec, const Vec& x);
/// h only, reading the state from raw memory.
double barrier_value(const BarrierSpec& spec, const double* x);
/// h and the gradient restricted to the barrier's position indices.
double barrier_value_grad(const BarrierSpec& spec, const double* x, double* grad_pos);

/// Closest point of a polyline to p and the distance to it.
struct PathProjection {
  Eigen::Vector2d point;
  double distance = 0.0;
  std::size_t segment = 0;
};
PathProjection project_to_path(const std::vector<Eigen::Vector2d>& path, bool closed, const Eigen::Vector2d& p);

}  // namespace softctl::safety
