#include "softctl/safety/barrier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace softctl::safety {

std::string to_string(BarrierKind kind) {
  switch (kind) {
    case BarrierKind::Corridor: return "corridor";
    case BarrierKind::Obstacle: return "obstacle";
    case BarrierKind::RegionBoundary: return "region_boundary";
    case BarrierKind::Box: return "box";
  }
  return "?";
}

BarrierKind barrier_kind_from_string(const std::string& name) {
  if (name == "corridor") return BarrierKind::Corridor;
  if (name == "obstacle") return BarrierKind::Obstacle;
  if (name == "region_boundary") return BarrierKind::RegionBoundary;
  if (name == "box") return BarrierKind::Box;
  throw std::invalid_argument("unknown barrier kind '" + name + "'");
}

void BarrierSpec::validate() const {
  const auto fail = [&](const std::string& why) { throw std::invalid_argument("barrier '" + name + "': " + why); };
  for (int i : position_indices) {
    if (i < 0) fail("negative state index");
  }
  switch (kind) {
    case BarrierKind::Corridor:
      if (dimension() != 2 || center.size() != 2) fail("corridor needs two position indices and a 2-D point");
      if (!(half_width > 0.0)) fail("corridor half-width must be positive");
      break;
    case BarrierKind::Obstacle:
      if (dimension() < 1 || center.size() != dimension()) fail("obstacle center must match the position indices");
      if (radius < 0.0 || radius + clearance < 0.0) fail("obstacle radius must be non-negative");
      break;
    case BarrierKind::RegionBoundary:
      if (dimension() != 2) fail("region boundary needs two position indices");
      if (path.size() < 2) fail("region boundary needs at least two path points");
      if (!(half_width > 0.0)) fail("band half-width must be positive");
      break;
    case BarrierKind::Box:
      if (dimension() < 1 || lo.size() != dimension() || hi.size() != dimension()) fail("box bounds must match the position indices");
      if (((hi - lo).array() <= 0.0).any()) fail("box bounds must satisfy lo < hi");
      break;
  }
}

BarrierSpec corridor(std::string name, std::vector<int> indices, Eigen::Vector2d point, double axis_angle,
                     double half_width) {
  BarrierSpec s;
  s.kind = BarrierKind::Corridor;
  s.name = std::move(name);
  s.position_indices = std::move(indices);
  s.center = point;
  s.axis_angle = axis_angle;
  s.half_width = half_width;
  s.validate();
  return s;
}

BarrierSpec obstacle(std::string name, std::vector<int> indices, Vec center, double radius, double clearance) {
  BarrierSpec s;
  s.kind = BarrierKind::Obstacle;
  s.name = std::move(name);
  s.position_indices = std::move(indices);
  s.center = std::move(center);
  s.radius = radius;
  s.clearance = clearance;
  s.validate();
  return s;
}

BarrierSpec region_boundary(std::string name, std::vector<int> indices, std::vector<Eigen::Vector2d> path, bool closed,
                            double half_width) {
  BarrierSpec s;
  s.kind = BarrierKind::RegionBoundary;
  s.name = std::move(name);
  s.position_indices = std::move(indices);
  s.path = std::move(path);
  s.closed = closed;
  s.half_width = half_width;
  s.validate();
  return s;
}

BarrierSpec box(std::string name, std::vector<int> indices, Vec lo, Vec hi) {
  BarrierSpec s;
  s.kind = BarrierKind::Box;
  s.name = std::move(name);
  s.position_indices = std::move(indices);
  s.lo = std::move(lo);
  s.hi = std::move(hi);
  s.validate();
  return s;
}

PathProjection project_to_path(const std::vector<Eigen::Vector2d>& path, bool closed, const Eigen::Vector2d& p) {
  PathProjection best;
  double best_d2 = std::numeric_limits<double>::infinity();
  const std::size_t segs = closed ? path.size() : path.size() - 1;
  for (std::size_t s = 0; s < segs; ++s) {
    const Eigen::Vector2d& a = path[s];
    const Eigen::Vector2d& b = path[(s + 1) % path.size()];
    const Eigen::Vector2d ab = b - a;
    const double len2 = ab.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
    const Eigen::Vector2d q = a + t * ab;
    const double d2 = (p - q).squaredNorm();
    if (d2 < best_d2) {
      best_d2 = d2;
      best.point = q;
      best.segment = s;
    }
  }
  best.distance = std::sqrt(best_d2);
  return best;
}

double barrier_value_grad(const BarrierSpec& spec, const double* x, double* g) {
  const auto& idx = spec.position_indices;
  switch (spec.kind) {
    case BarrierKind::Corridor: {
      const double s = std::sin(spec.axis_angle), c = std::cos(spec.axis_angle);
      const double e = -s * (x[idx[0]] - spec.center[0]) + c * (x[idx[1]] - spec.center[1]);
      if (g) {
        g[0] = 2.0 * e * s;
        g[1] = -2.0 * e * c;
      }
      return spec.half_width * spec.half_width - e * e;
    }
    case BarrierKind::Obstacle: {
      const double R = spec.radius + spec.clearance;
      double d2 = 0.0;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const double d = x[idx[i]] - spec.center[static_cast<Eigen::Index>(i)];
        d2 += d * d;
        if (g) g[i] = 2.0 * d;
      }
      return d2 - R * R;
    }
    case BarrierKind::RegionBoundary: {
      const Eigen::Vector2d p(x[idx[0]], x[idx[1]]);
      const auto proj = project_to_path(spec.path, spec.closed, p);
      if (g) {
        g[0] = -2.0 * (p[0] - proj.point[0]);
        g[1] = -2.0 * (p[1] - proj.point[1]);
      }
      return spec.half_width * spec.half_width - proj.distance * proj.distance;
    }
    case BarrierKind::Box: {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const double v = x[idx[i]];
        const double h = (spec.hi[static_cast<Eigen::Index>(i)] - v) * (v - spec.lo[static_cast<Eigen::Index>(i)]);
        if (h < best) {
          best = h;
          arg = i;
        }
      }
      if (g) {
        for (std::size_t i = 0; i < idx.size(); ++i) g[i] = 0.0;
        const auto a = static_cast<Eigen::Index>(arg);
        g[arg] = spec.hi[a] + spec.lo[a] - 2.0 * x[idx[arg]];
      }
      return best;
    }
  }
  return 0.0;
}

double barrier_value(const BarrierSpec& spec, const double* x) { return barrier_value_grad(spec, x, nullptr); }

BarrierValue barrier_eval(const BarrierSpec& spec, const Vec& x) {
  for (int i : spec.position_indices) {
    if (i >= x.size()) throw std::invalid_argument("barrier '" + spec.name + "': state index out of range");
  }
  std::vector<double> gpos(spec.position_indices.size());
  BarrierValue out;
  out.h = barrier_value_grad(spec, x.data(), gpos.data());
  out.grad = Vec::Zero(x.size());
  for (std::size_t i = 0; i < gpos.size(); ++i) out.grad[spec.position_indices[i]] += gpos[i];
  return out;
}

BarrierValue barrier_eval(const BarrierSpec& spec, const StateVector& x) { return barrier_eval(spec, x.values()); }

}  // namespace softctl::safety
