#include "softctl/harness/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace softctl::harness {

double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

namespace {

using V2 = Eigen::Vector2d;

struct Segment {
  V2 a, b;
};
struct Circle {
  V2 c;
  double r;
};

V2 closest_on_segment(const Segment& s, const V2& p) {
  const V2 ab = s.b - s.a;
  const double len2 = ab.squaredNorm();
  if (len2 == 0.0) return s.a;
  return s.a + std::clamp((p - s.a).dot(ab) / len2, 0.0, 1.0) * ab;
}

void intersect(const Segment& s, const Segment& t, std::vector<V2>& out) {
  const V2 r = s.b - s.a, q = t.b - t.a;
  const double den = r.x() * q.y() - r.y() * q.x();
  if (den == 0.0) return;  // parallel; endpoints are candidates anyway
  const V2 d = t.a - s.a;
  const double u = (d.x() * q.y() - d.y() * q.x()) / den;
  const double v = (d.x() * r.y() - d.y() * r.x()) / den;
  if (u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0) out.push_back(s.a + u * r);
}

void intersect(const Segment& s, const Circle& c, std::vector<V2>& out) {
  const V2 d = s.b - s.a, f = s.a - c.c;
  const double A = d.squaredNorm();
  if (A == 0.0) return;
  const double B = 2.0 * f.dot(d), C = f.squaredNorm() - c.r * c.r;
  const double disc = B * B - 4.0 * A * C;
  if (disc < 0.0) return;
  const double sq = std::sqrt(disc);
  for (double t : {(-B - sq) / (2.0 * A), (-B + sq) / (2.0 * A)}) {
    if (t >= 0.0 && t <= 1.0) out.push_back(s.a + t * d);
  }
}

void intersect(const Circle& a, const Circle& b, std::vector<V2>& out) {
  const V2 d = b.c - a.c;
  const double dist = d.norm();
  if (dist == 0.0 || dist > a.r + b.r || dist < std::abs(a.r - b.r)) return;
  const double along = (a.r * a.r - b.r * b.r + dist * dist) / (2.0 * dist);
  const double h = std::sqrt(std::max(0.0, a.r * a.r - along * along));
  const V2 mid = a.c + along * d / dist;
  const V2 perp(-d.y() / dist, d.x() / dist);
  out.push_back(mid + h * perp);
  out.push_back(mid - h * perp);
}

}  // namespace

double band_boundary_distance(const std::vector<Eigen::Vector2d>& path, bool closed, double w,
                              const Eigen::Vector2d& p) {
  if (path.empty()) throw std::invalid_argument("band_boundary_distance: empty path");
  // The boundary is contained in the union of the segment offsets and the
  // circles around the vertices; its nearest point is either a projection
  // onto one of those pieces or a point where two pieces meet.
  std::vector<Segment> segs;
  std::vector<Circle> circles;
  const std::size_t nseg = closed ? path.size() : path.size() - 1;
  for (std::size_t s = 0; s < nseg; ++s) {
    const V2& a = path[s];
    const V2& b = path[(s + 1) % path.size()];
    const V2 ab = b - a;
    if (ab.squaredNorm() == 0.0) continue;
    const V2 n = V2(-ab.y(), ab.x()).normalized() * w;
    segs.push_back({a + n, b + n});
    segs.push_back({a - n, b - n});
  }
  for (const auto& v : path) circles.push_back({v, w});

  std::vector<V2> cand;
  for (const auto& s : segs) {
    cand.push_back(closest_on_segment(s, p));
    cand.push_back(s.a);
    cand.push_back(s.b);
  }
  for (const auto& c : circles) {
    const V2 d = p - c.c;
    const double dn = d.norm();
    cand.push_back(c.c + (dn > 0.0 ? V2(d / dn) : V2(1.0, 0.0)) * c.r);
  }
  for (std::size_t i = 0; i < segs.size(); ++i) {
    for (std::size_t j = i + 1; j < segs.size(); ++j) intersect(segs[i], segs[j], cand);
    for (const auto& c : circles) intersect(segs[i], c, cand);
  }
  for (std::size_t i = 0; i < circles.size(); ++i) {
    for (std::size_t j = i + 1; j < circles.size(); ++j) intersect(circles[i], circles[j], cand);
  }

  const double tol = 1e-9 * w;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& q : cand) {
    const double d = (q - p).norm();
    if (d >= best) continue;
    if (safety::project_to_path(path, closed, q).distance < w - tol) continue;  // swallowed by the band
    best = d;
  }
  return best;
}

namespace {
Eigen::Vector2d planar(const StateVector& x, const safety::BarrierSpec& b) {
  if (b.position_indices.size() != 2) throw std::invalid_argument("barrier '" + b.name + "' is not planar");
  for (int i : b.position_indices) {
    if (i >= x.dim()) throw std::invalid_argument("barrier '" + b.name + "': state index out of range");
  }
  return {x[b.position_indices[0]], x[b.position_indices[1]]};
}
}  // namespace

double tsf(const StateVector& x, const safety::BarrierSpec& region, double scale) {
  if (region.kind != safety::BarrierKind::RegionBoundary) {
    throw std::invalid_argument("tsf: barrier '" + region.name + "' is not a region boundary");
  }
  const Eigen::Vector2d p = planar(x, region);
  const double d = safety::project_to_path(region.path, region.closed, p).distance;
  if (d >= region.half_width) return scale * (region.half_width - d);
  return scale * band_boundary_distance(region.path, region.closed, region.half_width, p);
}

double asf(const StateVector& x, const safety::BarrierSpec& obstacle) {
  if (obstacle.kind != safety::BarrierKind::Obstacle) {
    throw std::invalid_argument("asf: barrier '" + obstacle.name + "' is not an obstacle");
  }
  double d2 = 0.0;
  for (std::size_t i = 0; i < obstacle.position_indices.size(); ++i) {
    const double d = x[obstacle.position_indices[i]] - obstacle.center[static_cast<Eigen::Index>(i)];
    d2 += d * d;
  }
  return std::sqrt(d2) - obstacle.radius;
}

double corridor_offset(const StateVector& x, const safety::BarrierSpec& corridor) {
  if (corridor.kind != safety::BarrierKind::Corridor) {
    throw std::invalid_argument("barrier '" + corridor.name + "' is not a corridor");
  }
  const Eigen::Vector2d p = planar(x, corridor);
  const double s = std::sin(corridor.axis_angle), c = std::cos(corridor.axis_angle);
  return -s * (p.x() - corridor.center[0]) + c * (p.y() - corridor.center[1]);
}

double safety_ratio(const std::vector<StateVector>& states, const safety::BarrierSpec& corridor) {
  if (states.empty()) throw std::invalid_argument("safety_ratio: empty trajectory");
  std::size_t inside = 0;
  for (const auto& x : states) inside += std::abs(corridor_offset(x, corridor)) <= corridor.half_width;
  return static_cast<double>(inside) / static_cast<double>(states.size());
}

double safety_ratio(const Trajectory& trajectory, const safety::BarrierSpec& corridor) {
  return safety_ratio(trajectory.states, corridor);
}

std::pair<ControlVector, PidState> pid_step(const Vec& error, const PidGains& gains, const PidState& state,
                                            const ControlLimits& limits, double dt) {
  if (gains.kp < 0.0 || gains.ki < 0.0 || gains.kd < 0.0) throw std::invalid_argument("pid_step: negative gain");
  if (!(dt > 0.0)) throw std::invalid_argument("pid_step: dt must be positive");
  if (limits.dim() != error.size()) throw std::invalid_argument("pid_step: limits do not match the error size");
  PidState next;
  next.integral = (state.integral.size() == error.size() ? state.integral : Vec::Zero(error.size())) + error * dt;
  Vec derivative = Vec::Zero(error.size());
  if (state.primed) derivative = (error - state.previous_error) / dt;
  next.previous_error = error;
  next.primed = true;
  const Vec raw = gains.kp * error + gains.ki * next.integral + gains.kd * derivative;
  return {ControlVector(raw, limits), next};
}

plants::Stimulus continuous_stimulation_step(double heading_error, double threshold) {
  if (heading_error > threshold) return plants::Stimulus::Left;
  if (heading_error < -threshold) return plants::Stimulus::Right;
  return plants::Stimulus::None;
}

}  // namespace softctl::harness
