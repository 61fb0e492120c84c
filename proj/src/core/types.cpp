#include "softctl/core/types.hpp"

#include <cmath>
#include <limits>

namespace softctl {

bool all_finite(const Vec& v) { return v.allFinite(); }

bool all_finite(std::span<const double> v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

IntegrationError::IntegrationError(int stage, const std::string& detail)
    : std::runtime_error("integration stage " + std::to_string(stage) + ": " + detail), stage_(stage) {}

StateVector::StateVector(Vec values) : values_(std::move(values)) {
  if (!values_.allFinite()) throw std::invalid_argument("StateVector: non-finite entry");
}

StateVector::StateVector(std::initializer_list<double> values) : values_(static_cast<Eigen::Index>(values.size())) {
  Eigen::Index i = 0;
  for (double v : values) values_[i++] = v;
  if (!values_.allFinite()) throw std::invalid_argument("StateVector: non-finite entry");
}

bool operator==(const StateVector& a, const StateVector& b) {
  return a.values_.size() == b.values_.size() && a.values_ == b.values_;
}

ControlLimits ControlLimits::symmetric(int dim, double bound) {
  return {Vec::Constant(dim, -bound), Vec::Constant(dim, bound)};
}

ControlLimits ControlLimits::unbounded(int dim) {
  const double inf = std::numeric_limits<double>::infinity();
  return {Vec::Constant(dim, -inf), Vec::Constant(dim, inf)};
}

Vec ControlLimits::clamp(const Vec& v) const {
  if (v.size() != lo.size()) throw std::invalid_argument("ControlLimits: dimension mismatch");
  return v.cwiseMax(lo).cwiseMin(hi);
}

bool ControlLimits::contains(const Vec& v) const {
  if (v.size() != lo.size()) return false;
  return (v.array() >= lo.array()).all() && (v.array() <= hi.array()).all();
}

ControlVector::ControlVector(const Vec& values, const ControlLimits& limits)
    : values_(limits.clamp(values)), limits_(limits) {
  if (!values_.allFinite()) throw std::invalid_argument("ControlVector: non-finite entry");
}

ControlVector::ControlVector(Vec values)
    : values_(std::move(values)), limits_(ControlLimits::unbounded(static_cast<int>(values_.size()))) {
  if (!values_.allFinite()) throw std::invalid_argument("ControlVector: non-finite entry");
}

bool operator==(const ControlVector& a, const ControlVector& b) {
  return a.values_.size() == b.values_.size() && a.values_ == b.values_;
}

void Trajectory::validate() const {
  if (states.size() != controls.size() + 1) {
    throw std::invalid_argument("Trajectory: states.len must equal controls.len + 1");
  }
  if (!(dt > 0.0)) throw std::invalid_argument("Trajectory: dt must be positive");
}

}  // namespace softctl
