#pragma once

#include <Eigen/Core>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace softctl {

using Vec = Eigen::VectorXd;

bool all_finite(const Vec& v);
bool all_finite(std::span<const double> v);

/// Raised when an integrator stage produces a non-finite derivative.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(int stage, const std::string& detail);
  int stage() const { return stage_; }

 private:
  int stage_;
};

/// Plant state with plant-specific units. Entries are finite by construction.
class StateVector {
 public:
  StateVector() = default;
  explicit StateVector(Vec values);
  StateVector(std::initializer_list<double> values);

  const Vec& values() const { return values_; }
  int dim() const { return static_cast<int>(values_.size()); }
  double operator[](int i) const { return values_[i]; }

  friend bool operator==(const StateVector& a, const StateVector& b);

 private:
  Vec values_;
};

/// Per-entry closed interval [lo_j, hi_j].
struct ControlLimits {
  Vec lo;
  Vec hi;

  static ControlLimits symmetric(int dim, double bound);
  static ControlLimits unbounded(int dim);

  int dim() const { return static_cast<int>(lo.size()); }
  Vec clamp(const Vec& v) const;
  bool contains(const Vec& v) const;
};

/// Control input clamped into its limits at construction.
class ControlVector {
 public:
  ControlVector() = default;
  ControlVector(const Vec& values, const ControlLimits& limits);
  /// Unbounded control (limits are +-infinity).
  explicit ControlVector(Vec values);

  const Vec& values() const { return values_; }
  const ControlLimits& limits() const { return limits_; }
  int dim() const { return static_cast<int>(values_.size()); }
  double operator[](int i) const { return values_[i]; }

  friend bool operator==(const ControlVector& a, const ControlVector& b);

 private:
  Vec values_;
  ControlLimits limits_;
};

/// Uniformly sampled state/control time series: states.size() == controls.size() + 1.
struct Trajectory {
  std::vector<StateVector> states;
  std::vector<ControlVector> controls;
  double dt = 0.0;
  double t0 = 0.0;

  std::size_t steps() const { return controls.size(); }
  double time(std::size_t k) const { return t0 + dt * static_cast<double>(k); }
  /// Throws std::invalid_argument when the length or dt invariants are broken.
  void validate() const;
};

}  // namespace softctl
