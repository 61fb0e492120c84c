#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "softctl/core/types.hpp"
#include "softctl/planner/planner.hpp"
#include "softctl/safety/barrier.hpp"

namespace softctl::safety {

class MappingError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Online estimate theta_hat of the unmodelled part of the dynamics.
struct AdaptiveEstimate {
  Vec theta;
  double gain = 0.0;       // Gamma
  double theta_max = 0.0;  // projection radius
  /// Number of past estimates kept in `history` (0 disables logging).
  std::size_t history_length = 0;
  std::vector<Vec> history;

  static AdaptiveEstimate zero(int dim, double gain, double theta_max);
};

/// theta <- Proj_{|theta| <= theta_max}(theta - gain * grad * dt).
AdaptiveEstimate update_adaptive(const AdaptiveEstimate& est, const Vec& grad, double dt);

/// Phi + Pi with
///   Pi  = grad^T f - |grad| eps_bar
///   Phi = (theta_hat + dh/dtheta_hat)^T grad + alpha h,   dh/dtheta_hat = 0 for the shipped barriers.
/// The candidate is admissible at x when the result is >= 0.
double admissibility_margin(const Vec& f_candidate, const StateVector& x, const BarrierSpec& spec,
                            const AdaptiveEstimate& est, double eps_bar, double alpha = 1.0);
/// Raw-memory form over the barrier's position coordinates.
double admissibility_margin(const double* f, const double* x, const BarrierSpec& spec, const Vec& theta, double eps_bar,
                            double alpha);

enum class Distance {
  FirstDerivative,  // |f_i(x_0) - f_opt(x_0)| on the first predicted derivative
  Trajectory,       // L2 distance between the full predicted state sequences
};

struct FilterConfig {
  double alpha = 1.0;
  Distance distance = Distance::FirstDerivative;
};

/// Margin of a whole candidate: the minimum of admissibility_margin over the
/// enforced barriers and over the predicted states x_1..x_H paired with their
/// predicted derivatives. (x_0 is shared by every candidate.)
double candidate_margin(const planner::CandidateBatch& batch, std::size_t i, const std::vector<BarrierSpec>& barriers,
                        const AdaptiveEstimate& est, double eps_bar, double alpha);

struct FilterDecision {
  std::size_t selected = 0;
  std::size_t optimal = 0;
  bool intervened = false;
  /// No candidate was admissible; `selected` maximizes the margin instead.
  bool fallback = false;
  double margin = 0.0;          // margin of the selected candidate
  double optimal_margin = 0.0;  // margin of the planner's candidate
  std::size_t admissible = 0;   // |S|
  std::vector<double> margins;  // every candidate, for auditing
  Trajectory f_safe;
  std::vector<ControlVector> u_safe;
};

/// Passes the optimal candidate through when admissible; otherwise selects the
/// admissible candidate closest to it (ties: lower cost, then lower index), or
/// the max-margin candidate with `fallback` set when none is admissible.
FilterDecision filter_select(const planner::CandidateBatch& batch, std::size_t optimal,
                             const std::vector<BarrierSpec>& barriers, const AdaptiveEstimate& est, double eps_bar,
                             const FilterConfig& config = {});

/// Distance used to compare candidates i and j.
double candidate_distance(const planner::CandidateBatch& batch, std::size_t i, std::size_t j, Distance kind);

/// The stored pairing between control sequences and predicted motions.
class ReciprocalMap {
 public:
  explicit ReciprocalMap(const planner::CandidateBatch& batch);

  /// Control sequence that produced prediction `index`.
  std::vector<ControlVector> controls(std::size_t index) const;
  /// Prediction produced by control sequence `index`.
  Trajectory prediction(std::size_t index) const;
  /// Index of the first candidate whose control sequence equals `u` exactly.
  std::size_t index_of_controls(const std::vector<ControlVector>& u) const;
  /// Index of the first candidate whose predicted states equal `f` exactly.
  std::size_t index_of_prediction(const Trajectory& f) const;

 private:
  void check(std::size_t index) const;
  const planner::CandidateBatch* batch_;
};

/// controls[selected]; throws MappingError when out of range.
std::vector<ControlVector> reciprocal_map(const planner::CandidateBatch& batch, std::size_t selected);

}  // namespace softctl::safety
