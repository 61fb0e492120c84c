#pragma once

#include <vector>

#include "softctl/core/types.hpp"
#include "softctl/model/network.hpp"

namespace softctl::model {

/// Worst-case norm of the model's derivative error over validation data,
/// together with the state-input box the data covered.
struct ErrorBound {
  static constexpr double kSafetyFactor = 1.25;

  double epsilon_bar = 0.0;
  /// Largest observed residual before the safety factor.
  double raw_max = 0.0;
  std::size_t samples = 0;
  Vec state_lo, state_hi;
  Vec control_lo, control_hi;

  /// True when (x, u) lies in the calibrated box (widened by `slack` times its extent).
  bool covers(const Vec& x, const Vec& u, double slack = 0.0) const;
};

/// Residuals ||(x_model(k+1) - x_k) - (x(k+1) - x_k)|| / dt for every step of
/// `validation`, where x_model(k+1) is one RK4 step of the model from x_k.
std::vector<double> one_step_residuals(const ModelParams& params, const std::vector<Trajectory>& validation, double dt);

/// epsilon_bar = kSafetyFactor * max residual. Throws std::invalid_argument
/// when `validation` holds no steps.
ErrorBound calibrate_error_bound(const ModelParams& params, const std::vector<Trajectory>& validation, double dt);

}  // namespace softctl::model
