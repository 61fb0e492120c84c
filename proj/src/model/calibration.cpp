#include "softctl/model/calibration.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "softctl/model/rollout.hpp"

namespace softctl::model {

bool ErrorBound::covers(const Vec& x, const Vec& u, double slack) const {
  if (x.size() != state_lo.size() || u.size() != control_lo.size()) return false;
  const Vec sx = slack * (state_hi - state_lo);
  const Vec su = slack * (control_hi - control_lo);
  return (x.array() >= (state_lo - sx).array()).all() && (x.array() <= (state_hi + sx).array()).all() &&
         (u.array() >= (control_lo - su).array()).all() && (u.array() <= (control_hi + su).array()).all();
}

std::vector<double> one_step_residuals(const ModelParams& params, const std::vector<Trajectory>& validation,
                                       double dt) {
  const int n = params.arch.state_dim;
  const int m = params.arch.control_dim;
  std::vector<double> out;
  RolloutWorkspace ws(params);
  RolloutBatch batch;
  std::vector<double> init, controls;
  for (const auto& t : validation) {
    t.validate();
    const int steps = static_cast<int>(t.steps());
    if (steps == 0) continue;
    init.clear();
    controls.clear();
    for (int k = 0; k < steps; ++k) {
      const auto& x = t.states[static_cast<std::size_t>(k)].values();
      const auto& u = t.controls[static_cast<std::size_t>(k)].values();
      if (x.size() != n || u.size() != m) throw ModelShapeError("calibration: trajectory dimension mismatch");
      init.insert(init.end(), x.data(), x.data() + n);
      controls.insert(controls.end(), u.data(), u.data() + m);
    }
    rollout_batch(params, init, false, controls, steps, 1, dt, batch, ws);
    for (int k = 0; k < steps; ++k) {
      const Vec& x0 = t.states[static_cast<std::size_t>(k)].values();
      const Vec& x1 = t.states[static_cast<std::size_t>(k + 1)].values();
      const Eigen::Map<const Vec> pred(batch.state(k, 1), n);
      out.push_back(((pred - x0) - (x1 - x0)).norm() / dt);
    }
  }
  return out;
}

ErrorBound calibrate_error_bound(const ModelParams& params, const std::vector<Trajectory>& validation, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("calibrate_error_bound: dt must be positive");
  const auto residuals = one_step_residuals(params, validation, dt);
  if (residuals.empty()) throw std::invalid_argument("calibrate_error_bound: validation split is empty");

  ErrorBound eb;
  eb.samples = residuals.size();
  eb.raw_max = *std::max_element(residuals.begin(), residuals.end());
  eb.epsilon_bar = ErrorBound::kSafetyFactor * eb.raw_max;
  const int n = params.arch.state_dim;
  const int m = params.arch.control_dim;
  const double inf = std::numeric_limits<double>::infinity();
  eb.state_lo = Vec::Constant(n, inf);
  eb.state_hi = Vec::Constant(n, -inf);
  eb.control_lo = Vec::Constant(m, inf);
  eb.control_hi = Vec::Constant(m, -inf);
  for (const auto& t : validation) {
    for (const auto& x : t.states) {
      eb.state_lo = eb.state_lo.cwiseMin(x.values());
      eb.state_hi = eb.state_hi.cwiseMax(x.values());
    }
    for (const auto& u : t.controls) {
      eb.control_lo = eb.control_lo.cwiseMin(u.values());
      eb.control_hi = eb.control_hi.cwiseMax(u.values());
    }
  }
  return eb;
}

}  // namespace softctl::model
