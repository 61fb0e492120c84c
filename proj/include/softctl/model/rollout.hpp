#pragma once

#include <span>
#include <vector>

#include "softctl/core/types.hpp"
#include "softctl/model/network.hpp"

namespace softctl::model {

/// Flat storage for a batch of model rollouts.
///   states[(b * (H + 1) + k) * n + j]       x_k of sample b
///   derivatives[(b * (H + 1) + k) * n + j]  f(x_k, u_min(k, H-1)) of sample b
/// derivatives[k] for k < H is the first RK4 stage of step k; derivatives[H]
/// is one extra evaluation holding the last control.
struct RolloutBatch {
  int batch = 0;
  int horizon = 0;
  int state_dim = 0;
  std::vector<double> states;
  std::vector<double> derivatives;

  void resize(int b, int h, int n);
  const double* state(int b, int k) const { return states.data() + index(b, k); }
  const double* derivative(int b, int k) const { return derivatives.data() + index(b, k); }

 private:
  std::size_t index(int b, int k) const {
    return (static_cast<std::size_t>(b) * static_cast<std::size_t>(horizon + 1) + static_cast<std::size_t>(k)) *
           static_cast<std::size_t>(state_dim);
  }
};

/// Reusable scratch space for rollout_batch.
class RolloutWorkspace {
 public:
  explicit RolloutWorkspace(const ModelParams& params) : evaluator_(params) {}
  BatchEvaluator& evaluator() { return evaluator_; }
  std::vector<double> cur, scratch, stage_in, k1, k2, k3, k4;

 private:
  BatchEvaluator evaluator_;
};

/// Integrates `batch` control sequences with H RK4 steps of the model.
/// initial: batch x n (sample-major), or n values shared by all samples when
/// shared_initial is true. controls: batch x H x m (sample-major).
/// Throws IntegrationError naming the RK4 stage when a derivative is non-finite.
void rollout_batch(const ModelParams& params, std::span<const double> initial, bool shared_initial,
                   std::span<const double> controls, int batch, int horizon, double dt, RolloutBatch& out,
                   RolloutWorkspace& ws);

/// Predicted trajectory of H + 1 states under `controls` (H >= 1).
Trajectory rollout(const ModelParams& params, const StateVector& x0, const std::vector<ControlVector>& controls,
                   double dt);

}  // namespace softctl::model
