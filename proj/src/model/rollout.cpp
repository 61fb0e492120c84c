#include "softctl/model/rollout.hpp"

#include <cmath>
#include <stdexcept>

namespace softctl::model {

void RolloutBatch::resize(int b, int h, int n) {
  batch = b;
  horizon = h;
  state_dim = n;
  const std::size_t size = static_cast<std::size_t>(b) * static_cast<std::size_t>(h + 1) * static_cast<std::size_t>(n);
  states.resize(size);
  derivatives.resize(size);
}

namespace {

// Fills the feature-major network input [state; control] for one stage.
void pack_input(const std::vector<double>& state_fm, std::span<const double> controls, int batch, int horizon,
                int step, int n, int m, std::vector<double>& in) {
  const std::size_t nb = static_cast<std::size_t>(batch);
  std::copy_n(state_fm.data(), static_cast<std::size_t>(n) * nb, in.data());
  for (int j = 0; j < m; ++j) {
    double* dst = in.data() + (static_cast<std::size_t>(n + j)) * nb;
    for (int b = 0; b < batch; ++b) {
      dst[b] = controls[(static_cast<std::size_t>(b) * static_cast<std::size_t>(horizon) + static_cast<std::size_t>(step)) *
                            static_cast<std::size_t>(m) +
                        static_cast<std::size_t>(j)];
    }
  }
}

void check_finite(const std::vector<double>& v, std::size_t count, int stage) {
  for (std::size_t i = 0; i < count; ++i) {
    if (!std::isfinite(v[i])) throw IntegrationError(stage, "model derivative is not finite");
  }
}

}  // namespace

void rollout_batch(const ModelParams& params, std::span<const double> initial, bool shared_initial,
                   std::span<const double> controls, int batch, int horizon, double dt, RolloutBatch& out,
                   RolloutWorkspace& ws) {
  const int n = params.arch.state_dim;
  const int m = params.arch.control_dim;
  if (horizon < 1) throw std::invalid_argument("rollout: horizon must be >= 1");
  if (!(dt > 0.0)) throw std::invalid_argument("rollout: dt must be positive");
  if (batch < 1) throw std::invalid_argument("rollout: empty batch");
  const std::size_t nb = static_cast<std::size_t>(batch);
  const std::size_t need_init = shared_initial ? static_cast<std::size_t>(n) : nb * static_cast<std::size_t>(n);
  if (initial.size() != need_init) throw ModelShapeError("rollout: initial state has the wrong dimension");
  if (controls.size() != nb * static_cast<std::size_t>(horizon) * static_cast<std::size_t>(m)) {
    throw ModelShapeError("rollout: control sequence has the wrong dimension");
  }

  out.resize(batch, horizon, n);
  const std::size_t state_count = static_cast<std::size_t>(n) * nb;
  ws.cur.resize(state_count);
  ws.stage_in.resize(static_cast<std::size_t>(n + m) * nb);
  ws.k1.resize(state_count);
  ws.k2.resize(state_count);
  ws.k3.resize(state_count);
  ws.k4.resize(state_count);
  ws.scratch.resize(state_count);
  std::vector<double>& scratch = ws.scratch;

  for (int j = 0; j < n; ++j) {
    for (int b = 0; b < batch; ++b) {
      ws.cur[static_cast<std::size_t>(j) * nb + static_cast<std::size_t>(b)] =
          shared_initial ? initial[static_cast<std::size_t>(j)]
                         : initial[static_cast<std::size_t>(b) * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
    }
  }

  auto store = [&](std::vector<double>& dst, const std::vector<double>& fm, int k) {
    for (int b = 0; b < batch; ++b) {
      double* row = dst.data() + (static_cast<std::size_t>(b) * static_cast<std::size_t>(horizon + 1) + static_cast<std::size_t>(k)) *
                                     static_cast<std::size_t>(n);
      for (int j = 0; j < n; ++j) row[j] = fm[static_cast<std::size_t>(j) * nb + static_cast<std::size_t>(b)];
    }
  };
  auto eval_stage = [&](const std::vector<double>& x_fm, int step, std::vector<double>& k_out, int stage) {
    pack_input(x_fm, controls, batch, horizon, step, n, m, ws.stage_in);
    ws.evaluator().evaluate(ws.stage_in.data(), batch, k_out.data());
    check_finite(k_out, state_count, stage);
  };

  store(out.states, ws.cur, 0);
  const double half = 0.5 * dt;
  const double sixth = dt / 6.0;
  for (int k = 0; k < horizon; ++k) {
    eval_stage(ws.cur, k, ws.k1, 1);
    store(out.derivatives, ws.k1, k);
    for (std::size_t i = 0; i < state_count; ++i) scratch[i] = ws.cur[i] + half * ws.k1[i];
    eval_stage(scratch, k, ws.k2, 2);
    for (std::size_t i = 0; i < state_count; ++i) scratch[i] = ws.cur[i] + half * ws.k2[i];
    eval_stage(scratch, k, ws.k3, 3);
    for (std::size_t i = 0; i < state_count; ++i) scratch[i] = ws.cur[i] + dt * ws.k3[i];
    eval_stage(scratch, k, ws.k4, 4);
    for (std::size_t i = 0; i < state_count; ++i) {
      ws.cur[i] = ws.cur[i] + sixth * (((ws.k1[i] + 2.0 * ws.k2[i]) + 2.0 * ws.k3[i]) + ws.k4[i]);
    }
    check_finite(ws.cur, state_count, 4);
    store(out.states, ws.cur, k + 1);
  }
  eval_stage(ws.cur, horizon - 1, ws.k1, 1);
  store(out.derivatives, ws.k1, horizon);
}

Trajectory rollout(const ModelParams& params, const StateVector& x0, const std::vector<ControlVector>& controls,
                   double dt) {
  const int n = params.arch.state_dim;
  const int m = params.arch.control_dim;
  const int horizon = static_cast<int>(controls.size());
  if (horizon < 1) throw std::invalid_argument("rollout: need at least one control");
  if (x0.dim() != n) throw ModelShapeError("rollout: initial state has the wrong dimension");
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(horizon * m));
  for (const auto& u : controls) {
    if (u.dim() != m) throw ModelShapeError("rollout: control has the wrong dimension");
    flat.insert(flat.end(), u.values().data(), u.values().data() + m);
  }
  RolloutWorkspace ws(params);
  RolloutBatch batch;
  rollout_batch(params, std::span<const double>(x0.values().data(), static_cast<std::size_t>(n)), true, flat, 1,
                horizon, dt, batch, ws);

  Trajectory traj;
  traj.dt = dt;
  traj.controls = controls;
  traj.states.reserve(static_cast<std::size_t>(horizon + 1));
  for (int k = 0; k <= horizon; ++k) {
    traj.states.emplace_back(Eigen::Map<const Vec>(batch.state(0, k), n));
  }
  return traj;
}

}  // namespace softctl::model
