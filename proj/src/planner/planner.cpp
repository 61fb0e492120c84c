#include "softctl/planner/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace softctl::planner {

void SamplerConfig::validate(int control_dim) const {
  if (n < 2) throw std::invalid_argument("sampler: n must be >= 2");
  if (horizon < 1) throw std::invalid_argument("sampler: horizon must be >= 1");
  if (!(temperature > 0.0)) throw std::invalid_argument("sampler: temperature must be positive");
  if (stddev.size() != control_dim) throw std::invalid_argument("sampler: stddev needs one entry per control");
  if ((stddev.array() < 0.0).any()) throw std::invalid_argument("sampler: stddev must be non-negative");
  if (correlation < 0.0 || correlation >= 1.0) throw std::invalid_argument("sampler: correlation must be in [0, 1)");
}

void TaskSpec::validate(int state_dim, int control_dim) const {
  const auto bad = [](const std::string& why) { throw std::invalid_argument("task: " + why); };
  const auto k = static_cast<Eigen::Index>(tracked.size());
  for (int i : tracked) {
    if (i < 0 || i >= state_dim) bad("tracked index out of range");
  }
  if (tracking_weight.size() != k) bad("tracking_weight needs one entry per tracked index");
  if (terminal_weight.size() != 0 && terminal_weight.size() != k) bad("terminal_weight needs one entry per tracked index");
  if (k > 0 && reference.empty()) bad("reference is empty");
  for (const auto& r : reference) {
    if (r.size() != k) bad("reference entries must match the tracked indices");
  }
  if (input_center.size() != 0 && input_center.size() != control_dim) bad("input_center has the wrong size");
  if (previous_input && previous_input->size() != control_dim) bad("previous_input has the wrong size");
  bool positive = input_weight > 0.0 || rate_weight > 0.0;
  if (input_weight < 0.0 || rate_weight < 0.0) bad("weights must be non-negative");
  if ((tracking_weight.array() < 0.0).any() || (terminal_weight.array() < 0.0).any()) bad("weights must be non-negative");
  positive = positive || (tracking_weight.array() > 0.0).any() || (terminal_weight.array() > 0.0).any();
  for (const auto& p : penalties) {
    if (p.weight < 0.0) bad("penalty weights must be non-negative");
    positive = positive || p.weight > 0.0;
    for (int i : p.barrier.position_indices) {
      if (i >= state_dim) bad("penalty barrier index out of range");
    }
  }
  if (!positive) bad("at least one weight must be positive");
}

const Vec& TaskSpec::reference_at(int k) const {
  return reference[std::min(static_cast<std::size_t>(k), reference.size() - 1)];
}

// ------------------------------------------------------------- batch ----

void CandidateBatch::resize(int count, int h, int n_state, int m) {
  n = count;
  horizon = h;
  state_dim = n_state;
  control_dim = m;
  controls.assign(static_cast<std::size_t>(count) * static_cast<std::size_t>(h) * static_cast<std::size_t>(m), 0.0);
  costs.assign(static_cast<std::size_t>(count), 0.0);
  weights.assign(static_cast<std::size_t>(count), 0.0);
}

std::span<const double> CandidateBatch::control_data(std::size_t i) const {
  const std::size_t len = static_cast<std::size_t>(horizon) * static_cast<std::size_t>(control_dim);
  return std::span<const double>(controls).subspan(i * len, len);
}

std::span<double> CandidateBatch::control_data(std::size_t i) {
  const std::size_t len = static_cast<std::size_t>(horizon) * static_cast<std::size_t>(control_dim);
  return std::span<double>(controls).subspan(i * len, len);
}

ControlVector CandidateBatch::control(std::size_t i, int k) const {
  const auto seq = control_data(i);
  const Eigen::Map<const Vec> u(seq.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(control_dim),
                                control_dim);
  return limits.dim() == control_dim ? ControlVector(u, limits) : ControlVector(Vec(u));
}

std::vector<ControlVector> CandidateBatch::control_sequence(std::size_t i) const {
  std::vector<ControlVector> out;
  out.reserve(static_cast<std::size_t>(horizon));
  for (int k = 0; k < horizon; ++k) out.push_back(control(i, k));
  return out;
}

Trajectory CandidateBatch::prediction(std::size_t i) const {
  Trajectory t;
  t.dt = dt;
  t.controls = control_sequence(i);
  for (int k = 0; k <= horizon; ++k) t.states.emplace_back(Eigen::Map<const Vec>(state(i, k), state_dim));
  return t;
}

// ----------------------------------------------------------- sampling ----

namespace {

double snap(double v, const std::vector<double>& levels) {
  if (levels.empty()) return v;
  double best = levels.front();
  for (double l : levels) {
    if (std::abs(l - v) < std::abs(best - v)) best = l;
  }
  return best;
}

}  // namespace

void sample_controls_into(const SamplerConfig& config, std::span<const double> nominal, const ControlLimits& limits,
                          const RngStream& base, std::size_t first, std::size_t last, std::span<double> out) {
  const int H = config.horizon;
  const int m = static_cast<int>(config.stddev.size());
  const std::size_t len = static_cast<std::size_t>(H) * static_cast<std::size_t>(m);
  const double rho = config.correlation;
  const double innov = std::sqrt(1.0 - rho * rho);
  std::vector<double> e(static_cast<std::size_t>(m));
  for (std::size_t i = first; i < last; ++i) {
    double* dst = out.data() + i * len;
    if (i == 0) {
      std::copy(nominal.begin(), nominal.end(), dst);
      continue;
    }
    RngStream rng = base.child(i);
    for (int k = 0; k < H; ++k) {
      for (int j = 0; j < m; ++j) {
        const double z = rng.normal();
        auto& ej = e[static_cast<std::size_t>(j)];
        ej = k == 0 ? z : rho * ej + innov * z;
        const std::size_t at = static_cast<std::size_t>(k) * static_cast<std::size_t>(m) + static_cast<std::size_t>(j);
        const double v = nominal[at] + config.stddev[j] * ej;
        dst[at] = snap(std::clamp(v, limits.lo[j], limits.hi[j]), config.levels);
      }
    }
  }
}

std::vector<std::vector<ControlVector>> sample_controls(const SamplerConfig& config,
                                                        const std::vector<ControlVector>& nominal,
                                                        const ControlLimits& limits, RngStream& rng) {
  const int m = limits.dim();
  config.validate(m);
  if (static_cast<int>(nominal.size()) != config.horizon) throw PlannerError("sample_controls: nominal length != horizon");
  std::vector<double> flat;
  for (const auto& u : nominal) {
    if (u.dim() != m) throw PlannerError("sample_controls: nominal has the wrong control dimension");
    if (!limits.contains(u.values())) throw PlannerError("sample_controls: nominal outside the control limits");
    flat.insert(flat.end(), u.values().data(), u.values().data() + m);
  }
  const RngStream base(rng.next_u64());
  std::vector<double> out(static_cast<std::size_t>(config.n) * flat.size());
  sample_controls_into(config, flat, limits, base, 0, static_cast<std::size_t>(config.n), out);
  std::vector<std::vector<ControlVector>> seqs(static_cast<std::size_t>(config.n));
  for (std::size_t i = 0; i < seqs.size(); ++i) {
    for (int k = 0; k < config.horizon; ++k) {
      const Eigen::Map<const Vec> u(out.data() + (i * static_cast<std::size_t>(config.horizon) + static_cast<std::size_t>(k)) *
                                                     static_cast<std::size_t>(m),
                                    m);
      seqs[i].emplace_back(u, limits);
    }
  }
  return seqs;
}

// --------------------------------------------------------------- cost ----

double evaluate_cost(const double* states, const double* controls, int horizon, int n, int m, const TaskSpec& task) {
  const std::size_t nt = task.tracked.size();
  double total = 0.0;
  for (int k = 1; k <= horizon; ++k) {
    const double* x = states + static_cast<std::size_t>(k) * static_cast<std::size_t>(n);
    const double* u = controls + static_cast<std::size_t>(k - 1) * static_cast<std::size_t>(m);
    if (nt > 0) {
      const Vec& r = task.reference_at(k);
      double track = 0.0, term = 0.0;
      for (std::size_t j = 0; j < nt; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        const double e = x[task.tracked[j]] - r[jj];
        track += task.tracking_weight[jj] * e * e;
        if (k == horizon && task.terminal_weight.size() > 0) term += task.terminal_weight[jj] * e * e;
      }
      total += track + term;
    }
    if (task.input_weight > 0.0) {
      double s = 0.0;
      for (int j = 0; j < m; ++j) {
        const double d = u[j] - (task.input_center.size() > 0 ? task.input_center[j] : 0.0);
        s += d * d;
      }
      total += task.input_weight * s;
    }
    if (task.rate_weight > 0.0) {
      const double* prev = k >= 2 ? u - m : (task.previous_input ? task.previous_input->data() : nullptr);
      if (prev) {
        double s = 0.0;
        for (int j = 0; j < m; ++j) s += (u[j] - prev[j]) * (u[j] - prev[j]);
        total += task.rate_weight * s;
      }
    }
    for (const auto& p : task.penalties) {
      const double gap = p.margin - safety::barrier_value(p.barrier, x);
      if (gap > 0.0) total += p.weight * gap * gap;
    }
  }
  return total;
}

double evaluate_cost(const Trajectory& prediction, const std::vector<ControlVector>& controls, const TaskSpec& task) {
  const int H = static_cast<int>(controls.size());
  if (H < 1 || prediction.states.size() != static_cast<std::size_t>(H + 1)) {
    throw PlannerError("evaluate_cost: prediction must hold H + 1 states for H controls");
  }
  const int n = prediction.states.front().dim();
  const int m = controls.front().dim();
  std::vector<double> xs, us;
  for (const auto& x : prediction.states) xs.insert(xs.end(), x.values().data(), x.values().data() + n);
  for (const auto& u : controls) us.insert(us.end(), u.values().data(), u.values().data() + m);
  return evaluate_cost(xs.data(), us.data(), H, n, m, task);
}

std::vector<double> exponential_weights(std::span<const double> costs, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("exponential_weights: beta must be positive");
  double lo = std::numeric_limits<double>::infinity();
  for (double c : costs) {
    if (std::isfinite(c)) lo = std::min(lo, c);
  }
  std::vector<double> w(costs.size(), 0.0);
  if (!std::isfinite(lo)) return w;
  double sum = 0.0;
  for (std::size_t i = 0; i < costs.size(); ++i) {
    if (!std::isfinite(costs[i])) continue;
    // Floor at the smallest normal double so every finite candidate keeps a positive weight.
    w[i] = std::max(std::exp(-(costs[i] - lo) / beta), std::numeric_limits<double>::min());
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

std::size_t select_optimal(std::span<const double> costs) {
  if (costs.empty()) throw PlannerError("select_optimal: empty candidate batch");
  std::size_t best = costs.size();
  for (std::size_t i = 0; i < costs.size(); ++i) {
    if (!std::isfinite(costs[i])) continue;
    if (best == costs.size() || costs[i] < costs[best]) best = i;
  }
  if (best == costs.size()) throw PlannerError("select_optimal: every candidate has a non-finite cost");
  return best;
}

std::size_t select_optimal(const CandidateBatch& batch) { return select_optimal(batch.costs); }

// ----------------------------------------------------------- planning ----

std::vector<double> make_nominal(const SamplerConfig& config, const std::vector<double>* previous, int m,
                                 const ControlLimits& limits) {
  const std::size_t len = static_cast<std::size_t>(config.horizon) * static_cast<std::size_t>(m);
  std::vector<double> out(len);
  if (config.nominal == NominalPolicy::ShiftPrevious && previous && previous->size() == len) {
    std::copy(previous->begin() + m, previous->end(), out.begin());
    std::copy(previous->end() - m, previous->end(), out.end() - m);
    return out;
  }
  for (int k = 0; k < config.horizon; ++k) {
    for (int j = 0; j < m; ++j) {
      out[static_cast<std::size_t>(k * m + j)] = snap(std::clamp(0.0, limits.lo[j], limits.hi[j]), config.levels);
    }
  }
  return out;
}

Planner::Planner(const model::ModelParams& params, double dt, std::size_t workers)
    : params_(&params), dt_(dt), pool_(workers) {
  if (!(dt > 0.0)) throw std::invalid_argument("planner: dt must be positive");
  for (std::size_t w = 0; w < pool_.size(); ++w) spaces_.push_back(std::make_unique<model::RolloutWorkspace>(params));
  chunks_.resize(pool_.size());
}

const PlanResult& Planner::plan(const StateVector& x_now, const TaskSpec& task, const SamplerConfig& config,
                                const ControlLimits& limits, const std::vector<double>* previous, RngStream& rng) {
  const int n_state = params_->arch.state_dim;
  const int m = params_->arch.control_dim;
  if (x_now.dim() != n_state) throw model::ModelShapeError("plan: state dimension does not match the model");
  if (limits.dim() != m) throw PlannerError("plan: control limits do not match the model");
  config.validate(m);
  task.validate(n_state, m);

  PlanResult& r = result_;
  r.nominal = make_nominal(config, previous, m, limits);
  CandidateBatch& b = r.batch;
  b.resize(config.n, config.horizon, n_state, m);
  b.dt = dt_;
  b.limits = limits;
  b.rollouts.resize(config.n, config.horizon, n_state);

  const RngStream base(rng.next_u64());
  const std::size_t len = static_cast<std::size_t>(config.horizon) * static_cast<std::size_t>(m);
  const std::size_t rows = static_cast<std::size_t>(config.horizon + 1) * static_cast<std::size_t>(n_state);
  pool_.parallel_for(b.size(), [&](std::size_t chunk, std::size_t first, std::size_t last) {
    sample_controls_into(config, r.nominal, limits, base, first, last, b.controls);
    auto& out = chunks_[chunk];
    const std::span<const double> ctrl = std::span<const double>(b.controls).subspan(first * len, (last - first) * len);
    model::rollout_batch(*params_, std::span<const double>(x_now.values().data(), static_cast<std::size_t>(n_state)), true,
                         ctrl, static_cast<int>(last - first), config.horizon, dt_, out, *spaces_[chunk]);
    std::copy(out.states.begin(), out.states.end(), b.rollouts.states.begin() + static_cast<std::ptrdiff_t>(first * rows));
    std::copy(out.derivatives.begin(), out.derivatives.end(),
              b.rollouts.derivatives.begin() + static_cast<std::ptrdiff_t>(first * rows));
    for (std::size_t i = first; i < last; ++i) {
      b.costs[i] = evaluate_cost(b.state(i, 0), b.controls.data() + i * len, config.horizon, n_state, m, task);
    }
  });

  r.optimal = select_optimal(b.costs);
  b.weights = exponential_weights(b.costs, config.temperature);
  r.weighted_mean.assign(len, 0.0);
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double w = b.weights[i];
    const double* u = b.controls.data() + i * len;
    for (std::size_t a = 0; a < len; ++a) r.weighted_mean[a] += w * u[a];
  }
  return r;
}

PlanResult plan_step(const model::ModelParams& params, double dt, const StateVector& x_now, const TaskSpec& task,
                     const SamplerConfig& config, const ControlLimits& limits,
                     const std::vector<ControlVector>* previous, RngStream& rng) {
  std::vector<double> prev;
  if (previous) {
    for (const auto& u : *previous) prev.insert(prev.end(), u.values().data(), u.values().data() + u.dim());
  }
  Planner planner(params, dt, 1);
  return planner.plan(x_now, task, config, limits, previous ? &prev : nullptr, rng);
}

}  // namespace softctl::planner
