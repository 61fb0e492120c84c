#include "softctl/safety/filter.hpp"

#include <cmath>
#include <limits>

namespace softctl::safety {

AdaptiveEstimate AdaptiveEstimate::zero(int dim, double gain, double theta_max) {
  if (gain < 0.0 || theta_max < 0.0) throw std::invalid_argument("adaptive estimate: gain and bound must be >= 0");
  AdaptiveEstimate e;
  e.theta = Vec::Zero(dim);
  e.gain = gain;
  e.theta_max = theta_max;
  return e;
}

AdaptiveEstimate update_adaptive(const AdaptiveEstimate& est, const Vec& grad, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("update_adaptive: dt must be positive");
  if (grad.size() != est.theta.size()) throw std::invalid_argument("update_adaptive: gradient dimension mismatch");
  AdaptiveEstimate out = est;
  out.theta = est.theta - est.gain * grad * dt;
  const double norm = out.theta.norm();
  if (norm > est.theta_max) out.theta *= est.theta_max / norm;
  if (est.history_length > 0) {
    out.history.push_back(out.theta);
    if (out.history.size() > est.history_length) out.history.erase(out.history.begin());
  }
  return out;
}

double admissibility_margin(const double* f, const double* x, const BarrierSpec& spec, const Vec& theta, double eps_bar,
                            double alpha) {
  double g[3];
  std::vector<double> big;
  double* gp = g;
  if (spec.position_indices.size() > 3) {
    big.resize(spec.position_indices.size());
    gp = big.data();
  }
  const double h = barrier_value_grad(spec, x, gp);
  double lie = 0.0, adapt = 0.0, gnorm2 = 0.0;
  for (std::size_t i = 0; i < spec.position_indices.size(); ++i) {
    const int s = spec.position_indices[i];
    lie += gp[i] * f[s];
    adapt += theta[s] * gp[i];
    gnorm2 += gp[i] * gp[i];
  }
  const double pi = lie - std::sqrt(gnorm2) * eps_bar;
  const double phi = adapt + alpha * h;
  return phi + pi;
}

double admissibility_margin(const Vec& f_candidate, const StateVector& x, const BarrierSpec& spec,
                            const AdaptiveEstimate& est, double eps_bar, double alpha) {
  if (eps_bar < 0.0) throw std::invalid_argument("admissibility_margin: eps_bar must be >= 0");
  if (f_candidate.size() != x.dim() || est.theta.size() != x.dim()) {
    throw std::invalid_argument("admissibility_margin: dimension mismatch");
  }
  for (int i : spec.position_indices) {
    if (i >= x.dim()) throw std::invalid_argument("admissibility_margin: barrier index out of range");
  }
  return admissibility_margin(f_candidate.data(), x.values().data(), spec, est.theta, eps_bar, alpha);
}

double candidate_margin(const planner::CandidateBatch& batch, std::size_t i, const std::vector<BarrierSpec>& barriers,
                        const AdaptiveEstimate& est, double eps_bar, double alpha) {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& b : barriers) {
    if (!b.filter) continue;
    for (int k = 1; k <= batch.horizon; ++k) {
      worst = std::min(worst, admissibility_margin(batch.derivative(i, k), batch.state(i, k), b, est.theta, eps_bar, alpha));
    }
  }
  return worst;
}

double candidate_distance(const planner::CandidateBatch& batch, std::size_t i, std::size_t j, Distance kind) {
  const int n = batch.state_dim;
  double d2 = 0.0;
  if (kind == Distance::FirstDerivative) {
    const double* a = batch.derivative(i, 0);
    const double* b = batch.derivative(j, 0);
    for (int s = 0; s < n; ++s) d2 += (a[s] - b[s]) * (a[s] - b[s]);
  } else {
    for (int k = 0; k <= batch.horizon; ++k) {
      const double* a = batch.state(i, k);
      const double* b = batch.state(j, k);
      for (int s = 0; s < n; ++s) d2 += (a[s] - b[s]) * (a[s] - b[s]);
    }
  }
  return std::sqrt(d2);
}

FilterDecision filter_select(const planner::CandidateBatch& batch, std::size_t optimal,
                             const std::vector<BarrierSpec>& barriers, const AdaptiveEstimate& est, double eps_bar,
                             const FilterConfig& config) {
  if (batch.size() == 0) throw planner::PlannerError("filter_select: empty candidate batch");
  if (optimal >= batch.size()) throw MappingError("filter_select: optimal index out of range");
  if (eps_bar < 0.0) throw std::invalid_argument("filter_select: eps_bar must be >= 0");
  if (est.theta.size() != batch.state_dim) throw std::invalid_argument("filter_select: estimate dimension mismatch");

  FilterDecision d;
  d.optimal = optimal;
  d.margins.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    d.margins[i] = candidate_margin(batch, i, barriers, est, eps_bar, config.alpha);
    if (d.margins[i] >= 0.0) ++d.admissible;
  }
  d.optimal_margin = d.margins[optimal];

  if (d.optimal_margin >= 0.0) {
    d.selected = optimal;
  } else if (d.admissible > 0) {
    d.intervened = true;
    std::size_t best = batch.size();
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < batch.size(); ++i) {
      if (d.margins[i] < 0.0) continue;
      const double dist = candidate_distance(batch, i, optimal, config.distance);
      if (best == batch.size() || dist < best_dist || (dist == best_dist && batch.costs[i] < batch.costs[best])) {
        best = i;
        best_dist = dist;
      }
    }
    d.selected = best;
  } else {
    d.intervened = true;
    d.fallback = true;
    std::size_t best = 0;
    for (std::size_t i = 1; i < batch.size(); ++i) {
      if (d.margins[i] > d.margins[best]) best = i;
    }
    d.selected = best;
  }
  d.margin = d.margins[d.selected];
  d.f_safe = batch.prediction(d.selected);
  d.u_safe = reciprocal_map(batch, d.selected);
  return d;
}

ReciprocalMap::ReciprocalMap(const planner::CandidateBatch& batch) : batch_(&batch) {}

void ReciprocalMap::check(std::size_t index) const {
  if (index >= batch_->size()) {
    throw MappingError("reciprocal map: index " + std::to_string(index) + " outside a batch of " +
                       std::to_string(batch_->size()));
  }
}

std::vector<ControlVector> ReciprocalMap::controls(std::size_t index) const {
  check(index);
  return batch_->control_sequence(index);
}

Trajectory ReciprocalMap::prediction(std::size_t index) const {
  check(index);
  return batch_->prediction(index);
}

std::size_t ReciprocalMap::index_of_controls(const std::vector<ControlVector>& u) const {
  const int m = batch_->control_dim;
  if (static_cast<int>(u.size()) == batch_->horizon) {
    for (std::size_t i = 0; i < batch_->size(); ++i) {
      const auto seq = batch_->control_data(i);
      bool same = true;
      for (int k = 0; k < batch_->horizon && same; ++k) {
        if (u[static_cast<std::size_t>(k)].dim() != m) throw MappingError("reciprocal map: control dimension mismatch");
        for (int j = 0; j < m && same; ++j) same = seq[static_cast<std::size_t>(k * m + j)] == u[static_cast<std::size_t>(k)][j];
      }
      if (same) return i;
    }
  }
  throw MappingError("reciprocal map: control sequence is not in the batch");
}

std::size_t ReciprocalMap::index_of_prediction(const Trajectory& f) const {
  const int n = batch_->state_dim;
  if (f.states.size() == static_cast<std::size_t>(batch_->horizon + 1)) {
    for (std::size_t i = 0; i < batch_->size(); ++i) {
      bool same = true;
      for (int k = 0; k <= batch_->horizon && same; ++k) {
        const auto& x = f.states[static_cast<std::size_t>(k)];
        if (x.dim() != n) throw MappingError("reciprocal map: state dimension mismatch");
        const double* s = batch_->state(i, k);
        for (int j = 0; j < n && same; ++j) same = s[j] == x[j];
      }
      if (same) return i;
    }
  }
  throw MappingError("reciprocal map: prediction is not in the batch");
}

std::vector<ControlVector> reciprocal_map(const planner::CandidateBatch& batch, std::size_t selected) {
  return ReciprocalMap(batch).controls(selected);
}

}  // namespace softctl::safety
