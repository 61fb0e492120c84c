#include "softctl/core/integrators.hpp"

#include <stdexcept>

namespace softctl {

namespace {

Vec checked_stage(const DerivativeField& field, const Vec& x, const Vec& u, int stage) {
  Vec k = field(x, u);
  if (k.size() != x.size()) throw IntegrationError(stage, "derivative has wrong dimension");
  if (!k.allFinite()) throw IntegrationError(stage, "non-finite derivative");
  return k;
}

}  // namespace

StateVector rk4_step(const DerivativeField& field, const StateVector& x, const ControlVector& u, double dt) {
  if (!(dt > 0.0)) throw std::invalid_argument("rk4_step: dt must be positive");
  const Vec& x0 = x.values();
  const Vec& uv = u.values();
  const double half = 0.5 * dt;

  const Vec k1 = checked_stage(field, x0, uv, 1);
  const Vec k2 = checked_stage(field, x0 + half * k1, uv, 2);
  const Vec k3 = checked_stage(field, x0 + half * k2, uv, 3);
  const Vec k4 = checked_stage(field, x0 + dt * k3, uv, 4);

  Vec next(x0.size());
  const double sixth = dt / 6.0;
  for (Eigen::Index j = 0; j < x0.size(); ++j) {
    next[j] = x0[j] + sixth * (((k1[j] + 2.0 * k2[j]) + 2.0 * k3[j]) + k4[j]);
  }
  if (!next.allFinite()) throw IntegrationError(4, "non-finite state after update");
  return StateVector(std::move(next));
}

std::vector<double> euler_step(std::span<const double> value, std::span<const double> derivative, double rate,
                               double dt) {
  if (value.size() != derivative.size()) throw std::invalid_argument("euler_step: dimension mismatch");
  if (!(dt > 0.0)) throw std::invalid_argument("euler_step: dt must be positive");
  std::vector<double> out(value.size());
  for (std::size_t i = 0; i < value.size(); ++i) out[i] = value[i] + rate * derivative[i] * dt;
  return out;
}

Vec euler_step(const Vec& value, const Vec& derivative, double rate, double dt) {
  const auto out = euler_step(std::span<const double>(value.data(), static_cast<std::size_t>(value.size())),
                              std::span<const double>(derivative.data(), static_cast<std::size_t>(derivative.size())),
                              rate, dt);
  return Eigen::Map<const Vec>(out.data(), static_cast<Eigen::Index>(out.size()));
}

}  // namespace softctl
