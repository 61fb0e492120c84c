#pragma once

#include <functional>
#include <span>
#include <vector>

#include "softctl/core/types.hpp"

namespace softctl {

/// Derivative field dx/dt = f(x, u).
using DerivativeField = std::function<Vec(const Vec& x, const Vec& u)>;

/// Classical fourth-order Runge-Kutta step with constant dt.
///
/// Stage order and arithmetic are fixed: x + (dt/2) k1, x + (dt/2) k2, x + dt k3,
/// then x + (dt/6) (((k1 + 2 k2) + 2 k3) + k4). The batched model rollout
/// reproduces exactly this expression order.
StateVector rk4_step(const DerivativeField& field, const StateVector& x, const ControlVector& u, double dt);

/// value + rate * derivative * dt.
std::vector<double> euler_step(std::span<const double> value, std::span<const double> derivative, double rate,
                               double dt);
Vec euler_step(const Vec& value, const Vec& derivative, double rate, double dt);

}  // namespace softctl
