#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "softctl/core/integrators.hpp"
#include "softctl/model/calibration.hpp"
#include "softctl/model/checkpoint.hpp"
#include "softctl/model/network.hpp"
#include "softctl/model/rollout.hpp"
#include "softctl/model/training.hpp"
#include "softctl/plants/plants.hpp"

using namespace softctl;
using namespace softctl::model;

namespace {

Architecture small_arch(int n, int m, std::vector<int> hidden = {8, 8}) {
  Architecture a;
  a.state_dim = n;
  a.control_dim = m;
  a.hidden = std::move(hidden);
  return a;
}

Architecture linear_arch(int n, int m) {
  Architecture a = small_arch(n, m, {});
  a.activation = Activation::Identity;
  return a;
}

Vec random_vec(RngStream& rng, int n, double scale = 1.0) {
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = rng.uniform(-scale, scale);
  return v;
}

ModelParams random_model(const Architecture& arch, std::uint64_t seed) {
  RngStream rng(seed);
  ModelParams p = ModelParams::initialized(arch, rng);
  for (auto& l : p.layers) l.bias = random_vec(rng, static_cast<int>(l.bias.size()), 0.3);
  return p;
}

DerivativeField model_field(const ModelParams& p) {
  return [&p](const Vec& x, const Vec& u) { return predict_derivative(p, x, u); };
}

// Trajectories of the linear system dx/dt = A x + B u under piecewise-constant random inputs.
std::vector<Trajectory> linear_data(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, int count, int steps,
                                    double dt, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<Trajectory> out;
  for (int t = 0; t < count; ++t) {
    plants::LinearPlant plant{A, B, random_vec(rng, static_cast<int>(A.rows())),
                              ControlLimits::symmetric(static_cast<int>(B.cols()), 1.0), 0.0};
    Trajectory traj;
    traj.dt = dt;
    traj.states.push_back(plant.state());
    Vec u = random_vec(rng, static_cast<int>(B.cols()));
    for (int k = 0; k < steps; ++k) {
      if (k % 8 == 0) u = random_vec(rng, static_cast<int>(B.cols()));
      const ControlVector cu(u, plant.control_limits);
      plant = plants::linear_step(plant, cu, dt, rng);
      traj.controls.push_back(cu);
      traj.states.push_back(plant.state());
    }
    out.push_back(std::move(traj));
  }
  return out;
}

// Trajectories generated with one RK4 step of `field` per sample.
std::vector<Trajectory> field_data(const DerivativeField& field, int n, int m, int count, int steps, double dt,
                                   std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<Trajectory> out;
  for (int t = 0; t < count; ++t) {
    Trajectory traj;
    traj.dt = dt;
    traj.states.push_back(StateVector(random_vec(rng, n)));
    for (int k = 0; k < steps; ++k) {
      const ControlVector u(random_vec(rng, m));
      traj.states.push_back(rk4_step(field, traj.states.back(), u, dt));
      traj.controls.push_back(u);
    }
    out.push_back(std::move(traj));
  }
  return out;
}

}  // namespace

TEST_CASE("predict_derivative: zero weights give zero output") {
  const auto p = ModelParams::zeros(small_arch(3, 2));
  RngStream rng(1);
  for (int i = 0; i < 10; ++i) CHECK(predict_derivative(p, random_vec(rng, 3, 5.0), random_vec(rng, 2, 5.0)).isZero(0.0));
}

TEST_CASE("predict_derivative: single linear layer computes W [x; u]") {
  auto p = ModelParams::zeros(linear_arch(2, 1));
  RngStream rng(2);
  p.layers[0].weight = Eigen::MatrixXd::Random(2, 3);
  Vec x(2), u(1);
  x << 0.3, -1.2;
  u << 0.7;
  Vec in(3);
  in << x, u;
  const Vec expect = p.layers[0].weight * in;
  CHECK((predict_derivative(p, x, u) - expect).norm() < 1e-15);
}

TEST_CASE("predict_derivative: dimension mismatch raises ModelShapeError") {
  const auto p = ModelParams::zeros(small_arch(3, 2));
  CHECK_THROWS_AS(predict_derivative(p, Vec::Zero(2), Vec::Zero(2)), ModelShapeError);
  CHECK_THROWS_AS(predict_derivative(p, Vec::Zero(3), Vec::Zero(1)), ModelShapeError);
}

TEST_CASE("tanh activation matches std::tanh") {
  double worst = 0.0;
  for (double z = -30.0; z <= 30.0; z += 0.000731) worst = std::max(worst, std::abs(activate(Activation::Tanh, z) - std::tanh(z)));
  CHECK(worst < 1e-15);
  CHECK(activate(Activation::Tanh, 0.0) == 0.0);
  CHECK(std::signbit(activate(Activation::Tanh, -0.0)));
}

TEST_CASE("batched evaluation is bit-identical to single-sample evaluation") {
  const auto p = random_model(small_arch(4, 2, {16, 16}), 11);
  RngStream rng(3);
  const int batch = 37;
  std::vector<double> in(6 * batch), out(4 * batch);
  std::vector<Vec> xs, us;
  for (int b = 0; b < batch; ++b) {
    xs.push_back(random_vec(rng, 4));
    us.push_back(random_vec(rng, 2));
    for (int f = 0; f < 4; ++f) in[static_cast<std::size_t>(f * batch + b)] = xs.back()[f];
    for (int f = 0; f < 2; ++f) in[static_cast<std::size_t>((4 + f) * batch + b)] = us.back()[f];
  }
  BatchEvaluator eval(p);
  eval.evaluate(in.data(), batch, out.data());
  for (int b = 0; b < batch; ++b) {
    const Vec single = predict_derivative(p, xs[static_cast<std::size_t>(b)], us[static_cast<std::size_t>(b)]);
    for (int j = 0; j < 4; ++j) CHECK(out[static_cast<std::size_t>(j * batch + b)] == single[j]);
  }
}

TEST_CASE("rollout: zero-weight model keeps the initial state") {
  const auto p = ModelParams::zeros(small_arch(3, 1));
  const StateVector x0{0.5, -0.2, 1.0};
  const auto traj = rollout(p, x0, std::vector<ControlVector>(5, ControlVector(Vec::Ones(1))), 0.1);
  REQUIRE(traj.states.size() == 6);
  for (const auto& x : traj.states) CHECK(x == x0);
}

TEST_CASE("rollout: hand-set decay model follows the exponential") {
  auto p = ModelParams::zeros(linear_arch(2, 1));
  p.layers[0].weight.leftCols(2) = -Eigen::MatrixXd::Identity(2, 2);
  const StateVector x0{1.0, -2.0};
  const auto traj = rollout(p, x0, std::vector<ControlVector>(20, ControlVector(Vec::Zero(1))), 0.05);
  // RK4 applied to dx/dt = -x multiplies by the degree-4 Taylor polynomial of exp(-h) each step.
  const double h = 0.05;
  const double g = 1.0 - h + h * h / 2.0 - h * h * h / 6.0 + h * h * h * h / 24.0;
  for (int k = 0; k <= 20; ++k) {
    const double e = std::exp(-h * k);
    const double r = std::pow(g, k);
    CHECK(traj.states[static_cast<std::size_t>(k)][0] == doctest::Approx(r).epsilon(1e-13));
    CHECK(traj.states[static_cast<std::size_t>(k)][1] == doctest::Approx(-2.0 * r).epsilon(1e-13));
    CHECK(std::abs(traj.states[static_cast<std::size_t>(k)][0] - e) < 1e-7);
  }
}

TEST_CASE("rollout: one step equals rk4_step on the model field exactly") {
  const auto p = random_model(small_arch(4, 2, {16, 16}), 5);
  RngStream rng(4);
  for (int i = 0; i < 20; ++i) {
    const StateVector x0(random_vec(rng, 4));
    const ControlVector u(random_vec(rng, 2));
    const auto traj = rollout(p, x0, {u}, 0.05);
    CHECK(traj.states[1] == rk4_step(model_field(p), x0, u, 0.05));
  }
}

TEST_CASE("rollout: prefix consistency") {
  const auto p = random_model(small_arch(3, 2), 6);
  RngStream rng(5);
  std::vector<ControlVector> us;
  for (int k = 0; k < 12; ++k) us.emplace_back(random_vec(rng, 2));
  const StateVector x0(random_vec(rng, 3));
  const auto full = rollout(p, x0, us, 0.05);
  for (int k = 1; k < 12; ++k) {
    const auto part = rollout(p, x0, std::vector<ControlVector>(us.begin(), us.begin() + k), 0.05);
    for (int i = 0; i <= k; ++i) CHECK(part.states[static_cast<std::size_t>(i)] == full.states[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("rollout: non-finite model output raises IntegrationError") {
  auto p = ModelParams::zeros(linear_arch(1, 1));
  p.layers[0].weight(0, 0) = 1e300;
  CHECK_THROWS_AS(rollout(p, StateVector{1e10}, std::vector<ControlVector>(3, ControlVector(Vec::Zero(1))), 0.1),
                  IntegrationError);
}

TEST_CASE("training gradient matches central differences at 20 coordinates") {
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 0.0, 1.0, -2.0, -0.5;
  B << 0.0, 1.0;
  const auto data = linear_data(A, B, 3, 30, 0.05, 9);
  for (int horizon : {1, 10}) {
    CAPTURE(horizon);
    const auto windows = make_windows(data, horizon, 4);
    const Vec w = loss_weights(data, LossWeighting::Increment);
    auto arch = small_arch(2, 1, {6, 5});
    ModelParams p = random_model(arch, 21);
    p.input_scale = Vec::Constant(3, 0.8);
    p.input_shift = Vec::Constant(3, 0.1);
    p.output_scale = Vec::Constant(2, 1.7);
    std::vector<double> grad;
    trajectory_loss(p, windows, w, &grad);
    const auto theta = p.flatten();
    REQUIRE(grad.size() == theta.size());
    RngStream rng(77);
    for (int probe = 0; probe < 20; ++probe) {
      const auto i = static_cast<std::size_t>(rng.next_u64() % theta.size());
      const double h = 1e-6 * std::max(1.0, std::abs(theta[i]));
      auto plus = theta, minus = theta;
      plus[i] += h;
      minus[i] -= h;
      ModelParams pp = p, pm = p;
      pp.unflatten(plus);
      pm.unflatten(minus);
      const double fd = (trajectory_loss(pp, windows, w, nullptr) - trajectory_loss(pm, windows, w, nullptr)) / (2 * h);
      const double rel = std::abs(fd - grad[i]) / std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
      CAPTURE(i);
      CHECK(rel <= 1e-4);
    }
  }
}

TEST_CASE("frozen inputs receive no gradient and stay zero") {
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 0.0, 1.0, -2.0, -0.5;
  B << 0.0, 1.0;
  Dataset ds;
  ds.train = linear_data(A, B, 3, 30, 0.05, 9);
  auto arch = small_arch(2, 1, {6});
  arch.frozen_inputs = {0};
  TrainConfig cfg;
  cfg.epochs = 5;
  const auto p = train(ds, arch, cfg);
  CHECK(p.layers[0].weight.col(0).isZero(0.0));
}

TEST_CASE("training recovers a known linear system") {
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 0.0, 1.0, -2.0, -0.5;
  B << 0.0, 1.0;
  Dataset ds;
  ds.train = linear_data(A, B, 12, 80, 0.05, 1);
  ds.validation = linear_data(A, B, 3, 80, 0.05, 2);
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.learning_rate = 2e-2;
  cfg.batch_size = 32;
  TrainReport report;
  const auto p = train(ds, linear_arch(2, 1), cfg, &report);

  Eigen::MatrixXd AB(2, 3);
  AB << A, B;
  Eigen::MatrixXd learned(2, 3);
  const Vec f0 = predict_derivative(p, Vec::Zero(2), Vec::Zero(1));
  for (int c = 0; c < 3; ++c) {
    Vec in = Vec::Zero(3);
    in[c] = 1.0;
    learned.col(c) = predict_derivative(p, Vec(in.head(2)), Vec(in.tail(1))) - f0;
  }
  CAPTURE(learned);
  CHECK((learned - AB).norm() < 0.05);
  CHECK(f0.norm() < 0.05);
  REQUIRE(report.epoch_loss.size() == 300);
  for (std::size_t e = 1; e < report.epoch_loss.size(); ++e) CHECK(report.epoch_loss[e] <= report.epoch_loss[e - 1]);
  CHECK(report.epoch_loss.back() < 1e-3 * report.initial_loss);
}

TEST_CASE("training on constant states yields a near-zero field") {
  Dataset ds;
  RngStream rng(4);
  for (int t = 0; t < 4; ++t) {
    Trajectory traj;
    traj.dt = 0.05;
    const StateVector x(random_vec(rng, 3));
    traj.states.push_back(x);
    for (int k = 0; k < 30; ++k) {
      traj.controls.emplace_back(random_vec(rng, 1));
      traj.states.push_back(x);
    }
    ds.train.push_back(traj);
  }
  TrainConfig cfg;
  cfg.epochs = 50;
  const auto p = train(ds, small_arch(3, 1), cfg);
  for (const auto& t : ds.train) {
    for (std::size_t k = 0; k < t.steps(); ++k) CHECK(predict_derivative(p, t.states[k], t.controls[k]).norm() <= 1e-3);
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 0.0, 1.0, -2.0, -0.5;
  B << 0.0, 1.0;
  Dataset ds;
  ds.train = linear_data(A, B, 4, 40, 0.05, 1);
  TrainConfig cfg;
  cfg.epochs = 10;
  cfg.seed = 99;
  const auto a = train(ds, small_arch(2, 1), cfg);
  const auto b = train(ds, small_arch(2, 1), cfg);
  CHECK(a.flatten() == b.flatten());
  cfg.seed = 100;
  CHECK(train(ds, small_arch(2, 1), cfg).flatten() != a.flatten());
}

TEST_CASE("training reports divergence with the epoch index") {
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 0.0, 1.0, -2.0, -0.5;
  B << 0.0, 1.0;
  Dataset ds;
  ds.train = linear_data(A, B, 2, 20, 0.05, 1);
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.learning_rate = 1e200;
  cfg.normalize = false;
  try {
    train(ds, linear_arch(2, 1), cfg);
    FAIL("expected TrainingDivergedError");
  } catch (const TrainingDivergedError& e) {
    CHECK(e.epoch() == 0);
  }
}

TEST_CASE("training rejects an empty train split") {
  CHECK_THROWS_AS(train(Dataset{}, small_arch(2, 1), TrainConfig{}), std::invalid_argument);
}

TEST_CASE("calibration: a model identical to the plant has zero error bound") {
  const auto p = random_model(small_arch(3, 2), 17);
  const auto val = field_data(model_field(p), 3, 2, 3, 25, 0.05, 8);
  const auto eb = calibrate_error_bound(p, val, 0.05);
  CHECK(eb.raw_max == 0.0);
  CHECK(eb.epsilon_bar == 0.0);
  CHECK(eb.samples == 75);
}

TEST_CASE("calibration: constant bias on a constant field is recovered exactly") {
  auto p = ModelParams::zeros(linear_arch(3, 1));
  p.layers[0].bias << 0.5, -0.2, 0.1;
  Vec b(3);
  b << 0.3, -0.4, 1.2;
  const DerivativeField truth = [&](const Vec&, const Vec&) { return Vec(p.layers[0].bias + b); };
  const auto val = field_data(truth, 3, 1, 2, 20, 0.05, 3);
  const auto eb = calibrate_error_bound(p, val, 0.05);
  CHECK(eb.raw_max == doctest::Approx(b.norm()).epsilon(1e-9));
  CHECK(eb.epsilon_bar == 1.25 * eb.raw_max);
}

TEST_CASE("calibration: the bound dominates every validation residual") {
  const auto p = random_model(small_arch(2, 1), 3);
  Eigen::MatrixXd A(2, 2), B(2, 1);
  A << 0.0, 1.0, -2.0, -0.5;
  B << 0.0, 1.0;
  const auto val = linear_data(A, B, 4, 50, 0.05, 12);
  const auto eb = calibrate_error_bound(p, val, 0.05);
  const auto res = one_step_residuals(p, val, 0.05);
  REQUIRE(res.size() == 200);
  for (double r : res) CHECK(r <= eb.epsilon_bar);
  CHECK(eb.covers(val[0].states[3].values(), val[0].controls[3].values()));
  CHECK_FALSE(eb.covers(Vec::Constant(2, 100.0), Vec::Zero(1)));
  CHECK_THROWS_AS(calibrate_error_bound(p, {}, 0.05), std::invalid_argument);
}

TEST_CASE("checkpoint round trip is exact and rejects mismatched dimensions") {
  auto arch = small_arch(3, 2);
  arch.frozen_inputs = {0, 1};
  Checkpoint c;
  c.params = random_model(arch, 31);
  c.params.input_shift = Vec::Constant(5, 0.1234567890123);
  c.params.input_scale = Vec::Constant(5, 1.0 / 3.0);
  c.params.output_scale = Vec::Constant(3, std::sqrt(2.0));
  c.dt = 0.05;
  const auto val = field_data(model_field(c.params), 3, 2, 2, 10, 0.05, 1);
  c.bound = calibrate_error_bound(c.params, val, 0.05);
  c.bound.epsilon_bar = 0.1 + 1e-17;

  const auto path = (std::filesystem::temp_directory_path() / "softctl_ckpt_test.json").string();
  save_checkpoint(path, c);
  const auto back = load_checkpoint(path, 3, 2);
  CHECK(back.params.arch == c.params.arch);
  CHECK(back.params.flatten() == c.params.flatten());
  CHECK(back.params.input_shift == c.params.input_shift);
  CHECK(back.params.input_scale == c.params.input_scale);
  CHECK(back.params.output_scale == c.params.output_scale);
  CHECK(back.dt == c.dt);
  CHECK(back.bound.epsilon_bar == c.bound.epsilon_bar);
  CHECK(back.bound.state_hi == c.bound.state_hi);
  CHECK(encode_checkpoint(back) == encode_checkpoint(c));
  CHECK_THROWS_AS(load_checkpoint(path, 4, 2), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(path, 3, 1), CheckpointError);
  CHECK_THROWS_AS(load_checkpoint(path + ".missing"), CheckpointError);
  CHECK_THROWS_AS(decode_checkpoint("{\"format\": 1}"), CheckpointError);
  std::filesystem::remove(path);
}
