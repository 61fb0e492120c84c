#include "softctl/model/training.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>

#include "fast_math.hpp"

namespace softctl::model {

TrainingDivergedError::TrainingDivergedError(int epoch, const std::string& detail)
    : std::runtime_error("training diverged at epoch " + std::to_string(epoch) + ": " + detail), epoch_(epoch) {}

namespace {

void check_trajectories(const std::vector<Trajectory>& trajs, int n, int m, double& dt) {
  for (const auto& t : trajs) {
    t.validate();
    for (const auto& x : t.states) {
      if (x.dim() != n) throw std::invalid_argument("dataset: state dimension does not match the plant");
    }
    for (const auto& u : t.controls) {
      if (u.dim() != m) throw std::invalid_argument("dataset: control dimension does not match the plant");
    }
    if (dt == 0.0) dt = t.dt;
    if (t.dt != dt) throw std::invalid_argument("dataset: trajectories use different dt");
  }
}

}  // namespace

void Dataset::validate(int state_dim, int control_dim) const {
  double dt = 0.0;
  check_trajectories(train, state_dim, control_dim, dt);
  check_trajectories(validation, state_dim, control_dim, dt);
}

std::size_t WindowSet::count() const {
  return state_dim == 0 ? 0 : initial.size() / static_cast<std::size_t>(state_dim);
}

WindowSet make_windows(const std::vector<Trajectory>& trajectories, int horizon, int stride) {
  if (horizon < 1 || stride < 1) throw std::invalid_argument("make_windows: horizon and stride must be >= 1");
  WindowSet w;
  int shortest = std::numeric_limits<int>::max();
  for (const auto& t : trajectories) {
    if (t.steps() > 0) shortest = std::min(shortest, static_cast<int>(t.steps()));
  }
  if (shortest == std::numeric_limits<int>::max()) return w;
  w.horizon = std::min(horizon, shortest);
  for (const auto& t : trajectories) {
    if (t.steps() == 0) continue;
    const int n = t.states.front().dim();
    const int m = t.controls.front().dim();
    w.state_dim = n;
    w.control_dim = m;
    w.dt = t.dt;
    const int k_max = static_cast<int>(t.steps()) - w.horizon;
    for (int s = 0; s <= k_max; s += stride) {
      const auto& x0 = t.states[static_cast<std::size_t>(s)].values();
      w.initial.insert(w.initial.end(), x0.data(), x0.data() + n);
      for (int k = 0; k < w.horizon; ++k) {
        const auto& u = t.controls[static_cast<std::size_t>(s + k)].values();
        w.controls.insert(w.controls.end(), u.data(), u.data() + m);
      }
      for (int k = 1; k <= w.horizon; ++k) {
        const auto& y = t.states[static_cast<std::size_t>(s + k)].values();
        w.targets.insert(w.targets.end(), y.data(), y.data() + n);
      }
    }
  }
  return w;
}

Vec loss_weights(const std::vector<Trajectory>& trajectories, LossWeighting weighting) {
  int n = 0;
  for (const auto& t : trajectories) {
    if (!t.states.empty()) n = t.states.front().dim();
  }
  if (n == 0) throw std::invalid_argument("loss_weights: no states");
  if (weighting == LossWeighting::Uniform) return Vec::Ones(n);
  Vec sum = Vec::Zero(n);
  double count = 0.0;
  for (const auto& t : trajectories) {
    for (std::size_t k = 0; k + 1 < t.states.size(); ++k) {
      sum += (t.states[k + 1].values() - t.states[k].values()).cwiseAbs2();
      count += 1.0;
    }
  }
  if (count == 0.0 || sum.maxCoeff() <= 0.0) return Vec::Ones(n);
  const Vec mean = sum / count;
  const double floor = 1e-6 * mean.maxCoeff();
  Vec w(n);
  for (int j = 0; j < n; ++j) w[j] = 1.0 / std::max(mean[j], floor);
  // Scale so the average weight is 1; keeps learning rates comparable across plants.
  return w * (static_cast<double>(n) / w.sum());
}

namespace {

using Mat = Eigen::MatrixXd;

// Activations of one network evaluation over a block of samples (columns).
struct NetCache {
  std::vector<Mat> a;  // a[0] normalized input, a[l] output of hidden layer l
};

void tanh_inplace(Mat& m) {
  double* p = m.data();
  const Eigen::Index size = m.size();
  for (Eigen::Index i = 0; i < size; ++i) p[i] = detail::tanh_fast(p[i]);
}

// out (n x B) = f([state; control]).
void net_forward(const ModelParams& p, const Mat& state, const Mat& control, NetCache& cache, Mat& out) {
  const int n = p.arch.state_dim;
  const int m = p.arch.control_dim;
  const Eigen::Index cols = state.cols();
  const std::size_t n_layers = p.layers.size();
  cache.a.resize(n_layers);
  Mat& in = cache.a[0];
  in.resize(n + m, cols);
  in.topRows(n) = state;
  if (m > 0) in.bottomRows(m) = control;
  in = ((in.colwise() - p.input_shift).array().colwise() * p.input_scale.array()).matrix();
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& layer = p.layers[l];
    if (l + 1 == n_layers) {
      out.noalias() = layer.weight * cache.a[l];
      out.colwise() += layer.bias;
      out = (out.array().colwise() * p.output_scale.array()).matrix();
    } else {
      Mat& next = cache.a[l + 1];
      next.noalias() = layer.weight * cache.a[l];
      next.colwise() += layer.bias;
      if (p.arch.activation == Activation::Tanh) tanh_inplace(next);
    }
  }
}

struct Grads {
  std::vector<Mat> w;
  std::vector<Vec> b;

  explicit Grads(const ModelParams& p) {
    for (const auto& l : p.layers) {
      w.push_back(Mat::Zero(l.weight.rows(), l.weight.cols()));
      b.push_back(Vec::Zero(l.bias.size()));
    }
  }
};

// Accumulates parameter gradients for upstream gradient g_out (n x B) and
// returns the gradient with respect to the state part of the input.
void net_backward(const ModelParams& p, const NetCache& cache, const Mat& g_out, Grads& grads, Mat& g_state) {
  const int n = p.arch.state_dim;
  const std::size_t n_layers = p.layers.size();
  Mat g = (g_out.array().colwise() * p.output_scale.array()).matrix();
  for (std::size_t l = n_layers; l-- > 0;) {
    if (l + 1 != n_layers && p.arch.activation == Activation::Tanh) {
      g = (g.array() * (1.0 - cache.a[l + 1].array().square())).matrix();
    }
    grads.w[l].noalias() += g * cache.a[l].transpose();
    grads.b[l] += g.rowwise().sum();
    Mat g_prev;
    g_prev.noalias() = p.layers[l].weight.transpose() * g;
    g.swap(g_prev);
  }
  g_state = (g.topRows(n).array().colwise() * p.input_scale.head(n).array()).matrix();
}

// Weighted squared rollout error summed over a block of windows; gradient
// (unnormalized) is accumulated into grads when non-null.
double block_loss(const ModelParams& p, const WindowSet& ws, const Vec& weights, std::span<const std::size_t> order,
                  Grads* grads) {
  const int n = ws.state_dim;
  const int m = ws.control_dim;
  const int H = ws.horizon;
  const Eigen::Index B = static_cast<Eigen::Index>(order.size());
  const double dt = ws.dt;
  const double half = 0.5 * dt;
  const double sixth = dt / 6.0;

  std::vector<Mat> xs(static_cast<std::size_t>(H + 1), Mat(n, B));
  std::vector<Mat> us(static_cast<std::size_t>(H), Mat(m, B));
  Mat target(n, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const std::size_t w = order[static_cast<std::size_t>(b)];
    for (int j = 0; j < n; ++j) xs[0](j, b) = ws.initial[w * static_cast<std::size_t>(n) + static_cast<std::size_t>(j)];
    for (int k = 0; k < H; ++k) {
      for (int j = 0; j < m; ++j) {
        us[static_cast<std::size_t>(k)](j, b) =
            ws.controls[(w * static_cast<std::size_t>(H) + static_cast<std::size_t>(k)) * static_cast<std::size_t>(m) +
                        static_cast<std::size_t>(j)];
      }
    }
  }

  const bool need_grad = grads != nullptr;
  // caches[k][s] for step k, RK4 stage s; kept only when a gradient is needed.
  std::vector<std::array<NetCache, 4>> caches(need_grad ? static_cast<std::size_t>(H) : 1);
  std::vector<Mat> residual(static_cast<std::size_t>(H));
  Mat k1, k2, k3, k4, s;
  double loss = 0.0;
  for (int k = 0; k < H; ++k) {
    auto& c = caches[need_grad ? static_cast<std::size_t>(k) : 0];
    const Mat& x = xs[static_cast<std::size_t>(k)];
    const Mat& u = us[static_cast<std::size_t>(k)];
    net_forward(p, x, u, c[0], k1);
    s = x + half * k1;
    net_forward(p, s, u, c[1], k2);
    s = x + half * k2;
    net_forward(p, s, u, c[2], k3);
    s = x + dt * k3;
    net_forward(p, s, u, c[3], k4);
    Mat& next = xs[static_cast<std::size_t>(k + 1)];
    next = x + sixth * (((k1 + 2.0 * k2) + 2.0 * k3) + k4);
    for (Eigen::Index b = 0; b < B; ++b) {
      const std::size_t w = order[static_cast<std::size_t>(b)];
      for (int j = 0; j < n; ++j) {
        target(j, b) = ws.targets[(w * static_cast<std::size_t>(H) + static_cast<std::size_t>(k)) *
                                      static_cast<std::size_t>(n) +
                                  static_cast<std::size_t>(j)];
      }
    }
    Mat& r = residual[static_cast<std::size_t>(k)];
    r = next - target;
    loss += (r.array().square().colwise() * weights.array()).sum();
  }
  if (!need_grad) return loss;

  // Reverse sweep through the unrolled RK4 graph.
  Mat g = Mat::Zero(n, B);
  Mat gk1, gk2, gk3, gk4, gs;
  for (int k = H - 1; k >= 0; --k) {
    g += 2.0 * (residual[static_cast<std::size_t>(k)].array().colwise() * weights.array()).matrix();
    const auto& c = caches[static_cast<std::size_t>(k)];
    gk4 = sixth * g;
    gk3 = (2.0 * sixth) * g;
    gk2 = (2.0 * sixth) * g;
    gk1 = sixth * g;
    net_backward(p, c[3], gk4, *grads, gs);
    g += gs;
    gk3 += dt * gs;
    net_backward(p, c[2], gk3, *grads, gs);
    g += gs;
    gk2 += half * gs;
    net_backward(p, c[1], gk2, *grads, gs);
    g += gs;
    gk1 += half * gs;
    net_backward(p, c[0], gk1, *grads, gs);
    g += gs;
  }
  return loss;
}

constexpr std::size_t kBlock = 256;

double loss_over(const ModelParams& p, const WindowSet& ws, const Vec& weights, std::span<const std::size_t> order,
                 std::vector<double>* gradient) {
  if (order.empty()) throw std::invalid_argument("trajectory_loss: no windows");
  if (weights.size() != ws.state_dim) throw std::invalid_argument("trajectory_loss: weight dimension mismatch");
  if (p.arch.state_dim != ws.state_dim || p.arch.control_dim != ws.control_dim) {
    throw ModelShapeError("trajectory_loss: model dimensions do not match the data");
  }
  std::optional<Grads> grads;
  if (gradient) grads.emplace(p);
  double total = 0.0;
  for (std::size_t at = 0; at < order.size(); at += kBlock) {
    const std::size_t len = std::min(kBlock, order.size() - at);
    total += block_loss(p, ws, weights, order.subspan(at, len), grads ? &*grads : nullptr);
  }
  const double norm = 1.0 / (static_cast<double>(order.size()) * ws.horizon * ws.state_dim);
  if (gradient) {
    for (int f : p.arch.frozen_inputs) grads->w.front().col(f).setZero();
    gradient->clear();
    gradient->reserve(p.parameter_count());
    for (std::size_t l = 0; l < grads->w.size(); ++l) {
      for (Eigen::Index i = 0; i < grads->w[l].size(); ++i) gradient->push_back(norm * grads->w[l].data()[i]);
      for (Eigen::Index i = 0; i < grads->b[l].size(); ++i) gradient->push_back(norm * grads->b[l][i]);
    }
  }
  return total * norm;
}

std::vector<std::size_t> iota(std::size_t count) {
  std::vector<std::size_t> v(count);
  std::iota(v.begin(), v.end(), std::size_t{0});
  return v;
}

// Fits input/output normalization to the train split.
void fit_normalization(ModelParams& p, const std::vector<Trajectory>& trajs) {
  const int n = p.arch.state_dim;
  const int m = p.arch.control_dim;
  Vec sum = Vec::Zero(n + m);
  Vec sq = Vec::Zero(n + m);
  Vec dsq = Vec::Zero(n);
  double count = 0.0;
  double dcount = 0.0;
  for (const auto& t : trajs) {
    for (std::size_t k = 0; k < t.steps(); ++k) {
      Vec z(n + m);
      z << t.states[k].values(), t.controls[k].values();
      sum += z;
      sq += z.cwiseAbs2();
      count += 1.0;
      dsq += ((t.states[k + 1].values() - t.states[k].values()) / t.dt).cwiseAbs2();
      dcount += 1.0;
    }
  }
  if (count == 0.0) return;
  const Vec mean = sum / count;
  const Vec var = (sq / count - mean.cwiseAbs2()).cwiseMax(0.0);
  for (int f = 0; f < n + m; ++f) {
    const double sd = std::sqrt(var[f]);
    p.input_shift[f] = mean[f];
    p.input_scale[f] = sd > 1e-9 ? 1.0 / sd : 1.0;
  }
  const Vec rms = (dsq / dcount).cwiseSqrt();
  const double top = rms.maxCoeff();
  for (int j = 0; j < n; ++j) p.output_scale[j] = std::max({rms[j], 1e-3 * top, 1e-9});
}

}  // namespace

double trajectory_loss(const ModelParams& params, const WindowSet& windows, const Vec& weights,
                       std::vector<double>* gradient) {
  const auto order = iota(windows.count());
  return loss_over(params, windows, weights, order, gradient);
}

ModelParams train(const Dataset& dataset, const Architecture& arch, const TrainConfig& config, TrainReport* report) {
  if (dataset.train.empty()) throw std::invalid_argument("train: the train split is empty");
  if (config.epochs < 0 || config.batch_size < 1 || !(config.learning_rate > 0.0)) {
    throw std::invalid_argument("train: invalid hyperparameters");
  }
  arch.validate();
  dataset.validate(arch.state_dim, arch.control_dim);

  RngStream rng(config.seed);
  RngStream init_rng = rng.child(0);
  RngStream shuffle_rng = rng.child(1);
  ModelParams params = ModelParams::initialized(arch, init_rng);
  if (config.normalize) fit_normalization(params, dataset.train);

  const WindowSet windows = make_windows(dataset.train, config.horizon, config.window_stride);
  if (windows.count() == 0) throw std::invalid_argument("train: no training windows (trajectories too short)");
  const Vec weights = loss_weights(dataset.train, config.weighting);
  const auto all = iota(windows.count());

  std::vector<double> theta = params.flatten();
  const std::size_t P = theta.size();
  std::vector<double> m1(P, 0.0), m2(P, 0.0), grad;
  long long adam_t = 0;
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  TrainReport local;
  local.initial_loss = loss_over(params, windows, weights, all, nullptr);
  if (!std::isfinite(local.initial_loss)) throw TrainingDivergedError(0, "initial loss is not finite");
  double best_loss = local.initial_loss;
  std::vector<double> best = theta;
  double lr_factor = 1.0;

  std::vector<std::size_t> order = all;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(shuffle_rng.next_u64() % i);
      std::swap(order[i - 1], order[j]);
    }
    const double progress = config.epochs > 1 ? static_cast<double>(epoch) / (config.epochs - 1) : 0.0;
    const double cosine = 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
    const double lr = config.learning_rate * lr_factor *
                      (config.final_lr_fraction + (1.0 - config.final_lr_fraction) * cosine);
    for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t len = std::min(static_cast<std::size_t>(config.batch_size), order.size() - at);
      const double l = loss_over(params, windows, weights, std::span<const std::size_t>(order).subspan(at, len), &grad);
      if (!std::isfinite(l)) throw TrainingDivergedError(epoch, "minibatch loss is not finite");
      ++adam_t;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t));
      for (std::size_t i = 0; i < P; ++i) {
        m1[i] = beta1 * m1[i] + (1.0 - beta1) * grad[i];
        m2[i] = beta2 * m2[i] + (1.0 - beta2) * grad[i] * grad[i];
        theta[i] -= lr * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + eps);
      }
      params.unflatten(theta);
    }
    const double epoch_loss = loss_over(params, windows, weights, all, nullptr);
    if (!std::isfinite(epoch_loss)) throw TrainingDivergedError(epoch, "train loss is not finite");
    if (epoch_loss <= best_loss) {
      best_loss = epoch_loss;
      best = theta;
    } else {
      // Reject the epoch: restart from the best parameters with a smaller step.
      theta = best;
      params.unflatten(theta);
      std::fill(m1.begin(), m1.end(), 0.0);
      std::fill(m2.begin(), m2.end(), 0.0);
      adam_t = 0;
      lr_factor *= 0.5;
      ++local.rollbacks;
    }
    local.epoch_loss.push_back(best_loss);
  }
  params.unflatten(best);

  if (!dataset.validation.empty()) {
    const WindowSet val = make_windows(dataset.validation, windows.horizon, config.window_stride);
    if (val.count() > 0) local.validation_loss = trajectory_loss(params, val, weights, nullptr);
  }
  if (report) *report = std::move(local);
  return params;
}

}  // namespace softctl::model
