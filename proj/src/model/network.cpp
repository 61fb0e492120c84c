#include "softctl/model/network.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>

#include "fast_math.hpp"

namespace softctl::model {

std::string to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "identity"; }

Activation activation_from_string(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "identity") return Activation::Identity;
  throw ModelShapeError("unknown activation '" + name + "'");
}

std::vector<int> Architecture::widths() const {
  std::vector<int> w;
  w.push_back(input_dim());
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(output_dim());
  return w;
}

void Architecture::validate() const {
  if (state_dim <= 0 || control_dim < 0) throw ModelShapeError("architecture: bad state/control dimension");
  for (int h : hidden) {
    if (h <= 0) throw ModelShapeError("architecture: hidden width must be positive");
  }
  for (int f : frozen_inputs) {
    if (f < 0 || f >= input_dim()) throw ModelShapeError("architecture: frozen input index out of range");
  }
}

double activate(Activation a, double z) { return a == Activation::Tanh ? detail::tanh_fast(z) : z; }

ModelParams ModelParams::zeros(const Architecture& arch) {
  arch.validate();
  ModelParams p;
  p.arch = arch;
  const auto w = arch.widths();
  for (std::size_t l = 0; l + 1 < w.size(); ++l) {
    p.layers.push_back({Eigen::MatrixXd::Zero(w[l + 1], w[l]), Vec::Zero(w[l + 1])});
  }
  p.input_shift = Vec::Zero(arch.input_dim());
  p.input_scale = Vec::Ones(arch.input_dim());
  p.output_scale = Vec::Ones(arch.output_dim());
  return p;
}

ModelParams ModelParams::initialized(const Architecture& arch, RngStream& rng) {
  ModelParams p = zeros(arch);
  for (auto& layer : p.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) layer.weight(r, c) = rng.uniform(-limit, limit);
    }
  }
  for (int f : arch.frozen_inputs) p.layers.front().weight.col(f).setZero();
  return p;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

std::vector<double> ModelParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& l : layers) {
    flat.insert(flat.end(), l.weight.data(), l.weight.data() + l.weight.size());
    flat.insert(flat.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return flat;
}

void ModelParams::unflatten(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw ModelShapeError("unflatten: parameter count mismatch");
  std::size_t at = 0;
  for (auto& l : layers) {
    std::copy_n(flat.data() + at, l.weight.size(), l.weight.data());
    at += static_cast<std::size_t>(l.weight.size());
    std::copy_n(flat.data() + at, l.bias.size(), l.bias.data());
    at += static_cast<std::size_t>(l.bias.size());
  }
}

void ModelParams::validate() const {
  arch.validate();
  const auto w = arch.widths();
  if (layers.size() + 1 != w.size()) throw ModelShapeError("model: layer count does not match architecture");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (layers[l].weight.rows() != w[l + 1] || layers[l].weight.cols() != w[l] || layers[l].bias.size() != w[l + 1]) {
      throw ModelShapeError("model: layer " + std::to_string(l) + " has the wrong shape");
    }
    if (!layers[l].weight.allFinite() || !layers[l].bias.allFinite()) {
      throw ModelShapeError("model: non-finite parameter in layer " + std::to_string(l));
    }
  }
  if (input_shift.size() != arch.input_dim() || input_scale.size() != arch.input_dim() ||
      output_scale.size() != arch.output_dim()) {
    throw ModelShapeError("model: normalization vectors have the wrong size");
  }
  if (!input_shift.allFinite() || !input_scale.allFinite() || !output_scale.allFinite()) {
    throw ModelShapeError("model: non-finite normalization");
  }
}

BatchEvaluator::BatchEvaluator(const ModelParams& params) : params_(&params) {}

void BatchEvaluator::evaluate(const double* inputs, int batch, double* outputs) {
  const ModelParams& p = *params_;
  const auto widths = p.arch.widths();
  const int widest = *std::max_element(widths.begin(), widths.end());
  const std::size_t need = static_cast<std::size_t>(widest) * static_cast<std::size_t>(batch);
  if (buf_a_.size() < need) {
    buf_a_.resize(need);
    buf_b_.resize(need);
  }
  const std::size_t nb = static_cast<std::size_t>(batch);

  double* cur = buf_a_.data();
  double* nxt = buf_b_.data();
  const int in_dim = widths.front();
  for (int f = 0; f < in_dim; ++f) {
    const double shift = p.input_shift[f];
    const double scale = p.input_scale[f];
    const double* src = inputs + f * nb;
    double* dst = cur + f * nb;
    for (std::size_t s = 0; s < nb; ++s) dst[s] = (src[s] - shift) * scale;
  }

  const std::size_t n_layers = p.layers.size();
  for (std::size_t l = 0; l < n_layers; ++l) {
    const auto& W = p.layers[l].weight;
    const auto& b = p.layers[l].bias;
    const int out_dim = static_cast<int>(W.rows());
    const int k_dim = static_cast<int>(W.cols());
    const bool last = l + 1 == n_layers;
    double* dst_base = last ? outputs : nxt;
    for (int i = 0; i < out_dim; ++i) {
      double* __restrict o = dst_base + i * nb;
      const double bi = b[i];
      for (std::size_t s = 0; s < nb; ++s) o[s] = bi;
      for (int k = 0; k < k_dim; ++k) {
        const double w = W(i, k);
        const double* __restrict x = cur + k * nb;
        for (std::size_t s = 0; s < nb; ++s) o[s] += w * x[s];
      }
      if (last) {
        const double scale = p.output_scale[i];
        for (std::size_t s = 0; s < nb; ++s) o[s] *= scale;
      } else if (p.arch.activation == Activation::Tanh) {
        for (std::size_t s = 0; s < nb; ++s) o[s] = detail::tanh_fast(o[s]);
      }
    }
    std::swap(cur, nxt);
  }
}

Vec predict_derivative(const ModelParams& params, const Vec& x, const Vec& u) {
  if (x.size() != params.arch.state_dim || u.size() != params.arch.control_dim) {
    throw ModelShapeError("predict_derivative: expected state dim " + std::to_string(params.arch.state_dim) +
                          " and control dim " + std::to_string(params.arch.control_dim) + ", got " +
                          std::to_string(x.size()) + " and " + std::to_string(u.size()));
  }
  Vec in(params.arch.input_dim());
  in << x, u;
  Vec out(params.arch.output_dim());
  BatchEvaluator eval(params);
  eval.evaluate(in.data(), 1, out.data());
  return out;
}

Vec predict_derivative(const ModelParams& params, const StateVector& x, const ControlVector& u) {
  return predict_derivative(params, x.values(), u.values());
}

}  // namespace softctl::model
