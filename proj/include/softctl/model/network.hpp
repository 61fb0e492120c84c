#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "softctl/core/rng.hpp"
#include "softctl/core/types.hpp"

namespace softctl::model {

class ModelShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Activation { Tanh, Identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& name);

/// Fully connected network (x, u) -> dx/dt. Hidden layers use `activation`,
/// the output layer is linear.
struct Architecture {
  int state_dim = 0;
  int control_dim = 0;
  std::vector<int> hidden = {64, 64};
  Activation activation = Activation::Tanh;
  /// Input indices whose first-layer weights are pinned at zero, e.g. planar
  /// position for plants whose dynamics are translation invariant.
  std::vector<int> frozen_inputs;

  int input_dim() const { return state_dim + control_dim; }
  int output_dim() const { return state_dim; }
  std::vector<int> widths() const;
  void validate() const;

  friend bool operator==(const Architecture&, const Architecture&) = default;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Vec bias;                // out
};

struct ModelParams {
  Architecture arch;
  std::vector<DenseLayer> layers;
  /// Network input is (input - input_shift) * input_scale, elementwise.
  Vec input_shift;
  Vec input_scale;
  /// Derivative is output_scale * network output, elementwise.
  Vec output_scale;

  /// All weights zero, identity normalization.
  static ModelParams zeros(const Architecture& arch);
  /// Scaled-uniform (Glorot) weights, zero biases, identity normalization.
  static ModelParams initialized(const Architecture& arch, RngStream& rng);

  std::size_t parameter_count() const;
  /// Weights then biases, layer by layer; weights column-major.
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> flat);
  /// Throws ModelShapeError on any shape or finiteness violation.
  void validate() const;
};

double activate(Activation a, double z);

/// Inference engine for batches laid out feature-major: entry (feature f,
/// sample s) lives at data[f * batch + s]. Every sample is accumulated in the
/// same order whatever the batch size, so evaluating a sample alone or inside
/// a batch gives bit-identical results.
class BatchEvaluator {
 public:
  explicit BatchEvaluator(const ModelParams& params);

  const ModelParams& params() const { return *params_; }

  /// inputs: input_dim x batch; outputs: output_dim x batch.
  void evaluate(const double* inputs, int batch, double* outputs);

 private:
  const ModelParams* params_;
  std::vector<double> buf_a_;
  std::vector<double> buf_b_;
};

/// Forward pass for one (x, u). Throws ModelShapeError on dimension mismatch.
Vec predict_derivative(const ModelParams& params, const StateVector& x, const ControlVector& u);
Vec predict_derivative(const ModelParams& params, const Vec& x, const Vec& u);

}  // namespace softctl::model
