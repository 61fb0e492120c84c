#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "softctl/core/types.hpp"
#include "softctl/model/network.hpp"

namespace softctl::model {

class TrainingDivergedError : public std::runtime_error {
 public:
  TrainingDivergedError(int epoch, const std::string& detail);
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

/// Recorded input/output trajectories split into train and validation sets.
struct Dataset {
  std::vector<Trajectory> train;
  std::vector<Trajectory> validation;

  /// Throws std::invalid_argument if dimensions or dt disagree between trajectories.
  void validate(int state_dim, int control_dim) const;
};

enum class LossWeighting {
  Uniform,    // every state component weighs 1
  Increment,  // component j weighs 1 / mean((x_{k+1} - x_k)_j^2) over the train split
};

struct TrainConfig {
  int epochs = 200;
  double learning_rate = 3e-3;
  /// Cosine decay from learning_rate to learning_rate * final_lr_fraction.
  double final_lr_fraction = 0.05;
  int batch_size = 64;
  /// Rollout length of every training window (steps).
  int horizon = 10;
  /// Offset between consecutive window starts (steps).
  int window_stride = 5;
  std::uint64_t seed = 0;
  /// Fit input/output normalization to the train split before training.
  bool normalize = true;
  LossWeighting weighting = LossWeighting::Increment;
};

struct TrainReport {
  /// Full-train-split loss of the retained parameters after each epoch.
  std::vector<double> epoch_loss;
  double initial_loss = 0.0;
  double validation_loss = 0.0;
  int rollbacks = 0;
};

/// Fixed-length windows cut from trajectories: x_0 plus H controls and H targets.
struct WindowSet {
  int horizon = 0;
  int state_dim = 0;
  int control_dim = 0;
  double dt = 0.0;
  std::vector<double> initial;   // count x n
  std::vector<double> controls;  // count x H x m
  std::vector<double> targets;   // count x H x n
  std::size_t count() const;
};

WindowSet make_windows(const std::vector<Trajectory>& trajectories, int horizon, int stride);

/// Per-component loss weights for `trajectories`.
Vec loss_weights(const std::vector<Trajectory>& trajectories, LossWeighting weighting);

/// Mean weighted squared error between RK4 rollouts of the model and the
/// recorded states, averaged over windows, steps and state components. When
/// `gradient` is non-null it receives dLoss/dparams in ModelParams::flatten()
/// order (frozen inputs have zero gradient).
double trajectory_loss(const ModelParams& params, const WindowSet& windows, const Vec& weights,
                       std::vector<double>* gradient);

/// Trains the derivative network by backpropagating through the unrolled RK4
/// graph (discretize-then-optimize) with Adam. After every epoch the full
/// train loss is evaluated; an epoch that increases it is rolled back and the
/// step size halved, so the reported epoch losses never increase.
/// Throws TrainingDivergedError on a non-finite loss.
ModelParams train(const Dataset& dataset, const Architecture& arch, const TrainConfig& config,
                  TrainReport* report = nullptr);

}  // namespace softctl::model
