#pragma once

#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "softctl/core/rng.hpp"
#include "softctl/core/thread_pool.hpp"
#include "softctl/core/types.hpp"
#include "softctl/model/network.hpp"
#include "softctl/model/rollout.hpp"
#include "softctl/safety/barrier.hpp"

namespace softctl::planner {

class PlannerError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NominalPolicy { ShiftPrevious, Zero };

struct SamplerConfig {
  int n = 256;
  int horizon = 20;
  /// Perturbation stddev per control entry.
  Vec stddev;
  /// Temperature of the exponential weights.
  double temperature = 1.0;
  NominalPolicy nominal = NominalPolicy::ShiftPrevious;
  /// Lag-one correlation of the perturbation along the horizon, in [0, 1).
  double correlation = 0.0;
  /// When non-empty every sampled entry snaps to the nearest level (discrete inputs).
  std::vector<double> levels;

  void validate(int control_dim) const;
};

/// Quadratic proximity penalty weight * max(0, margin - h(x))^2.
struct Penalty {
  safety::BarrierSpec barrier;
  double weight = 0.0;
  double margin = 0.0;
};

/// Stage cost for step k = 1..H (state x_k reached by input u_{k-1}):
///   sum_j w_j (x_k[i_j] - r_k[j])^2 + input_weight |u_{k-1} - input_center|^2
///   + rate_weight |u_{k-1} - u_{k-2}|^2 + sum penalties,
/// plus terminal_weight on the step-H tracking error. reference[k] is the
/// target for x_k; a shorter list repeats its last entry.
struct TaskSpec {
  std::vector<int> tracked;
  Vec tracking_weight;
  std::vector<Vec> reference;
  double input_weight = 0.0;
  Vec input_center;
  double rate_weight = 0.0;
  /// Input applied before this plan; used for the first rate term.
  std::optional<Vec> previous_input;
  Vec terminal_weight;
  std::vector<Penalty> penalties;

  /// Throws std::invalid_argument on negative or all-zero weights or bad sizes.
  void validate(int state_dim, int control_dim) const;
  const Vec& reference_at(int k) const;
};

/// Candidate control sequences and their predicted motions, stored flat.
/// Index i pairs controls(i) with prediction(i).
struct CandidateBatch {
  int n = 0;
  int horizon = 0;
  int state_dim = 0;
  int control_dim = 0;
  double dt = 0.0;
  ControlLimits limits;
  std::vector<double> controls;  // n x H x m
  model::RolloutBatch rollouts;
  std::vector<double> costs;
  std::vector<double> weights;

  void resize(int n, int horizon, int state_dim, int control_dim);
  std::size_t size() const { return static_cast<std::size_t>(n); }

  std::span<const double> control_data(std::size_t i) const;
  std::span<double> control_data(std::size_t i);
  ControlVector control(std::size_t i, int k) const;
  std::vector<ControlVector> control_sequence(std::size_t i) const;
  Trajectory prediction(std::size_t i) const;
  const double* state(std::size_t i, int k) const { return rollouts.state(static_cast<int>(i), k); }
  const double* derivative(std::size_t i, int k) const { return rollouts.derivative(static_cast<int>(i), k); }
};

/// `config.n` sequences: candidate 0 is the nominal itself, the others add
/// Gaussian perturbations (from rng.child(i)) and are clamped to `limits`.
std::vector<std::vector<ControlVector>> sample_controls(const SamplerConfig& config,
                                                        const std::vector<ControlVector>& nominal,
                                                        const ControlLimits& limits, RngStream& rng);

/// Flat variant writing n x H x m values. Candidate i draws from base.child(i).
void sample_controls_into(const SamplerConfig& config, std::span<const double> nominal, const ControlLimits& limits,
                          const RngStream& base, std::size_t first, std::size_t last, std::span<double> out);

double evaluate_cost(const Trajectory& prediction, const std::vector<ControlVector>& controls, const TaskSpec& task);
/// states: (H+1) x n, controls: H x m.
double evaluate_cost(const double* states, const double* controls, int horizon, int state_dim, int control_dim,
                     const TaskSpec& task);

/// w_i = exp(-(J_i - min J) / beta) / sum. Non-finite costs get weight 0.
std::vector<double> exponential_weights(std::span<const double> costs, double beta);

/// Smallest index attaining the minimum finite cost. Throws PlannerError when
/// the batch is empty or no cost is finite.
std::size_t select_optimal(std::span<const double> costs);
std::size_t select_optimal(const CandidateBatch& batch);

struct PlanResult {
  CandidateBatch batch;
  std::size_t optimal = 0;
  /// Sequence the samples were centred on.
  std::vector<double> nominal;
  /// Weight-averaged control sequence (diagnostic only; never executed).
  std::vector<double> weighted_mean;
};

/// Nominal for the next plan: previous sequence shifted left by one with the
/// last entry repeated, or zeros (clamped into the limits) without a previous plan.
std::vector<double> make_nominal(const SamplerConfig& config, const std::vector<double>* previous, int control_dim,
                                 const ControlLimits& limits);

/// Reusable planner with a worker pool and per-worker rollout buffers.
class Planner {
 public:
  Planner(const model::ModelParams& params, double dt, std::size_t workers = 1);

  /// Samples, rolls out, scores and weights the candidates. Only the first
  /// action of the chosen sequence is meant to be executed; the caller
  /// replans from the next observed state. Draws one value from `rng`.
  const PlanResult& plan(const StateVector& x_now, const TaskSpec& task, const SamplerConfig& config,
                         const ControlLimits& limits, const std::vector<double>* previous, RngStream& rng);

  const PlanResult& last() const { return result_; }
  std::size_t workers() const { return pool_.size(); }

 private:
  const model::ModelParams* params_;
  double dt_;
  ThreadPool pool_;
  std::vector<std::unique_ptr<model::RolloutWorkspace>> spaces_;
  std::vector<model::RolloutBatch> chunks_;
  PlanResult result_;
};

/// One-shot planning step (single worker).
PlanResult plan_step(const model::ModelParams& params, double dt, const StateVector& x_now, const TaskSpec& task,
                     const SamplerConfig& config, const ControlLimits& limits,
                     const std::vector<ControlVector>* previous, RngStream& rng);

}  // namespace softctl::planner
