#include "softctl/cli/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "softctl/harness/runner.hpp"
#include "softctl/harness/scenario.hpp"
#include "softctl/harness/sim.hpp"
#include "softctl/model/calibration.hpp"
#include "softctl/model/checkpoint.hpp"
#include "softctl/model/training.hpp"
#include "softctl/planner/planner.hpp"

namespace softctl::cli {

namespace fs = std::filesystem;
using harness::Scenario;

std::string resolve_out_dir(const std::string& flag) {
  if (!flag.empty()) return flag;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "out";
}

namespace {

Scenario load(const RunConfig& c) {
  if (c.scenario.empty()) throw harness::ScenarioError("--scenario", "a scenario file is required");
  Scenario s = harness::load_scenario(c.scenario);
  if (c.seed) s.seed = *c.seed;
  if (c.trials) s.trials = *c.trials;
  if (c.controller) s.controller = harness::controller_from_string(*c.controller);
  s.validate();
  return s;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw std::ios_base::failure("cannot create output directory '" + dir + "'");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f) throw std::ios_base::failure("cannot write '" + path + "'");
}

// Maps exceptions onto the exit-code contract.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const harness::ScenarioError& e) {
    err << "error: scenario: " << e.what() << "\n";
    return kConfigError;
  } catch (const model::TrainingDivergedError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericError;
  } catch (const IntegrationError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericError;
  } catch (const planner::PlannerError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericError;
  } catch (const model::CheckpointError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::ios_base::failure& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

void print_box(std::ostream& out, const char* label, const Vec& lo, const Vec& hi) {
  out << label << ":";
  for (Eigen::Index i = 0; i < lo.size(); ++i) out << " [" << lo[i] << ", " << hi[i] << "]";
  out << "\n";
}

}  // namespace

int cmd_collect(const RunConfig& c, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    Scenario s = load(c);
    if (c.seed) s.data.seed = *c.seed;
    if (c.trajectories) {
      if (*c.trajectories < 0) throw harness::ScenarioError("--trajectories", "must be >= 0");
      s.data.trajectories = *c.trajectories;
      s.data.validation_trajectories = 0;
    }
    if (c.steps) {
      if (*c.steps < 1) throw harness::ScenarioError("--steps", "must be >= 1");
      s.data.steps = *c.steps;
    }
    const std::string dir = resolve_out_dir(c.out_dir);
    const std::string path = c.dataset ? *c.dataset : (fs::path(dir) / (s.name + "_dataset.jsonl")).string();
    if (!c.dataset) ensure_dir(dir);
    const model::Dataset data = harness::collect_dataset(s);
    harness::write_dataset(path, s, data);
    const std::size_t total = data.train.size() + data.validation.size();
    if (total == 0) err << "warning: no trajectories requested; wrote an empty dataset\n";
    out << "dataset: " << path << "\n";
    out << "trajectories: " << data.train.size() << " train, " << data.validation.size() << " validation, "
        << s.data.steps << " steps each\n";
    if (total > 0) {
      const int n = s.plant.state_dim();
      Vec lo = Vec::Constant(n, std::numeric_limits<double>::infinity()), hi = -lo;
      for (const auto* set : {&data.train, &data.validation}) {
        for (const auto& t : *set) {
          for (const auto& x : t.states) {
            lo = lo.cwiseMin(x.values());
            hi = hi.cwiseMax(x.values());
          }
        }
      }
      print_box(out, "state coverage", lo, hi);
    }
    return static_cast<int>(kOk);
  });
}

int cmd_train(const RunConfig& c, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    Scenario s = load(c);
    if (c.seed) s.model.train.seed = *c.seed;
    if (!c.dataset) throw harness::ScenarioError("--dataset", "a dataset file is required");
    if (!fs::exists(*c.dataset)) throw std::ios_base::failure("dataset '" + *c.dataset + "' does not exist");
    double dt = 0.0;
    const model::Dataset data = harness::read_dataset(*c.dataset, &dt);
    data.validate(s.plant.state_dim(), s.plant.control_dim());
    if (data.train.empty()) throw harness::ScenarioError("--dataset", "the dataset has no training trajectories");
    if (data.validation.empty()) throw harness::ScenarioError("--dataset", "calibration needs a validation split");
    model::Architecture arch = s.model.arch;
    arch.state_dim = s.plant.state_dim();
    arch.control_dim = s.plant.control_dim();
    model::TrainReport report;
    model::Checkpoint ckpt;
    ckpt.params = model::train(data, arch, s.model.train, &report);
    ckpt.dt = dt;
    ckpt.bound = model::calibrate_error_bound(ckpt.params, data.validation, dt);
    const std::string dir = resolve_out_dir(c.out_dir);
    const std::string path = c.checkpoint ? *c.checkpoint : (fs::path(dir) / (s.name + "_model.json")).string();
    if (!c.checkpoint) ensure_dir(dir);
    model::save_checkpoint(path, ckpt);
    const auto residuals = model::one_step_residuals(ckpt.params, data.validation, dt);
    double worst = 0.0;
    for (double r : residuals) worst = std::max(worst, r);
    out << "checkpoint: " << path << "\n";
    out << "train loss: " << (report.epoch_loss.empty() ? report.initial_loss : report.epoch_loss.back()) << "\n";
    out << "validation loss: " << report.validation_loss << "\n";
    out << "max validation residual: " << worst << "\n";
    out << "epsilon_bar: " << ckpt.bound.epsilon_bar << "\n";
    return static_cast<int>(kOk);
  });
}

int cmd_calibrate(const RunConfig& c, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (!c.checkpoint) throw harness::ScenarioError("--checkpoint", "a checkpoint is required");
    if (!c.dataset) throw harness::ScenarioError("--dataset", "a dataset file is required");
    model::Checkpoint ckpt = model::load_checkpoint(*c.checkpoint);
    double dt = 0.0;
    const model::Dataset data = harness::read_dataset(*c.dataset, &dt);
    data.validate(ckpt.params.arch.state_dim, ckpt.params.arch.control_dim);
    ckpt.bound = model::calibrate_error_bound(ckpt.params, data.validation, dt);
    model::save_checkpoint(*c.checkpoint, ckpt);
    out << "epsilon_bar: " << ckpt.bound.epsilon_bar << " (" << ckpt.bound.samples << " samples)\n";
    return static_cast<int>(kOk);
  });
}

namespace {

harness::RunOptions options(const RunConfig& c, const std::string& dir, std::ostream& err) {
  harness::RunOptions o;
  o.cache_dir = c.cache_dir ? *c.cache_dir : (fs::path(dir) / "models").string();
  o.checkpoint = c.checkpoint;
  o.log = c.verbosity > 0 ? &err : nullptr;
  return o;
}

int finish(const harness::RunResult& r, std::ostream& out) {
  out << harness::summary_csv(r);
  for (const auto& t : r.trials) {
    if (!t.error.empty()) return kNumericError;
  }
  return kOk;
}

}  // namespace

int cmd_run(const RunConfig& c, std::ostream& out, std::ostream& err) {
  if (!c.compare.empty()) return cmd_compare(c, out, err);
  return guarded(err, [&] {
    const Scenario s = load(c);
    const std::string dir = resolve_out_dir(c.out_dir);
    ensure_dir(dir);
    const auto r = harness::run_scenario(s, options(c, dir, err));
    harness::write_outputs(r, dir);
    return finish(r, out);
  });
}

int cmd_compare(const RunConfig& c, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (c.compare.size() != 2) throw harness::ScenarioError("--compare", "expected two variants, e.g. framework,pid");
    Scenario base = load(c);
    const std::string dir = resolve_out_dir(c.out_dir);
    ensure_dir(dir);
    std::vector<harness::RunResult> runs;
    for (const auto& v : c.compare) {
      Scenario s = base;
      s.controller = harness::controller_from_string(v);
      s.name = base.name + "_" + v;
      s.validate();
      runs.push_back(harness::run_scenario(s, options(c, dir, err)));
      harness::write_outputs(runs.back(), dir);
    }
    const std::string table = harness::compare_csv(runs[0], runs[1]);
    write_text((fs::path(dir) / (base.name + "_compare.csv")).string(), table);
    out << table;
    for (const auto& r : runs) {
      for (const auto& t : r.trials) {
        if (!t.error.empty()) return static_cast<int>(kNumericError);
      }
    }
    return static_cast<int>(kOk);
  });
}

int main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Learned-model predictive control with an adaptive safety filter"};
  app.require_subcommand(1);
  RunConfig c;
  std::uint64_t seed = 0;
  int trials = 0, trajectories = 0, steps = 0;
  std::string controller, checkpoint, dataset, cache, compare;
  bool quiet = false;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--scenario", c.scenario, "Scenario file (JSON)");
    sub->add_option("--seed", seed, "Seed override");
    sub->add_option("--out", c.out_dir, std::string("Output directory (default $") + kOutDirEnv + " or ./out)");
    sub->add_flag("-q,--quiet", quiet, "Suppress progress messages");
  };
  auto* collect = app.add_subcommand("collect", "Record excitation trajectories");
  common(collect);
  collect->add_option("--dataset", dataset, "Dataset file to write");
  collect->add_option("--trajectories", trajectories, "Number of trajectories (no validation split)");
  collect->add_option("--steps", steps, "Steps per trajectory");
  auto* train = app.add_subcommand("train", "Fit the dynamics model and calibrate its error bound");
  common(train);
  train->add_option("--dataset", dataset, "Dataset file")->required();
  train->add_option("--checkpoint", checkpoint, "Checkpoint file to write");
  auto* calibrate = app.add_subcommand("calibrate", "Recalibrate a checkpoint's error bound");
  calibrate->add_option("--checkpoint", checkpoint, "Checkpoint file (updated in place)")->required();
  calibrate->add_option("--dataset", dataset, "Dataset with a validation split")->required();
  auto* run = app.add_subcommand("run", "Run a scenario");
  auto* cmp = app.add_subcommand("compare", "Run two controller variants on the same seeds");
  for (auto* sub : {run, cmp}) {
    common(sub);
    sub->add_option("--trials", trials, "Trial count override");
    sub->add_option("--checkpoint", checkpoint, "Use this model checkpoint");
    sub->add_option("--cache", cache, "Model cache directory (default <out>/models)");
  }
  run->add_option("--controller", controller, "framework | no-acbf | pid | continuous");
  run->add_option("--compare", compare, "Two variants, e.g. framework,pid");
  cmp->add_option("--compare", compare, "Two variants, e.g. framework,pid")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  CLI::App* sub = app.get_subcommands().front();
  const auto given = [&](const std::string& name) {
    const auto* opt = sub->get_option_no_throw(name);
    return opt != nullptr && opt->count() > 0;
  };
  if (given("--seed")) c.seed = seed;
  if (given("--trials")) c.trials = trials;
  if (given("--trajectories")) c.trajectories = trajectories;
  if (given("--steps")) c.steps = steps;
  if (!controller.empty()) c.controller = controller;
  if (!checkpoint.empty()) c.checkpoint = checkpoint;
  if (!dataset.empty()) c.dataset = dataset;
  if (!cache.empty()) c.cache_dir = cache;
  if (!compare.empty()) {
    std::stringstream ss(compare);
    for (std::string v; std::getline(ss, v, ',');) c.compare.push_back(v);
  }
  c.verbosity = quiet ? 0 : 1;

  if (sub == collect) return cmd_collect(c, out, err);
  if (sub == train) return cmd_train(c, out, err);
  if (sub == calibrate) return cmd_calibrate(c, out, err);
  if (sub == cmp) return cmd_compare(c, out, err);
  return cmd_run(c, out, err);
}

}  // namespace softctl::cli
