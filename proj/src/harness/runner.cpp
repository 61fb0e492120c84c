#include "softctl/harness/runner.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "softctl/core/thread_pool.hpp"
#include "softctl/harness/metrics.hpp"
#include "softctl/harness/sim.hpp"
#include "softctl/model/calibration.hpp"
#include "softctl/planner/planner.hpp"
#include "softctl/safety/filter.hpp"

namespace softctl::harness {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

double TrialSummary::overall_min_asf() const {
  double m = kNaN;
  for (double v : min_asf) m = std::isnan(m) ? v : std::min(m, v);
  return m;
}

// -------------------------------------------------------------- model ----

std::string model_cache_key(const Scenario& s) {
  const json full = json::parse(dump_scenario(s));
  json key = {{"plant", {{"kind", full["plant"]["kind"]}, {"params", full["plant"]["params"]}}},
              {"dt", full["dt"]},
              {"data", full["data"]},
              {"model", full["model"]}};
  key["model"].erase("cache");
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(key.dump())));
  return to_string(s.plant.kind) + "-" + hex + ".json";
}

ModelInfo obtain_model(const Scenario& s, const RunOptions& opt) {
  const int n = s.plant.state_dim(), m = s.plant.control_dim();
  ModelInfo info;
  const auto check_dt = [&](const model::Checkpoint& c, const std::string& where) {
    if (std::abs(c.dt - s.dt) > 1e-12 * s.dt) {
      throw model::CheckpointError(where + ": checkpoint dt " + std::to_string(c.dt) + " differs from scenario dt " +
                                   std::to_string(s.dt));
    }
  };
  if (opt.checkpoint) {
    info.checkpoint = model::load_checkpoint(*opt.checkpoint, n, m);
    check_dt(info.checkpoint, *opt.checkpoint);
    info.source = "file:" + *opt.checkpoint;
    return info;
  }
  std::string cache_path;
  if (s.model.cache && !opt.cache_dir.empty()) {
    cache_path = (fs::path(opt.cache_dir) / model_cache_key(s)).string();
    if (fs::exists(cache_path)) {
      info.checkpoint = model::load_checkpoint(cache_path, n, m);
      check_dt(info.checkpoint, cache_path);
      info.source = "cache:" + cache_path;
      return info;
    }
  }
  const auto t0 = std::chrono::steady_clock::now();
  const model::Dataset data = collect_dataset(s);
  model::Architecture arch = s.model.arch;
  arch.state_dim = n;
  arch.control_dim = m;
  if (opt.log) *opt.log << "[" << s.name << "] training " << to_string(s.plant.kind) << " model on " << data.train.size() << " trajectories\n";
  info.checkpoint.params = model::train(data, arch, s.model.train, &info.report);
  info.checkpoint.dt = s.dt;
  info.checkpoint.bound = model::calibrate_error_bound(info.checkpoint.params, data.validation, s.dt);
  info.train_seconds = seconds_since(t0);
  info.source = "trained";
  if (opt.log) {
    *opt.log << "[" << s.name << "] train loss " << info.report.initial_loss << " -> "
             << (info.report.epoch_loss.empty() ? info.report.initial_loss : info.report.epoch_loss.back())
             << ", validation " << info.report.validation_loss << ", eps_bar " << info.checkpoint.bound.epsilon_bar
             << " (" << info.train_seconds << " s)\n";
  }
  if (!cache_path.empty()) {
    fs::create_directories(opt.cache_dir);
    model::save_checkpoint(cache_path, info.checkpoint);
  }
  return info;
}

// ---------------------------------------------------------- closed loop ----

namespace {

planner::TaskSpec make_task(const Scenario& s, double t) {
  planner::TaskSpec task;
  task.tracked = s.reference.tracked;
  task.tracking_weight = s.task.tracking_weight;
  const int H = s.planner.sampler.horizon;
  task.reference.reserve(static_cast<std::size_t>(H) + 1);
  for (int k = 0; k <= H; ++k) task.reference.push_back(s.reference.at(t + k * s.dt));
  task.input_weight = s.task.input_weight;
  task.input_center = s.task.input_center;
  task.rate_weight = s.task.rate_weight;
  task.terminal_weight = s.task.terminal_weight;
  for (const auto& b : s.barriers) {
    if (b.penalty_weight > 0.0) task.penalties.push_back({b.spec, b.penalty_weight, b.penalty_margin});
  }
  return task;
}

double pursuit_error(const Scenario& s, const StateVector& x, double t, double lookahead) {
  const Vec target = s.reference.at(t + lookahead);
  const double px = x[s.reference.tracked[0]], py = x[s.reference.tracked[1]];
  return wrap_angle(std::atan2(target[1] - py, target[0] - px) - x[2]);
}

Vec initial_state(const Scenario& s, RngStream rng) {
  Vec x = s.plant.initial;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (s.plant.initial_jitter[i] > 0.0) x[i] += s.plant.initial_jitter[i] * rng.normal();
  }
  return x;
}

// The enforced barrier with the smallest value at x, or null.
const safety::BarrierSpec* most_active(const std::vector<safety::BarrierSpec>& enforced, const StateVector& x) {
  const safety::BarrierSpec* best = nullptr;
  double hmin = std::numeric_limits<double>::infinity();
  for (const auto& b : enforced) {
    const double h = safety::barrier_value(b, x.values().data());
    if (h < hmin) {
      hmin = h;
      best = &b;
    }
  }
  return best;
}

TrialLog run_trial(const Scenario& s, const std::optional<ModelInfo>& model, int trial, std::ostream* log) {
  TrialLog out;
  out.trial = trial;
  out.seed = s.trial_seed(trial);
  const RngStream root(out.seed);
  RngStream plant_rng = root.child(0);
  RngStream plan_rng = root.child(1);
  SimPlant plant(s.plant, initial_state(s, root.child(2)), true);
  const ControlLimits limits = plant.limits();
  const int n = s.plant.state_dim();

  std::vector<safety::BarrierSpec> enforced;
  for (const auto& b : s.barriers) {
    if (b.spec.filter) enforced.push_back(b.spec);
  }
  const bool uses_model = s.controller == ControllerKind::Framework || s.controller == ControllerKind::NoAcbf;
  const bool filtered = s.controller == ControllerKind::Framework;
  std::optional<planner::Planner> planner;
  double eps = 0.0;
  const model::ErrorBound* bound = nullptr;
  if (uses_model) {
    if (!model) throw std::logic_error("run_trial: model-based controller without a model");
    planner.emplace(model->checkpoint.params, s.dt, s.planner.workers);
    bound = &model->checkpoint.bound;
    eps = bound->epsilon_bar;
  }
  const std::vector<int> frozen = uses_model ? model->checkpoint.params.arch.frozen_inputs : std::vector<int>{};
  auto est = safety::AdaptiveEstimate::zero(n, s.safety.gain, s.safety.theta_max_factor * eps);
  safety::FilterConfig fcfg;
  fcfg.alpha = s.safety.alpha;
  fcfg.distance = s.safety.distance;

  std::vector<double> previous;
  bool have_previous = false;
  PidState pid;
  Vec last_u;
  bool warned = false;

  const int steps = s.steps();
  out.records.reserve(static_cast<std::size_t>(steps));
  try {
    for (int k = 0; k < steps; ++k) {
      const double t = k * s.dt;
      const StateVector x = plant.observe();
      StepRecord rec;
      rec.t = t;
      rec.x = x.values();
      rec.stimulations = plant.stimulations();
      rec.margin = kNaN;
      rec.cost = kNaN;
      for (const auto& b : s.barriers) rec.h.push_back(safety::barrier_value(b.spec, x.values().data()));

      const auto t0 = std::chrono::steady_clock::now();
      ControlVector u;
      if (uses_model) {
        planner::TaskSpec task = make_task(s, t);
        if (s.task.rate_weight > 0.0 && last_u.size() > 0) task.previous_input = last_u;
        const auto& res = planner->plan(x, task, s.planner.sampler, limits, have_previous ? &previous : nullptr, plan_rng);
        std::size_t sel = res.optimal;
        rec.cost = res.batch.costs[res.optimal];
        if (filtered && !enforced.empty()) {
          const auto d = safety::filter_select(res.batch, res.optimal, enforced, est, eps, fcfg);
          sel = d.selected;
          rec.margin = d.margin;
          rec.intervened = d.intervened;
          rec.fallback = d.fallback;
          rec.admissible = static_cast<long long>(d.admissible);
          u = d.u_safe.front();
        } else {
          u = res.batch.control(sel, 0);
        }
        const auto seq = res.batch.control_data(sel);
        previous.assign(seq.begin(), seq.end());
        have_previous = true;
        for (int j = 0; j <= res.batch.horizon; ++j) {
          Vec xs = Eigen::Map<const Vec>(res.batch.state(sel, j), n);
          // The model never sees frozen inputs, so they cannot leave the validated region.
          for (int i : frozen) xs[i] = bound->state_lo[i];
          const Vec us = res.batch.control(sel, std::min(j, res.batch.horizon - 1)).values();
          if (!bound->covers(xs, us, 0.1)) rec.covered = false;
        }
        if (filtered && !enforced.empty()) {
          if (const auto* b = most_active(enforced, x)) est = safety::update_adaptive(est, safety::barrier_eval(*b, x).grad, s.dt);
        }
      } else if (s.controller == ControllerKind::Pid) {
        Vec e(1);
        e[0] = pursuit_error(s, x, t, s.pid.lookahead);
        if (s.plant.kind == PlantKind::Fish) {
          ControlLimits bl;
          bl.lo = limits.lo.head<1>();
          bl.hi = limits.hi.head<1>();
          auto [b, next] = pid_step(e, s.pid.gains, pid, bl, s.dt);
          pid = next;
          Vec c(2);
          c << b[0], s.pid.amplitude;
          u = ControlVector(c, limits);
        } else {
          auto [o, next] = pid_step(e, s.pid.gains, pid, limits, s.dt);
          pid = next;
          Vec c(1);
          c[0] = o[0] >= s.pid.threshold ? 1.0 : o[0] <= -s.pid.threshold ? -1.0 : 0.0;
          u = ControlVector(c, limits);
        }
      } else {
        const auto stim = continuous_stimulation_step(pursuit_error(s, x, t, s.continuous.lookahead), s.continuous.threshold);
        Vec c(1);
        c[0] = stim == plants::Stimulus::Left ? 1.0 : stim == plants::Stimulus::Right ? -1.0 : 0.0;
        u = ControlVector(c, limits);
      }
      rec.tick_ms = 1e3 * seconds_since(t0);
      if (!rec.covered && !warned && log) {
        *log << "[" << s.name << "] warning: trial " << trial << " plans outside the calibrated region at t=" << t << "\n";
        warned = true;
      }

      rec.u = plant.step(u, s.dt, plant_rng);
      last_u = rec.u;
      out.records.push_back(std::move(rec));
    }
  } catch (const std::exception& e) {
    out.error = e.what();
    if (log) *log << "[" << s.name << "] trial " << trial << " aborted: " << e.what() << "\n";
  }
  out.final_state = plant.observe().values();
  out.final_stimulations = plant.stimulations();
  out.summary = summarize(s, out);
  return out;
}

}  // namespace

RunResult run_scenario(const Scenario& s, const std::optional<ModelInfo>& model, const RunOptions& opt) {
  s.validate();
  RunResult result;
  result.scenario = s;
  result.model = model;
  result.trials.resize(static_cast<std::size_t>(s.trials));
  ThreadPool pool(std::max<std::size_t>(1, opt.trial_workers));
  pool.parallel_for(result.trials.size(), [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      result.trials[i] = run_trial(s, model, static_cast<int>(i), opt.trial_workers > 1 ? nullptr : opt.log);
    }
  });
  return result;
}

RunResult run_scenario(const Scenario& s, const RunOptions& opt) {
  std::optional<ModelInfo> model;
  if (s.controller == ControllerKind::Framework || s.controller == ControllerKind::NoAcbf) model = obtain_model(s, opt);
  return run_scenario(s, model, opt);
}

// ----------------------------------------------------------- summaries ----

TrialSummary summarize(const Scenario& s, const TrialLog& log) {
  TrialSummary r;
  r.trial = log.trial;
  r.seed = log.seed;
  r.controller = to_string(s.controller);
  r.status = log.error.empty() ? "ok" : "error";
  r.steps = static_cast<int>(log.records.size());

  std::vector<std::pair<double, StateVector>> visited;
  for (const auto& rec : log.records) visited.emplace_back(rec.t, StateVector(rec.x));
  if (log.final_state.size() > 0) visited.emplace_back(static_cast<double>(log.records.size()) * s.dt, StateVector(log.final_state));

  const double inf = std::numeric_limits<double>::infinity();
  r.min_h.assign(s.barriers.size(), inf);
  r.min_tsf = s.metrics.tsf_region.empty() ? kNaN : inf;
  r.min_asf.assign(s.metrics.asf_obstacles.size(), inf);
  const BarrierConfig* region = s.metrics.tsf_region.empty() ? nullptr : s.barrier(s.metrics.tsf_region);
  std::vector<const BarrierConfig*> obstacles;
  for (const auto& o : s.metrics.asf_obstacles) obstacles.push_back(s.barrier(o));

  double track_sum = 0.0;
  for (const auto& [t, x] : visited) {
    for (std::size_t b = 0; b < s.barriers.size(); ++b) {
      r.min_h[b] = std::min(r.min_h[b], safety::barrier_value(s.barriers[b].spec, x.values().data()));
    }
    if (region) r.min_tsf = std::min(r.min_tsf, tsf(x, region->spec, s.metrics.tsf_scale));
    for (std::size_t o = 0; o < obstacles.size(); ++o) r.min_asf[o] = std::min(r.min_asf[o], asf(x, obstacles[o]->spec));
    const Vec ref = s.reference.at(t);
    double e2 = 0.0;
    for (std::size_t j = 0; j < s.reference.tracked.size(); ++j) {
      const double e = x[s.reference.tracked[j]] - ref[static_cast<Eigen::Index>(j)];
      e2 += e * e;
    }
    track_sum += std::sqrt(e2);
  }
  r.mean_tracking_error = visited.empty() ? kNaN : track_sum / static_cast<double>(visited.size());

  if (!s.metrics.corridor.empty()) {
    std::vector<StateVector> states;
    for (const auto& v : visited) states.push_back(v.second);
    r.safety_ratio = states.empty() ? kNaN : safety_ratio(states, s.barrier(s.metrics.corridor)->spec);
  } else {
    r.safety_ratio = kNaN;
  }

  r.stimulations = log.final_stimulations;
  r.max_abs_u = Vec::Zero(s.plant.control_dim());
  double tick = 0.0;
  for (const auto& rec : log.records) {
    r.interventions += rec.intervened;
    r.fallbacks += rec.fallback;
    r.uncovered_ticks += !rec.covered;
    tick += rec.tick_ms;
    if (rec.intervened && !obstacles.empty()) {
      double near = inf;
      for (const auto* o : obstacles) near = std::min(near, asf(StateVector(rec.x), o->spec));
      r.near_interventions += near < s.metrics.near_distance;
    }
    for (Eigen::Index j = 0; j < rec.u.size() && j < r.max_abs_u.size(); ++j) {
      r.max_abs_u[j] = std::max(r.max_abs_u[j], std::abs(rec.u[j]));
    }
  }
  r.mean_tick_ms = log.records.empty() ? 0.0 : tick / static_cast<double>(log.records.size());
  return r;
}

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string table(const RunResult& res, bool with_timing) {
  const Scenario& s = res.scenario;
  std::ostringstream out;
  out << "trial,seed,controller,status,steps";
  for (const auto& b : s.barriers) out << ",min_h_" << b.spec.name;
  out << ",min_tsf,min_asf";
  for (const auto& o : s.metrics.asf_obstacles) out << ",min_asf_" << o;
  out << ",safety_ratio,stimulations,interventions,near_interventions,fallbacks";
  for (int j = 0; j < s.plant.control_dim(); ++j) out << ",max_abs_u" << j;
  out << ",mean_tracking_error,uncovered_ticks";
  if (with_timing) out << ",mean_tick_ms";
  out << "\n";
  for (const auto& t : res.trials) {
    const auto& r = t.summary;
    out << r.trial << "," << r.seed << "," << r.controller << "," << r.status << "," << r.steps;
    for (double h : r.min_h) out << "," << num(h);
    out << "," << num(r.min_tsf) << "," << num(r.overall_min_asf());
    for (double a : r.min_asf) out << "," << num(a);
    out << "," << num(r.safety_ratio) << "," << r.stimulations << "," << r.interventions << ","
        << r.near_interventions << "," << r.fallbacks;
    for (Eigen::Index j = 0; j < r.max_abs_u.size(); ++j) out << "," << num(r.max_abs_u[j]);
    out << "," << num(r.mean_tracking_error) << "," << r.uncovered_ticks;
    if (with_timing) out << "," << num(r.mean_tick_ms);
    out << "\n";
  }
  return out.str();
}

json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }
json maybe(double v) { return std::isnan(v) ? json(nullptr) : json(v); }
double unmaybe(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }
Vec json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string summary_csv(const RunResult& r) { return table(r, true); }
std::string summary_csv_deterministic(const RunResult& r) { return table(r, false); }

std::string runlog_jsonl(const Scenario& s, const TrialLog& log) {
  (void)s;
  std::ostringstream out;
  for (const auto& r : log.records) {
    json j = {{"t", r.t},
              {"x", vec_json(r.x)},
              {"u", vec_json(r.u)},
              {"h", r.h},
              {"margin", maybe(r.margin)},
              {"intervened", r.intervened},
              {"fallback", r.fallback},
              {"admissible", r.admissible},
              {"cost", maybe(r.cost)},
              {"tick_ms", r.tick_ms},
              {"stimulations", r.stimulations},
              {"covered", r.covered}};
    out << j.dump() << "\n";
  }
  json end = {{"final_state", vec_json(log.final_state)},
              {"final_stimulations", log.final_stimulations},
              {"trial", log.trial},
              {"seed", log.seed},
              {"error", log.error}};
  out << end.dump() << "\n";
  return out.str();
}

TrialLog parse_runlog(const Scenario& s, const std::string& text) {
  TrialLog log;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    if (j.contains("final_state")) {
      log.final_state = json_vec(j["final_state"]);
      log.final_stimulations = j["final_stimulations"].get<long long>();
      log.trial = j["trial"].get<int>();
      log.seed = j["seed"].get<std::uint64_t>();
      log.error = j["error"].get<std::string>();
      continue;
    }
    StepRecord r;
    r.t = j["t"].get<double>();
    r.x = json_vec(j["x"]);
    r.u = json_vec(j["u"]);
    r.h = j["h"].get<std::vector<double>>();
    r.margin = unmaybe(j["margin"]);
    r.intervened = j["intervened"].get<bool>();
    r.fallback = j["fallback"].get<bool>();
    r.admissible = j["admissible"].get<long long>();
    r.cost = unmaybe(j["cost"]);
    r.tick_ms = j["tick_ms"].get<double>();
    r.stimulations = j["stimulations"].get<long long>();
    r.covered = j["covered"].get<bool>();
    log.records.push_back(std::move(r));
  }
  log.summary = summarize(s, log);
  return log;
}

std::string runlog_filename(const Scenario& s, const TrialLog& log) {
  return s.name + "_" + std::to_string(log.trial) + "_" + std::to_string(log.seed) + ".jsonl";
}

std::string compare_csv(const RunResult& a, const RunResult& b) {
  if (a.trials.size() != b.trials.size()) throw std::invalid_argument("compare_csv: runs have different trial counts");
  struct Metric {
    std::string name;
    double (*get)(const TrialSummary&);
  };
  const std::vector<Metric> metrics = {
      {"min_tsf", [](const TrialSummary& r) { return r.min_tsf; }},
      {"min_asf", [](const TrialSummary& r) { return r.overall_min_asf(); }},
      {"safety_ratio", [](const TrialSummary& r) { return r.safety_ratio; }},
      {"stimulations", [](const TrialSummary& r) { return static_cast<double>(r.stimulations); }},
      {"interventions", [](const TrialSummary& r) { return static_cast<double>(r.interventions); }},
      {"mean_tracking_error", [](const TrialSummary& r) { return r.mean_tracking_error; }},
  };
  const std::string va = to_string(a.scenario.controller), vb = to_string(b.scenario.controller);
  std::ostringstream out;
  out << "trial,seed";
  for (const auto& bar : a.scenario.barriers) {
    out << ",min_h_" << bar.spec.name << "_" << va << ",min_h_" << bar.spec.name << "_" << vb << ",min_h_" << bar.spec.name << "_delta";
  }
  for (const auto& m : metrics) out << "," << m.name << "_" << va << "," << m.name << "_" << vb << "," << m.name << "_delta";
  out << "\n";
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    const auto& ra = a.trials[i].summary;
    const auto& rb = b.trials[i].summary;
    if (ra.seed != rb.seed) throw std::invalid_argument("compare_csv: trials use different seeds");
    out << ra.trial << "," << ra.seed;
    for (std::size_t k = 0; k < ra.min_h.size() && k < rb.min_h.size(); ++k) {
      out << "," << num(ra.min_h[k]) << "," << num(rb.min_h[k]) << "," << num(rb.min_h[k] - ra.min_h[k]);
    }
    for (const auto& m : metrics) {
      const double x = m.get(ra), y = m.get(rb);
      out << "," << num(x) << "," << num(y) << "," << num(y - x);
    }
    out << "\n";
  }
  return out.str();
}

namespace {
void write_file(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << text;
    if (!out) throw std::ios_base::failure("cannot write '" + path.string() + "'");
  }
  fs::rename(tmp, path);
}
}  // namespace

void write_outputs(const RunResult& r, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::ios_base::failure("cannot create output directory '" + dir + "': " + ec.message());
  const Scenario& s = r.scenario;
  write_file(fs::path(dir) / (s.name + "_config.json"), dump_scenario(s));
  for (const auto& t : r.trials) write_file(fs::path(dir) / runlog_filename(s, t), runlog_jsonl(s, t));
  write_file(fs::path(dir) / (s.name + "_summary.csv"), summary_csv(r));
}

}  // namespace softctl::harness
