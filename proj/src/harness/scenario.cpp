#include "softctl/harness/scenario.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "softctl/harness/metrics.hpp"

namespace softctl::harness {

using json = nlohmann::json;

ScenarioError::ScenarioError(std::string key, const std::string& what)
    : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

std::string to_string(PlantKind k) {
  switch (k) {
    case PlantKind::Arm: return "arm";
    case PlantKind::Fish: return "fish";
    case PlantKind::Cyborg: return "cyborg";
    case PlantKind::Linear: return "linear";
  }
  return "?";
}

std::string to_string(ControllerKind k) {
  switch (k) {
    case ControllerKind::Framework: return "framework";
    case ControllerKind::NoAcbf: return "no-acbf";
    case ControllerKind::Pid: return "pid";
    case ControllerKind::Continuous: return "continuous";
  }
  return "?";
}

ControllerKind controller_from_string(const std::string& name) {
  if (name == "framework") return ControllerKind::Framework;
  if (name == "no-acbf") return ControllerKind::NoAcbf;
  if (name == "pid") return ControllerKind::Pid;
  if (name == "continuous") return ControllerKind::Continuous;
  throw ScenarioError("controller", "unknown controller '" + name + "'");
}

// ------------------------------------------------------------- plant ----

int PlantConfig::state_dim() const {
  switch (kind) {
    case PlantKind::Arm: return plants::ArmPlant::kStateDim;
    case PlantKind::Fish: return plants::FishPlant::kStateDim;
    case PlantKind::Cyborg: return plants::CyborgPlant::kStateDim;
    case PlantKind::Linear: return static_cast<int>(a.rows());
  }
  return 0;
}

int PlantConfig::control_dim() const {
  switch (kind) {
    case PlantKind::Arm: return plants::ArmPlant::kControlDim;
    case PlantKind::Fish: return plants::FishPlant::kControlDim;
    case PlantKind::Cyborg: return plants::CyborgPlant::kControlDim;
    case PlantKind::Linear: return static_cast<int>(b.cols());
  }
  return 0;
}

std::vector<int> PlantConfig::angle_indices() const {
  if (kind == PlantKind::Fish || kind == PlantKind::Cyborg) return {2};
  return {};
}

ControlLimits PlantConfig::limits() const {
  switch (kind) {
    case PlantKind::Arm: return plants::ArmPlant::limits();
    case PlantKind::Fish: {
      plants::FishPlant f;
      f.params = fish;
      return f.limits();
    }
    case PlantKind::Cyborg: return plants::CyborgPlant::limits();
    case PlantKind::Linear: return ControlLimits::symmetric(control_dim(), control_bound);
  }
  return {};
}

// --------------------------------------------------------- reference ----

namespace {

double path_length(const std::vector<Eigen::Vector2d>& pts, bool closed) {
  double len = 0.0;
  const std::size_t n = closed ? pts.size() : pts.size() - 1;
  for (std::size_t s = 0; s < n; ++s) len += (pts[(s + 1) % pts.size()] - pts[s]).norm();
  return len;
}

}  // namespace

double ReferenceConfig::arc_length(double t) const {
  if (ramp_time <= 0.0) return start + speed * t;
  const double T = ramp_time;
  if (t >= T) return start + speed * (T / 2.0 + (t - T));
  const double tau = t / T;
  // Integral of speed * (3 tau^2 - 2 tau^3).
  return start + speed * T * (tau * tau * tau - 0.5 * tau * tau * tau * tau);
}

Vec ReferenceConfig::at(double t) const {
  if (kind == Kind::Point) return value;
  const double total = path_length(points, closed);
  double s = arc_length(t);
  if (closed) {
    s = std::fmod(s, total);
    if (s < 0.0) s += total;
  } else {
    s = std::clamp(s, 0.0, total);
  }
  const std::size_t n = closed ? points.size() : points.size() - 1;
  for (std::size_t k = 0; k < n; ++k) {
    const Eigen::Vector2d& a = points[k];
    const Eigen::Vector2d& b = points[(k + 1) % points.size()];
    const double len = (b - a).norm();
    if (s <= len || k + 1 == n) {
      const double f = len > 0.0 ? std::min(s / len, 1.0) : 0.0;
      return a + f * (b - a);
    }
    s -= len;
  }
  return points.back();
}

// ---------------------------------------------------------- scenario ----

int Scenario::steps() const { return static_cast<int>(std::llround(duration / dt)); }

const BarrierConfig* Scenario::barrier(const std::string& name) const {
  for (const auto& b : barriers) {
    if (b.spec.name == name) return &b;
  }
  return nullptr;
}

void Scenario::validate() const {
  const int n = plant.state_dim(), m = plant.control_dim();
  if (n <= 0 || m <= 0) throw ScenarioError("plant", "plant has no state or control");
  if (plant.kind == PlantKind::Linear && (plant.a.cols() != n || plant.b.rows() != n)) {
    throw ScenarioError("plant.a", "linear plant matrices do not conform");
  }
  if (plant.initial.size() != n) throw ScenarioError("plant.initial", "expected " + std::to_string(n) + " entries");
  if (plant.initial_jitter.size() != n) throw ScenarioError("plant.initial_jitter", "expected " + std::to_string(n) + " entries");
  if (plant.fatigue_cycles < 0) throw ScenarioError("plant.fatigue_cycles", "must be >= 0");
  if (!(dt > 0.0)) throw ScenarioError("dt", "must be positive");
  if (!(duration > 0.0)) throw ScenarioError("duration", "must be positive");
  if (std::abs(duration / dt - std::round(duration / dt)) > 1e-9 * std::max(1.0, duration / dt)) {
    throw ScenarioError("duration", "duration / dt must be an integer step count");
  }
  if (trials < 1) throw ScenarioError("trials", "must be >= 1");

  for (int i : reference.tracked) {
    if (i < 0 || i >= n) throw ScenarioError("reference.tracked", "state index out of range");
  }
  if (reference.tracked.empty()) throw ScenarioError("reference.tracked", "must not be empty");
  const auto nt = static_cast<Eigen::Index>(reference.tracked.size());
  if (reference.kind == ReferenceConfig::Kind::Point && reference.value.size() != nt) {
    throw ScenarioError("reference.value", "must have one entry per tracked index");
  }
  if (reference.kind == ReferenceConfig::Kind::Path) {
    if (nt != 2) throw ScenarioError("reference.tracked", "a path reference tracks exactly two entries");
    if (reference.points.size() < 2) throw ScenarioError("reference.points", "need at least two points");
    if (reference.speed < 0.0 || reference.ramp_time < 0.0) throw ScenarioError("reference.speed", "must be >= 0");
  }

  try {
    planner::TaskSpec t;
    t.tracked = reference.tracked;
    t.tracking_weight = task.tracking_weight;
    t.reference = {Vec::Zero(nt)};
    t.input_weight = task.input_weight;
    t.input_center = task.input_center;
    t.rate_weight = task.rate_weight;
    t.terminal_weight = task.terminal_weight;
    t.validate(n, m);
  } catch (const std::invalid_argument& e) {
    throw ScenarioError("task", e.what());
  }

  std::set<std::string> names;
  for (const auto& b : barriers) {
    const std::string key = "barriers." + b.spec.name;
    if (b.spec.name.empty()) throw ScenarioError("barriers", "every barrier needs a name");
    if (!names.insert(b.spec.name).second) throw ScenarioError(key, "duplicate barrier name");
    for (int i : b.spec.position_indices) {
      if (i >= n) throw ScenarioError(key + ".indices", "state index out of range");
    }
    try {
      b.spec.validate();
    } catch (const std::invalid_argument& e) {
      throw ScenarioError(key, e.what());
    }
    if (b.penalty_weight < 0.0) throw ScenarioError(key + ".penalty_weight", "must be >= 0");
  }

  try {
    planner.sampler.validate(m);
  } catch (const std::invalid_argument& e) {
    throw ScenarioError("planner", e.what());
  }
  if (planner.workers < 1) throw ScenarioError("planner.workers", "must be >= 1");
  if (!(safety.alpha > 0.0)) throw ScenarioError("safety.alpha", "must be positive");
  if (safety.gain < 0.0) throw ScenarioError("safety.gain", "must be >= 0");
  if (safety.theta_max_factor < 0.0) throw ScenarioError("safety.theta_max_factor", "must be >= 0");

  if (data.trajectories < 0 || data.validation_trajectories < 0) throw ScenarioError("data.trajectories", "must be >= 0");
  if (data.steps < 1) throw ScenarioError("data.steps", "must be >= 1");
  if (data.initial_lo.size() != n || data.initial_hi.size() != n) {
    throw ScenarioError("data.initial_lo", "expected " + std::to_string(n) + " entries");
  }
  if (((data.initial_hi - data.initial_lo).array() < 0.0).any()) throw ScenarioError("data.initial_hi", "must be >= initial_lo");
  if (data.stddev.size() != m || data.center.size() != m) throw ScenarioError("data.stddev", "expected " + std::to_string(m) + " entries");
  if (data.correlation < 0.0 || data.correlation >= 1.0) throw ScenarioError("data.correlation", "must lie in [0, 1)");
  try {
    model::Architecture arch = model.arch;
    arch.state_dim = n;
    arch.control_dim = m;
    arch.validate();
  } catch (const std::exception& e) {
    throw ScenarioError("model", e.what());
  }
  if (model.train.epochs < 0 || model.train.batch_size < 1 || model.train.horizon < 1 || model.train.window_stride < 1) {
    throw ScenarioError("model", "epochs, batch_size, horizon and stride must be positive");
  }

  if (controller == ControllerKind::Pid && plant.kind != PlantKind::Fish && plant.kind != PlantKind::Cyborg) {
    throw ScenarioError("controller", "the pid baseline steers heading and needs a fish or cyborg plant");
  }
  if (controller == ControllerKind::Continuous && plant.kind != PlantKind::Cyborg) {
    throw ScenarioError("controller", "continuous stimulation needs a cyborg plant");
  }
  if ((controller == ControllerKind::Pid || controller == ControllerKind::Continuous) &&
      reference.kind != ReferenceConfig::Kind::Path) {
    throw ScenarioError("reference.kind", "heading baselines pursue a path reference");
  }
  if (!metrics.tsf_region.empty()) {
    const auto* b = barrier(metrics.tsf_region);
    if (!b || b->spec.kind != safety::BarrierKind::RegionBoundary) {
      throw ScenarioError("metrics.tsf_region", "no region-boundary barrier named '" + metrics.tsf_region + "'");
    }
  }
  for (const auto& o : metrics.asf_obstacles) {
    const auto* b = barrier(o);
    if (!b || b->spec.kind != safety::BarrierKind::Obstacle) {
      throw ScenarioError("metrics.asf_obstacles", "no obstacle barrier named '" + o + "'");
    }
  }
  if (!metrics.corridor.empty()) {
    const auto* b = barrier(metrics.corridor);
    if (!b || b->spec.kind != safety::BarrierKind::Corridor) {
      throw ScenarioError("metrics.corridor", "no corridor barrier named '" + metrics.corridor + "'");
    }
  }
  if (metrics.near_distance < 0.0) throw ScenarioError("metrics.near_distance", "must be >= 0");
  if (metrics.tracking_threshold < 0.0) throw ScenarioError("metrics.tracking_threshold", "must be >= 0");
}

// ----------------------------------------------------------- parsing ----

namespace {

/// Strict view of one JSON object: every key must be consumed.
class Obj {
 public:
  Obj(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ScenarioError(path_, "expected an object");
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) const { return j_.contains(k); }

  const json& raw(const std::string& k) {
    used_.insert(k);
    return j_.at(k);
  }

  double number(const std::string& k, double def) {
    if (!has(k)) return def;
    const json& v = raw(k);
    if (!v.is_number()) throw ScenarioError(key(k), "expected a number");
    return v.get<double>();
  }
  long long integer(const std::string& k, long long def) {
    if (!has(k)) return def;
    const json& v = raw(k);
    if (!v.is_number_integer()) throw ScenarioError(key(k), "expected an integer");
    return v.get<long long>();
  }
  std::uint64_t u64(const std::string& k, std::uint64_t def) {
    if (!has(k)) return def;
    const json& v = raw(k);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ScenarioError(key(k), "expected a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }
  bool boolean(const std::string& k, bool def) {
    if (!has(k)) return def;
    const json& v = raw(k);
    if (!v.is_boolean()) throw ScenarioError(key(k), "expected true or false");
    return v.get<bool>();
  }
  std::string string(const std::string& k, const std::string& def) {
    if (!has(k)) return def;
    const json& v = raw(k);
    if (!v.is_string()) throw ScenarioError(key(k), "expected a string");
    return v.get<std::string>();
  }
  std::vector<double> doubles(const std::string& k, std::vector<double> def) {
    if (!has(k)) return def;
    const json& v = raw(k);
    if (!v.is_array()) throw ScenarioError(key(k), "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ScenarioError(key(k), "expected an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }
  Vec vec(const std::string& k, const Vec& def) {
    if (!has(k)) return def;
    const auto d = doubles(k, {});
    return Eigen::Map<const Vec>(d.data(), static_cast<Eigen::Index>(d.size()));
  }
  std::vector<int> ints(const std::string& k, std::vector<int> def) {
    if (!has(k)) return def;
    const json& v = raw(k);
    if (!v.is_array()) throw ScenarioError(key(k), "expected an array of integers");
    std::vector<int> out;
    for (const auto& e : v) {
      if (!e.is_number_integer()) throw ScenarioError(key(k), "expected an array of integers");
      out.push_back(e.get<int>());
    }
    return out;
  }
  std::vector<std::string> strings(const std::string& k) {
    if (!has(k)) return {};
    const json& v = raw(k);
    if (!v.is_array()) throw ScenarioError(key(k), "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) throw ScenarioError(key(k), "expected an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }
  std::vector<Eigen::Vector2d> points(const std::string& k) {
    if (!has(k)) return {};
    const json& v = raw(k);
    if (!v.is_array()) throw ScenarioError(key(k), "expected an array of [x, y] pairs");
    std::vector<Eigen::Vector2d> out;
    for (const auto& e : v) {
      if (!e.is_array() || e.size() != 2 || !e[0].is_number() || !e[1].is_number()) {
        throw ScenarioError(key(k), "expected an array of [x, y] pairs");
      }
      out.emplace_back(e[0].get<double>(), e[1].get<double>());
    }
    return out;
  }
  Eigen::MatrixXd matrix(const std::string& k) {
    const json& v = raw(k);
    if (!v.is_array() || v.empty() || !v[0].is_array()) throw ScenarioError(key(k), "expected an array of rows");
    const std::size_t cols = v[0].size();
    Eigen::MatrixXd out(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(cols));
    for (std::size_t r = 0; r < v.size(); ++r) {
      if (!v[r].is_array() || v[r].size() != cols) throw ScenarioError(key(k), "ragged matrix");
      for (std::size_t c = 0; c < cols; ++c) {
        if (!v[r][c].is_number()) throw ScenarioError(key(k), "expected numbers");
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v[r][c].get<double>();
      }
    }
    return out;
  }
  Obj child(const std::string& k) {
    static const json empty = json::object();
    if (!has(k)) return Obj(empty, key(k));
    return Obj(raw(k), key(k));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!used_.count(it.key())) throw ScenarioError(key(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> used_;
};

template <typename Enum>
Enum pick(const std::string& key, const std::string& value, std::initializer_list<std::pair<const char*, Enum>> options) {
  for (const auto& [name, e] : options) {
    if (value == name) return e;
  }
  std::string allowed;
  for (const auto& [name, e] : options) allowed += (allowed.empty() ? "" : ", ") + std::string(name);
  throw ScenarioError(key, "unknown value '" + value + "' (expected one of " + allowed + ")");
}

Vec midpoint(const ControlLimits& l) {
  Vec c = 0.5 * (l.lo + l.hi);
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (!std::isfinite(c[i])) c[i] = 0.0;
  }
  return c;
}

Vec half_range(const ControlLimits& l) {
  Vec r = 0.5 * (l.hi - l.lo);
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (!std::isfinite(r[i])) r[i] = 1.0;
  }
  return r;
}

void parse_plant(Obj o, PlantConfig& p) {
  p.kind = pick<PlantKind>(o.key("kind"), o.string("kind", "linear"),
                           {{"arm", PlantKind::Arm}, {"fish", PlantKind::Fish}, {"cyborg", PlantKind::Cyborg},
                            {"linear", PlantKind::Linear}});
  Obj params = o.child("params");
  switch (p.kind) {
    case PlantKind::Arm: {
      auto& a = p.arm;
      a.reach = params.number("reach", a.reach);
      a.lift = params.number("lift", a.lift);
      a.natural_freq = params.number("natural_freq", a.natural_freq);
      a.damping_ratio = params.number("damping_ratio", a.damping_ratio);
      a.workspace_radius = params.number("workspace_radius", a.workspace_radius);
      a.noise_std = params.number("noise_std", a.noise_std);
      a.fatigue_loss = params.number("fatigue_loss", a.fatigue_loss);
      a.fatigue_saturation = params.number("fatigue_saturation", a.fatigue_saturation);
      break;
    }
    case PlantKind::Fish: {
      auto& f = p.fish;
      f.turn_gain = params.number("turn_gain", f.turn_gain);
      f.bias_limit = params.number("bias_limit", f.bias_limit);
      f.amplitude_min = params.number("amplitude_min", f.amplitude_min);
      f.amplitude_max = params.number("amplitude_max", f.amplitude_max);
      f.frequency = params.number("frequency", f.frequency);
      f.speed_gain = params.number("speed_gain", f.speed_gain);
      f.speed_time_constant = params.number("speed_time_constant", f.speed_time_constant);
      f.heading_noise = params.number("heading_noise", f.heading_noise);
      break;
    }
    case PlantKind::Cyborg: {
      auto& c = p.cyborg;
      c.walking_speed = params.number("walking_speed", c.walking_speed);
      c.kick = params.number("kick", c.kick);
      c.heading_noise = params.number("heading_noise", c.heading_noise);
      c.habituation_scale = params.number("habituation_scale", c.habituation_scale);
      c.turn_bias = params.number("turn_bias", c.turn_bias);
      c.habituation = params.boolean("habituation", c.habituation);
      break;
    }
    case PlantKind::Linear: {
      p.a = params.matrix("a");
      p.b = params.matrix("b");
      p.control_bound = params.number("control_bound", p.control_bound);
      p.noise_std = params.number("noise_std", p.noise_std);
      break;
    }
  }
  params.finish();
  const int n = p.state_dim();
  Vec init = Vec::Zero(n);
  if (p.kind == PlantKind::Fish) init[3] = 0.2;
  p.initial = o.vec("initial", init);
  p.initial_jitter = o.vec("initial_jitter", Vec::Zero(n));
  p.fatigue_cycles = o.integer("fatigue_cycles", 0);
  o.finish();
}

void parse_reference(Obj o, ReferenceConfig& r) {
  r.kind = pick<ReferenceConfig::Kind>(o.key("kind"), o.string("kind", "point"),
                                       {{"point", ReferenceConfig::Kind::Point}, {"path", ReferenceConfig::Kind::Path}});
  r.tracked = o.ints("tracked", {});
  r.value = o.vec("value", Vec::Zero(static_cast<Eigen::Index>(r.tracked.size())));
  r.points = o.points("points");
  r.closed = o.boolean("closed", false);
  r.speed = o.number("speed", 0.0);
  r.ramp_time = o.number("ramp_time", 0.0);
  r.start = o.number("start", 0.0);
  o.finish();
}

BarrierConfig parse_barrier(Obj o) {
  BarrierConfig c;
  auto& s = c.spec;
  s.name = o.string("name", "");
  try {
    s.kind = safety::barrier_kind_from_string(o.string("kind", ""));
  } catch (const std::invalid_argument& e) {
    throw ScenarioError(o.key("kind"), e.what());
  }
  s.position_indices = o.ints("indices", {0, 1});
  const Vec center = o.vec("center", Vec::Zero(static_cast<Eigen::Index>(s.position_indices.size())));
  s.center = center;
  s.radius = o.number("radius", 0.0);
  s.clearance = o.number("clearance", 0.0);
  s.half_width = o.number("half_width", 0.0);
  s.axis_angle = o.number("angle", 0.0);
  s.path = o.points("path");
  s.closed = o.boolean("closed", false);
  s.lo = o.vec("lo", Vec());
  s.hi = o.vec("hi", Vec());
  s.filter = o.boolean("filter", true);
  c.penalty_weight = o.number("penalty_weight", 0.0);
  c.penalty_margin = o.number("penalty_margin", 0.0);
  s.penalty = c.penalty_weight > 0.0;
  o.finish();
  return c;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError("", std::string("malformed JSON: ") + e.what());
  }
  Obj o(root, "");
  Scenario s;
  s.name = o.string("name", "scenario");
  parse_plant(o.child("plant"), s.plant);
  const int n = s.plant.state_dim(), m = s.plant.control_dim();
  const ControlLimits lim = s.plant.limits();

  s.dt = o.number("dt", s.dt);
  s.duration = o.number("duration", s.duration);
  s.controller = controller_from_string(o.string("controller", "framework"));
  s.seed = o.u64("seed", s.seed);
  s.trials = static_cast<int>(o.integer("trials", s.trials));
  parse_reference(o.child("reference"), s.reference);
  const auto nt = static_cast<Eigen::Index>(s.reference.tracked.size());

  {
    Obj t = o.child("task");
    s.task.tracking_weight = t.vec("tracking_weight", Vec::Ones(nt));
    s.task.input_weight = t.number("input_weight", 0.0);
    s.task.input_center = t.vec("input_center", midpoint(lim));
    s.task.rate_weight = t.number("rate_weight", 0.0);
    s.task.terminal_weight = t.vec("terminal_weight", Vec::Zero(nt));
    t.finish();
  }

  if (o.has("barriers")) {
    const json& arr = o.raw("barriers");
    if (!arr.is_array()) throw ScenarioError("barriers", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) s.barriers.push_back(parse_barrier(Obj(arr[i], "barriers[" + std::to_string(i) + "]")));
  }

  {
    Obj p = o.child("planner");
    auto& c = s.planner.sampler;
    c.n = static_cast<int>(p.integer("samples", c.n));
    c.horizon = static_cast<int>(p.integer("horizon", c.horizon));
    c.stddev = p.vec("stddev", 0.3 * half_range(lim));
    c.temperature = p.number("temperature", c.temperature);
    c.nominal = pick<planner::NominalPolicy>(p.key("nominal"), p.string("nominal", "shift"),
                                             {{"shift", planner::NominalPolicy::ShiftPrevious},
                                              {"zero", planner::NominalPolicy::Zero}});
    c.correlation = p.number("correlation", c.correlation);
    c.levels = p.doubles("levels", {});
    const long long w = p.integer("workers", 1);
    if (w < 1) throw ScenarioError("planner.workers", "must be >= 1");
    s.planner.workers = static_cast<std::size_t>(w);
    p.finish();
  }

  {
    Obj f = o.child("safety");
    s.safety.alpha = f.number("alpha", s.safety.alpha);
    s.safety.gain = f.number("gain", s.safety.gain);
    s.safety.theta_max_factor = f.number("theta_max_factor", s.safety.theta_max_factor);
    s.safety.distance = pick<safety::Distance>(f.key("distance"), f.string("distance", "first_derivative"),
                                               {{"first_derivative", safety::Distance::FirstDerivative},
                                                {"trajectory", safety::Distance::Trajectory}});
    f.finish();
  }

  {
    Obj mo = o.child("model");
    auto& a = s.model.arch;
    a.state_dim = n;
    a.control_dim = m;
    a.hidden = mo.ints("hidden", a.hidden);
    a.activation = pick<model::Activation>(mo.key("activation"), mo.string("activation", "tanh"),
                                           {{"tanh", model::Activation::Tanh}, {"identity", model::Activation::Identity}});
    std::vector<int> frozen;
    if (s.plant.kind == PlantKind::Fish || s.plant.kind == PlantKind::Cyborg) frozen = {0, 1};
    a.frozen_inputs = mo.ints("frozen_inputs", frozen);
    auto& t = s.model.train;
    t.epochs = static_cast<int>(mo.integer("epochs", t.epochs));
    t.learning_rate = mo.number("learning_rate", t.learning_rate);
    t.final_lr_fraction = mo.number("final_lr_fraction", t.final_lr_fraction);
    t.batch_size = static_cast<int>(mo.integer("batch_size", t.batch_size));
    t.horizon = static_cast<int>(mo.integer("horizon", t.horizon));
    t.window_stride = static_cast<int>(mo.integer("stride", t.window_stride));
    t.seed = mo.u64("seed", 0);
    t.normalize = mo.boolean("normalize", t.normalize);
    t.weighting = pick<model::LossWeighting>(mo.key("weighting"), mo.string("weighting", "increment"),
                                             {{"increment", model::LossWeighting::Increment},
                                              {"uniform", model::LossWeighting::Uniform}});
    s.model.cache = mo.boolean("cache", true);
    mo.finish();
  }

  {
    Obj d = o.child("data");
    auto& c = s.data;
    c.trajectories = static_cast<int>(d.integer("trajectories", c.trajectories));
    c.validation_trajectories = static_cast<int>(d.integer("validation_trajectories", c.validation_trajectories));
    c.steps = static_cast<int>(d.integer("steps", c.steps));
    c.seed = d.u64("seed", c.seed);
    Vec lo = Vec::Constant(n, -1.0), hi = Vec::Constant(n, 1.0);
    switch (s.plant.kind) {
      case PlantKind::Arm:
        lo << -0.15, -0.15, -0.05, -0.2, -0.2, -0.1;
        hi = -lo;
        break;
      case PlantKind::Fish:
        lo << -1.0, -1.0, -std::numbers::pi, 0.05;
        hi << 1.0, 1.0, std::numbers::pi, 0.4;
        break;
      case PlantKind::Cyborg:
        lo << -0.5, -0.5, -std::numbers::pi;
        hi = -lo;
        break;
      case PlantKind::Linear: break;
    }
    c.initial_lo = d.vec("initial_lo", lo);
    c.initial_hi = d.vec("initial_hi", hi);
    c.stddev = d.vec("stddev", 0.5 * half_range(lim));
    c.center = d.vec("center", midpoint(lim));
    c.correlation = d.number("correlation", c.correlation);
    c.levels = d.doubles("levels", s.planner.sampler.levels);
    d.finish();
  }

  {
    Obj p = o.child("pid");
    s.pid.gains.kp = p.number("kp", s.pid.gains.kp);
    s.pid.gains.ki = p.number("ki", s.pid.gains.ki);
    s.pid.gains.kd = p.number("kd", s.pid.gains.kd);
    s.pid.amplitude = p.number("amplitude", s.pid.amplitude);
    s.pid.lookahead = p.number("lookahead", s.pid.lookahead);
    s.pid.threshold = p.number("threshold", s.pid.threshold);
    p.finish();
  }
  {
    Obj c = o.child("continuous");
    s.continuous.threshold = c.number("threshold", s.continuous.threshold);
    s.continuous.lookahead = c.number("lookahead", s.continuous.lookahead);
    c.finish();
  }
  {
    Obj mt = o.child("metrics");
    s.metrics.tsf_region = mt.string("tsf_region", "");
    s.metrics.tsf_scale = mt.number("tsf_scale", 1.0);
    s.metrics.asf_obstacles = mt.strings("asf_obstacles");
    s.metrics.corridor = mt.string("corridor", "");
    s.metrics.near_distance = mt.number("near_distance", 0.0);
    s.metrics.tracking_threshold = mt.number("tracking_threshold", 0.0);
    mt.finish();
  }
  o.finish();
  s.validate();
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open scenario file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

namespace {

json to_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json to_json(const std::vector<Eigen::Vector2d>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p.x(), p.y()});
  return a;
}

json to_json(const Eigen::MatrixXd& m) {
  json a = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    a.push_back(row);
  }
  return a;
}

}  // namespace

std::string dump_scenario(const Scenario& s) {
  json j;
  j["name"] = s.name;
  json plant;
  plant["kind"] = to_string(s.plant.kind);
  json params = json::object();
  switch (s.plant.kind) {
    case PlantKind::Arm: {
      const auto& a = s.plant.arm;
      params = {{"reach", a.reach}, {"lift", a.lift}, {"natural_freq", a.natural_freq},
                {"damping_ratio", a.damping_ratio}, {"workspace_radius", a.workspace_radius},
                {"noise_std", a.noise_std}, {"fatigue_loss", a.fatigue_loss},
                {"fatigue_saturation", a.fatigue_saturation}};
      break;
    }
    case PlantKind::Fish: {
      const auto& f = s.plant.fish;
      params = {{"turn_gain", f.turn_gain}, {"bias_limit", f.bias_limit}, {"amplitude_min", f.amplitude_min},
                {"amplitude_max", f.amplitude_max}, {"frequency", f.frequency}, {"speed_gain", f.speed_gain},
                {"speed_time_constant", f.speed_time_constant}, {"heading_noise", f.heading_noise}};
      break;
    }
    case PlantKind::Cyborg: {
      const auto& c = s.plant.cyborg;
      params = {{"walking_speed", c.walking_speed}, {"kick", c.kick}, {"heading_noise", c.heading_noise},
                {"habituation_scale", c.habituation_scale}, {"turn_bias", c.turn_bias},
                {"habituation", c.habituation}};
      break;
    }
    case PlantKind::Linear:
      params = {{"a", to_json(s.plant.a)}, {"b", to_json(s.plant.b)}, {"control_bound", s.plant.control_bound},
                {"noise_std", s.plant.noise_std}};
      break;
  }
  plant["params"] = params;
  plant["initial"] = to_json(s.plant.initial);
  plant["initial_jitter"] = to_json(s.plant.initial_jitter);
  plant["fatigue_cycles"] = s.plant.fatigue_cycles;
  j["plant"] = plant;
  j["dt"] = s.dt;
  j["duration"] = s.duration;
  j["controller"] = to_string(s.controller);
  j["seed"] = s.seed;
  j["trials"] = s.trials;

  const auto& r = s.reference;
  j["reference"] = {{"kind", r.kind == ReferenceConfig::Kind::Point ? "point" : "path"},
                    {"tracked", r.tracked},
                    {"value", to_json(r.value)},
                    {"points", to_json(r.points)},
                    {"closed", r.closed},
                    {"speed", r.speed},
                    {"ramp_time", r.ramp_time},
                    {"start", r.start}};
  j["task"] = {{"tracking_weight", to_json(s.task.tracking_weight)},
               {"input_weight", s.task.input_weight},
               {"input_center", to_json(s.task.input_center)},
               {"rate_weight", s.task.rate_weight},
               {"terminal_weight", to_json(s.task.terminal_weight)}};

  json bars = json::array();
  for (const auto& b : s.barriers) {
    const auto& sp = b.spec;
    bars.push_back({{"name", sp.name},
                    {"kind", safety::to_string(sp.kind)},
                    {"indices", sp.position_indices},
                    {"center", to_json(sp.center)},
                    {"radius", sp.radius},
                    {"clearance", sp.clearance},
                    {"half_width", sp.half_width},
                    {"angle", sp.axis_angle},
                    {"path", to_json(sp.path)},
                    {"closed", sp.closed},
                    {"lo", to_json(sp.lo)},
                    {"hi", to_json(sp.hi)},
                    {"filter", sp.filter},
                    {"penalty_weight", b.penalty_weight},
                    {"penalty_margin", b.penalty_margin}});
  }
  j["barriers"] = bars;

  const auto& c = s.planner.sampler;
  j["planner"] = {{"samples", c.n},
                  {"horizon", c.horizon},
                  {"stddev", to_json(c.stddev)},
                  {"temperature", c.temperature},
                  {"nominal", c.nominal == planner::NominalPolicy::Zero ? "zero" : "shift"},
                  {"correlation", c.correlation},
                  {"levels", c.levels},
                  {"workers", s.planner.workers}};
  j["safety"] = {{"alpha", s.safety.alpha},
                 {"gain", s.safety.gain},
                 {"theta_max_factor", s.safety.theta_max_factor},
                 {"distance", s.safety.distance == safety::Distance::Trajectory ? "trajectory" : "first_derivative"}};
  const auto& t = s.model.train;
  j["model"] = {{"hidden", s.model.arch.hidden},
                {"activation", model::to_string(s.model.arch.activation)},
                {"frozen_inputs", s.model.arch.frozen_inputs},
                {"epochs", t.epochs},
                {"learning_rate", t.learning_rate},
                {"final_lr_fraction", t.final_lr_fraction},
                {"batch_size", t.batch_size},
                {"horizon", t.horizon},
                {"stride", t.window_stride},
                {"seed", t.seed},
                {"normalize", t.normalize},
                {"weighting", t.weighting == model::LossWeighting::Uniform ? "uniform" : "increment"},
                {"cache", s.model.cache}};
  const auto& d = s.data;
  j["data"] = {{"trajectories", d.trajectories},
               {"validation_trajectories", d.validation_trajectories},
               {"steps", d.steps},
               {"seed", d.seed},
               {"initial_lo", to_json(d.initial_lo)},
               {"initial_hi", to_json(d.initial_hi)},
               {"stddev", to_json(d.stddev)},
               {"center", to_json(d.center)},
               {"correlation", d.correlation},
               {"levels", d.levels}};
  j["pid"] = {{"kp", s.pid.gains.kp},
              {"ki", s.pid.gains.ki},
              {"kd", s.pid.gains.kd},
              {"amplitude", s.pid.amplitude},
              {"lookahead", s.pid.lookahead},
              {"threshold", s.pid.threshold}};
  j["continuous"] = {{"threshold", s.continuous.threshold}, {"lookahead", s.continuous.lookahead}};
  j["metrics"] = {{"tsf_region", s.metrics.tsf_region},
                  {"tsf_scale", s.metrics.tsf_scale},
                  {"asf_obstacles", s.metrics.asf_obstacles},
                  {"corridor", s.metrics.corridor},
                  {"near_distance", s.metrics.near_distance},
                  {"tracking_threshold", s.metrics.tracking_threshold}};
  return j.dump(2) + "\n";
}

}  // namespace softctl::harness
