#include "softctl/harness/sim.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "softctl/harness/metrics.hpp"

namespace softctl::harness {

using json = nlohmann::json;

SimPlant::SimPlant(const PlantConfig& c, const Vec& x0, bool wear)
    : kind_(c.kind), limits_(c.limits()), angles_(c.angle_indices()) {
  if (x0.size() != c.state_dim()) throw std::invalid_argument("SimPlant: initial state has the wrong size");
  switch (c.kind) {
    case PlantKind::Arm: {
      plants::ArmPlant p;
      p.params = c.arm;
      p.position = x0.head<3>();
      p.velocity = x0.segment<3>(3);
      if (wear && c.fatigue_cycles > 0) p = plants::apply_fatigue(p, c.fatigue_cycles);
      plant_ = p;
      break;
    }
    case PlantKind::Fish: {
      plants::FishPlant p;
      p.params = c.fish;
      p.x = x0[0];
      p.y = x0[1];
      p.heading = x0[2];
      p.speed = std::max(0.0, x0[3]);
      // Start with the amplitude that sustains the initial speed.
      p.amplitude = std::clamp(p.speed / (c.fish.speed_gain * c.fish.frequency), c.fish.amplitude_min,
                               c.fish.amplitude_max);
      plant_ = p;
      break;
    }
    case PlantKind::Cyborg: {
      plants::CyborgPlant p;
      p.params = c.cyborg;
      p.x = x0[0];
      p.y = x0[1];
      p.heading = x0[2];
      plant_ = p;
      break;
    }
    case PlantKind::Linear: {
      plants::LinearPlant p;
      p.a = c.a;
      p.b = c.b;
      p.x = x0;
      p.control_limits = limits_;
      p.noise_std = c.noise_std;
      plant_ = p;
      break;
    }
  }
}

StateVector SimPlant::state() const {
  return std::visit([](const auto& p) { return p.state(); }, plant_);
}

StateVector SimPlant::observe() const {
  Vec x = state().values();
  for (int i : angles_) x[i] = wrap_angle(x[i]);
  return StateVector(std::move(x));
}

long long SimPlant::stimulations() const {
  if (const auto* c = std::get_if<plants::CyborgPlant>(&plant_)) return c->stimulations;
  return 0;
}

Vec SimPlant::step(const ControlVector& u, double dt, RngStream& rng) {
  const Vec uc = limits_.clamp(u.values());
  switch (kind_) {
    case PlantKind::Arm:
      plant_ = plants::arm_step(std::get<plants::ArmPlant>(plant_), ControlVector(uc), dt, rng);
      return uc;
    case PlantKind::Fish:
      plant_ = plants::fish_step(std::get<plants::FishPlant>(plant_), ControlVector(uc), dt, rng);
      return uc;
    case PlantKind::Cyborg: {
      const auto s = plants::stimulus_from_control(uc[0]);
      plant_ = plants::cyborg_step(std::get<plants::CyborgPlant>(plant_), s, dt, rng);
      Vec e(1);
      e[0] = s == plants::Stimulus::Left ? 1.0 : s == plants::Stimulus::Right ? -1.0 : 0.0;
      return e;
    }
    case PlantKind::Linear:
      plant_ = plants::linear_step(std::get<plants::LinearPlant>(plant_), ControlVector(uc), dt, rng);
      return uc;
  }
  return uc;
}

namespace {

double snap(double v, const std::vector<double>& levels) {
  double best = levels.front();
  for (double l : levels) {
    if (std::abs(l - v) < std::abs(best - v)) best = l;
  }
  return best;
}

Trajectory excite(const Scenario& s, RngStream rng) {
  const auto& d = s.data;
  const int n = s.plant.state_dim(), m = s.plant.control_dim();
  Vec x0(n);
  for (int i = 0; i < n; ++i) x0[i] = rng.uniform(d.initial_lo[i], d.initial_hi[i]);
  SimPlant plant(s.plant, x0, false);
  const ControlLimits lim = plant.limits();
  const double rho = d.correlation;
  const double innov = std::sqrt(1.0 - rho * rho);
  Vec e(m);
  for (int j = 0; j < m; ++j) e[j] = d.stddev[j] * rng.normal();

  Trajectory t;
  t.dt = s.dt;
  t.states.push_back(plant.state());
  for (int k = 0; k < d.steps; ++k) {
    Vec u = lim.clamp(d.center + e);
    if (!d.levels.empty()) {
      for (int j = 0; j < m; ++j) u[j] = snap(u[j], d.levels);
    }
    const Vec done = plant.step(ControlVector(u, lim), s.dt, rng);
    t.controls.emplace_back(done);
    t.states.push_back(plant.state());
    for (int j = 0; j < m; ++j) e[j] = rho * e[j] + innov * d.stddev[j] * rng.normal();
  }
  return t;
}

}  // namespace

model::Dataset collect_dataset(const Scenario& s) {
  model::Dataset data;
  const RngStream root(s.data.seed);
  const int total = s.data.trajectories + s.data.validation_trajectories;
  for (int i = 0; i < total; ++i) {
    auto t = excite(s, root.child(static_cast<std::uint64_t>(i)));
    (i < s.data.trajectories ? data.train : data.validation).push_back(std::move(t));
  }
  return data;
}

std::string encode_dataset(const Scenario& s, const model::Dataset& data) {
  std::ostringstream out;
  json header = {{"format", "softctl-dataset"},
                 {"version", 1},
                 {"plant", to_string(s.plant.kind)},
                 {"dt", s.dt},
                 {"state_dim", s.plant.state_dim()},
                 {"control_dim", s.plant.control_dim()},
                 {"train", data.train.size()},
                 {"validation", data.validation.size()}};
  out << header.dump() << "\n";
  const auto emit = [&](const std::vector<Trajectory>& set, const char* split, std::size_t offset) {
    for (std::size_t i = 0; i < set.size(); ++i) {
      const auto& t = set[i];
      for (std::size_t k = 0; k < t.states.size(); ++k) {
        const Vec& x = t.states[k].values();
        json r = {{"traj", offset + i}, {"split", split}, {"k", k}, {"x", std::vector<double>(x.data(), x.data() + x.size())}};
        if (k < t.controls.size()) {
          const Vec& u = t.controls[k].values();
          r["u"] = std::vector<double>(u.data(), u.data() + u.size());
        } else {
          r["u"] = nullptr;
        }
        out << r.dump() << "\n";
      }
    }
  };
  emit(data.train, "train", 0);
  emit(data.validation, "validation", data.train.size());
  return out.str();
}

void write_dataset(const std::string& path, const Scenario& s, const model::Dataset& data) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::ios_base::failure("cannot write dataset '" + path + "'");
    out << encode_dataset(s, data);
    if (!out) throw std::ios_base::failure("cannot write dataset '" + path + "'");
  }
  std::filesystem::rename(tmp, path);
}

model::Dataset read_dataset(const std::string& path, double* dt_out) {
  std::ifstream in(path);
  if (!in) throw std::ios_base::failure("cannot open dataset '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("dataset '" + path + "' is empty");
  model::Dataset data;
  try {
    const json header = json::parse(line);
    if (header.value("format", "") != "softctl-dataset") throw std::runtime_error("not a softctl dataset");
    const double dt = header.at("dt").get<double>();
    if (dt_out) *dt_out = dt;
    const std::size_t ntrain = header.at("train").get<std::size_t>();
    const std::size_t nval = header.at("validation").get<std::size_t>();
    std::vector<Trajectory> all(ntrain + nval);
    for (auto& t : all) t.dt = dt;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json r = json::parse(line);
      const auto i = r.at("traj").get<std::size_t>();
      if (i >= all.size()) throw std::runtime_error("trajectory index out of range");
      auto& t = all[i];
      if (r.at("k").get<std::size_t>() != t.states.size()) throw std::runtime_error("records out of order");
      const auto x = r.at("x").get<std::vector<double>>();
      t.states.emplace_back(Eigen::Map<const Vec>(x.data(), static_cast<Eigen::Index>(x.size())));
      if (!r.at("u").is_null()) {
        const auto u = r.at("u").get<std::vector<double>>();
        t.controls.emplace_back(Vec(Eigen::Map<const Vec>(u.data(), static_cast<Eigen::Index>(u.size()))));
      }
    }
    for (std::size_t i = 0; i < all.size(); ++i) {
      all[i].validate();
      (i < ntrain ? data.train : data.validation).push_back(std::move(all[i]));
    }
  } catch (const json::exception& e) {
    throw std::runtime_error("dataset '" + path + "': " + e.what());
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error("dataset '" + path + "': " + e.what());
  }
  return data;
}

}  // namespace softctl::harness
