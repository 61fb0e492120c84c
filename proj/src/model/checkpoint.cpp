#include "softctl/model/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace softctl::model {

namespace {

using nlohmann::json;

json vec_json(const Vec& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

Vec json_vec(const json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  const ModelParams& p = ckpt.params;
  json j;
  j["format"] = "softctl-model";
  j["version"] = 1;
  j["state_dim"] = p.arch.state_dim;
  j["control_dim"] = p.arch.control_dim;
  j["hidden"] = p.arch.hidden;
  j["activation"] = to_string(p.arch.activation);
  j["frozen_inputs"] = p.arch.frozen_inputs;
  j["dt"] = ckpt.dt;
  j["input_shift"] = vec_json(p.input_shift);
  j["input_scale"] = vec_json(p.input_scale);
  j["output_scale"] = vec_json(p.output_scale);
  json layers = json::array();
  for (const auto& l : p.layers) {
    json lj;
    lj["rows"] = l.weight.rows();
    lj["cols"] = l.weight.cols();
    lj["weight"] = std::vector<double>(l.weight.data(), l.weight.data() + l.weight.size());
    lj["bias"] = vec_json(l.bias);
    layers.push_back(lj);
  }
  j["layers"] = layers;
  const ErrorBound& eb = ckpt.bound;
  j["error_bound"] = {{"epsilon_bar", eb.epsilon_bar},
                      {"raw_max", eb.raw_max},
                      {"samples", eb.samples},
                      {"state_lo", vec_json(eb.state_lo)},
                      {"state_hi", vec_json(eb.state_hi)},
                      {"control_lo", vec_json(eb.control_lo)},
                      {"control_hi", vec_json(eb.control_hi)}};
  return j.dump(1) + "\n";
}

Checkpoint decode_checkpoint(const std::string& text) {
  Checkpoint c;
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != "softctl-model") throw CheckpointError("not a model checkpoint");
    Architecture arch;
    arch.state_dim = j.at("state_dim").get<int>();
    arch.control_dim = j.at("control_dim").get<int>();
    arch.hidden = j.at("hidden").get<std::vector<int>>();
    arch.activation = activation_from_string(j.at("activation").get<std::string>());
    arch.frozen_inputs = j.at("frozen_inputs").get<std::vector<int>>();
    c.params = ModelParams::zeros(arch);
    c.dt = j.at("dt").get<double>();
    c.params.input_shift = json_vec(j.at("input_shift"));
    c.params.input_scale = json_vec(j.at("input_scale"));
    c.params.output_scale = json_vec(j.at("output_scale"));
    const auto& layers = j.at("layers");
    if (layers.size() != c.params.layers.size()) throw CheckpointError("layer count does not match architecture");
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto rows = layers[l].at("rows").get<Eigen::Index>();
      const auto cols = layers[l].at("cols").get<Eigen::Index>();
      const auto w = layers[l].at("weight").get<std::vector<double>>();
      if (static_cast<Eigen::Index>(w.size()) != rows * cols) throw CheckpointError("weight size mismatch");
      c.params.layers[l].weight = Eigen::Map<const Eigen::MatrixXd>(w.data(), rows, cols);
      c.params.layers[l].bias = json_vec(layers[l].at("bias"));
    }
    const auto& eb = j.at("error_bound");
    c.bound.epsilon_bar = eb.at("epsilon_bar").get<double>();
    c.bound.raw_max = eb.at("raw_max").get<double>();
    c.bound.samples = eb.at("samples").get<std::size_t>();
    c.bound.state_lo = json_vec(eb.at("state_lo"));
    c.bound.state_hi = json_vec(eb.at("state_hi"));
    c.bound.control_lo = json_vec(eb.at("control_lo"));
    c.bound.control_hi = json_vec(eb.at("control_hi"));
    c.params.validate();
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ModelShapeError& e) {
    throw CheckpointError(std::string("invalid checkpoint: ") + e.what());
  }
  if (!(c.dt > 0.0) || c.bound.epsilon_bar < 0.0) throw CheckpointError("invalid checkpoint: bad dt or error bound");
  return c;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint '" + path + "'");
    out << encode_checkpoint(ckpt);
    if (!out.flush()) throw CheckpointError("cannot write checkpoint '" + path + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw CheckpointError("cannot write checkpoint '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path, std::optional<int> state_dim, std::optional<int> control_dim) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  Checkpoint c = decode_checkpoint(ss.str());
  if ((state_dim && *state_dim != c.params.arch.state_dim) ||
      (control_dim && *control_dim != c.params.arch.control_dim)) {
    throw CheckpointError("checkpoint '" + path + "' has state/control dims " +
                          std::to_string(c.params.arch.state_dim) + "/" + std::to_string(c.params.arch.control_dim) +
                          ", expected " + std::to_string(state_dim.value_or(c.params.arch.state_dim)) + "/" +
                          std::to_string(control_dim.value_or(c.params.arch.control_dim)));
  }
  return c;
}

}  // namespace softctl::model
