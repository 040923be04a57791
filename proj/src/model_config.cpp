#include "dynonet/model_config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <queue>
#include <set>

namespace dynonet::config {

using nlohmann::json;

namespace {

constexpr const char* kTargetName = "y";

const std::map<std::string, BlockKind>& kind_table() {
  static const std::map<std::string, BlockKind> table{
      {"gblock", BlockKind::GBlock},         {"fir", BlockKind::Fir},   {"affine", BlockKind::Affine},
      {"ffn", BlockKind::Ffn},               {"mlp", BlockKind::Ffn},   {"tanh", BlockKind::Tanh},
      {"integrator", BlockKind::Integrator}, {"add", BlockKind::Add},   {"concat", BlockKind::Concat},
  };
  return table;
}

template <class T>
T get_field(const json& j, const std::string& key, const std::string& path, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "." + key, "has the wrong type");
  }
}

template <class T>
T require_field(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) throw ConfigError(path + "." + key, "is required");
  return get_field<T>(j, key, path, T{});
}

std::size_t get_count(const json& j, const std::string& key, const std::string& path, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(path + "." + key, "must be a non-negative integer");
  }
  return v.get<std::size_t>();
}

void require_object(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "must be a JSON object");
}

void reject_unknown_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw ConfigError(path.empty() ? key : path + "." + key, "unknown field");
    }
  }
}

}  // namespace

const char* to_string(BlockKind kind) {
  switch (kind) {
    case BlockKind::GBlock: return "gblock";
    case BlockKind::Fir: return "fir";
    case BlockKind::Affine: return "affine";
    case BlockKind::Ffn: return "ffn";
    case BlockKind::Tanh: return "tanh";
    case BlockKind::Integrator: return "integrator";
    case BlockKind::Add: return "add";
    case BlockKind::Concat: return "concat";
  }
  return "?";
}

ModelConfig parse_model_config(const json& j) {
  require_object(j, "model");
  reject_unknown_keys(j, "", {"input", "input_channels", "output", "blocks", "connections"});
  ModelConfig cfg;
  cfg.input = get_field<std::string>(j, "input", "model", "u");
  cfg.input_channels = get_count(j, "input_channels", "model", 1);
  cfg.output = require_field<std::string>(j, "output", "model");
  if (!j.contains("blocks") || !j.at("blocks").is_array()) throw ConfigError("blocks", "must be an array");
  const auto& blocks = j.at("blocks");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const std::string path = "blocks[" + std::to_string(i) + "]";
    const auto& b = blocks[i];
    require_object(b, path);
    reject_unknown_keys(b, path, {"name", "kind", "in_channels", "out_channels", "n_a", "n_b", "hidden_units",
                                  "parametrization", "trainable"});
    BlockConfig bc;
    bc.name = require_field<std::string>(b, "name", path);
    const auto kind = require_field<std::string>(b, "kind", path);
    const auto it = kind_table().find(kind);
    if (it == kind_table().end()) throw ConfigError(path + ".kind", "unknown block kind '" + kind + "'");
    bc.kind = it->second;
    bc.in_channels = get_count(b, "in_channels", path, 1);
    bc.out_channels = get_count(b, "out_channels", path, bc.in_channels);
    bc.n_a = get_count(b, "n_a", path, 0);
    bc.n_b = get_count(b, "n_b", path, 0);
    bc.hidden_units = get_count(b, "hidden_units", path, 20);
    const auto par = get_field<std::string>(b, "parametrization", path, "raw");
    try {
      bc.parametrization = stability::parse_parametrization(par);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(path + ".parametrization", e.what());
    }
    bc.trainable = get_field<bool>(b, "trainable", path, true);
    cfg.blocks.push_back(std::move(bc));
  }
  if (!j.contains("connections") || !j.at("connections").is_array()) {
    throw ConfigError("connections", "must be an array");
  }
  const auto& conns = j.at("connections");
  for (std::size_t i = 0; i < conns.size(); ++i) {
    const auto& c = conns[i];
    const std::string path = "connections[" + std::to_string(i) + "]";
    if (!c.is_array() || c.size() != 2 || !c[0].is_string() || !c[1].is_string()) {
      throw ConfigError(path, "must be a pair [from, to] of names");
    }
    cfg.connections.emplace_back(c[0].get<std::string>(), c[1].get<std::string>());
  }
  cfg.validate();
  return cfg;
}

json to_json(const ModelConfig& cfg) {
  json j;
  j["input"] = cfg.input;
  j["input_channels"] = cfg.input_channels;
  j["output"] = cfg.output;
  j["blocks"] = json::array();
  for (const auto& b : cfg.blocks) {
    json jb{{"name", b.name},
            {"kind", to_string(b.kind)},
            {"in_channels", b.in_channels},
            {"out_channels", b.out_channels},
            {"trainable", b.trainable}};
    if (b.kind == BlockKind::GBlock || b.kind == BlockKind::Fir) jb["n_b"] = b.n_b;
    if (b.kind == BlockKind::GBlock) {
      jb["n_a"] = b.n_a;
      jb["parametrization"] = stability::to_string(b.parametrization);
    }
    if (b.kind == BlockKind::Ffn) jb["hidden_units"] = b.hidden_units;
    j["blocks"].push_back(std::move(jb));
  }
  j["connections"] = json::array();
  for (const auto& [from, to] : cfg.connections) j["connections"].push_back({from, to});
  return j;
}

ModelConfig load_model_config(const std::filesystem::path& path) { return parse_model_config(read_json(path)); }

namespace {

std::map<std::string, std::size_t> block_index(const ModelConfig& cfg) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) index.emplace(cfg.blocks[i].name, i);
  return index;
}

std::vector<std::vector<std::string>> sources_per_block(const ModelConfig& cfg) {
  const auto index = block_index(cfg);
  std::vector<std::vector<std::string>> sources(cfg.blocks.size());
  for (const auto& [from, to] : cfg.connections) sources[index.at(to)].push_back(from);
  return sources;
}

}  // namespace

void ModelConfig::validate() const {
  if (input.empty()) throw ConfigError("input", "must not be empty");
  if (input_channels == 0) throw ConfigError("input_channels", "must be positive");
  if (input == kTargetName) throw ConfigError("input", "the name 'y' is reserved for the target signal");
  if (blocks.empty()) throw ConfigError("blocks", "at least one block is required");

  std::set<std::string> names{input};
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    const std::string path = "blocks[" + std::to_string(i) + "]";
    if (b.name.empty()) throw ConfigError(path + ".name", "must not be empty");
    if (b.name.find('.') != std::string::npos) throw ConfigError(path + ".name", "must not contain '.'");
    if (b.name == kTargetName) throw ConfigError(path + ".name", "the name 'y' is reserved for the target signal");
    if (!names.insert(b.name).second) throw ConfigError(path + ".name", "duplicate name '" + b.name + "'");
    if (b.in_channels == 0) throw ConfigError(path + ".in_channels", "must be positive");
    if (b.out_channels == 0) throw ConfigError(path + ".out_channels", "must be positive");
    switch (b.kind) {
      case BlockKind::GBlock:
        if (b.parametrization != stability::Parametrization::Raw && b.n_a != 2) {
          throw ConfigError(path + ".n_a", std::string("must be 2 for parametrization '") +
                                               stability::to_string(b.parametrization) + "'");
        }
        break;
      case BlockKind::Fir:
        if (b.n_a != 0) throw ConfigError(path + ".n_a", "an FIR block has no denominator");
        break;
      case BlockKind::Ffn:
        if (b.hidden_units == 0) throw ConfigError(path + ".hidden_units", "must be positive");
        break;
      case BlockKind::Tanh:
      case BlockKind::Integrator:
      case BlockKind::Add:
        if (b.in_channels != b.out_channels) {
          throw ConfigError(path + ".out_channels", std::string(to_string(b.kind)) + " block must keep the channel count");
        }
        break;
      case BlockKind::Affine:
      case BlockKind::Concat:
        break;
    }
  }
  if (output.empty()) throw ConfigError("output", "is required");
  const auto index = block_index(*this);
  if (!index.contains(output)) throw ConfigError("output", "unknown block '" + output + "'");

  std::vector<std::size_t> fan_in_count(blocks.size(), 0);
  for (std::size_t i = 0; i < connections.size(); ++i) {
    const auto& [from, to] = connections[i];
    const std::string path = "connections[" + std::to_string(i) + "]";
    if (!names.contains(from)) throw ConfigError(path, "unknown source '" + from + "'");
    if (to == input) throw ConfigError(path, "the model input '" + input + "' cannot be a destination");
    if (!index.contains(to)) throw ConfigError(path, "unknown destination '" + to + "'");
    ++fan_in_count[index.at(to)];
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    const std::string path = "blocks[" + std::to_string(i) + "]";
    const bool multi = b.kind == BlockKind::Add || b.kind == BlockKind::Concat;
    if (fan_in_count[i] == 0) throw ConfigError(path, "block '" + b.name + "' has no input connection");
    if (!multi && fan_in_count[i] != 1) {
      throw ConfigError(path, "block '" + b.name + "' of kind " + to_string(b.kind) + " accepts exactly one input, got " +
                                  std::to_string(fan_in_count[i]));
    }
  }

  topological_order();

  const auto sources = sources_per_block(*this);
  auto channels_of = [&](const std::string& name) {
    return name == input ? input_channels : blocks[index.at(name)].out_channels;
  };
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    const std::string path = "blocks[" + std::to_string(i) + "]";
    if (b.kind == BlockKind::Concat) {
      std::size_t total = 0;
      for (const auto& s : sources[i]) total += channels_of(s);
      if (total != b.out_channels) {
        throw ConfigError(path + ".out_channels", "concat of " + std::to_string(total) + " channels declared as " +
                                                      std::to_string(b.out_channels));
      }
      continue;
    }
    for (const auto& s : sources[i]) {
      if (channels_of(s) != b.in_channels) {
        throw ConfigError(path + ".in_channels", "block '" + b.name + "' expects " + std::to_string(b.in_channels) +
                                                     " channels but '" + s + "' provides " +
                                                     std::to_string(channels_of(s)));
      }
    }
  }
}

std::vector<std::size_t> ModelConfig::topological_order() const {
  const auto index = block_index(*this);
  std::vector<std::size_t> indegree(blocks.size(), 0);
  std::vector<std::vector<std::size_t>> successors(blocks.size());
  for (const auto& [from, to] : connections) {
    const auto dst = index.find(to);
    if (dst == index.end()) continue;
    const auto src = index.find(from);
    if (src == index.end()) continue;
    successors[src->second].push_back(dst->second);
    ++indegree[dst->second];
  }
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (indegree[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> order;
  while (!ready.empty()) {
    const std::size_t i = ready.top();
    ready.pop();
    order.push_back(i);
    for (std::size_t s : successors[i]) {
      if (--indegree[s] == 0) ready.push(s);
    }
  }
  if (order.size() != blocks.size()) {
    std::string members;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      if (indegree[i] > 0) members += (members.empty() ? "" : ", ") + blocks[i].name;
    }
    throw ConfigError("connections", "cycle through blocks " + members);
  }
  return order;
}

train::Model build_model(const ModelConfig& cfg) {
  cfg.validate();
  ad::Graph g;
  std::map<std::string, ad::NodeId> nodes;
  const ad::NodeId input = g.input(cfg.input, cfg.input_channels);
  nodes[cfg.input] = input;
  const auto sources = sources_per_block(cfg);

  for (std::size_t i : cfg.topological_order()) {
    const auto& b = cfg.blocks[i];
    std::vector<ad::NodeId> in;
    for (const auto& s : sources[i]) in.push_back(nodes.at(s));
    const std::string& n = b.name;
    auto param = [&](const std::string& field, std::size_t size, ad::ParamRole role) {
      return g.parameter(n + "." + field, std::vector<double>(size, 0.0), role, b.trainable);
    };
    ad::NodeId out = 0;
    switch (b.kind) {
      case BlockKind::GBlock: {
        const ad::LtiShape shape{b.in_channels, b.out_channels, b.n_b, b.n_a};
        const auto num = param("b", shape.b_size(), ad::ParamRole::DynamicCoefficient);
        std::optional<ad::NodeId> den;
        switch (b.parametrization) {
          case stability::Parametrization::Raw:
            if (b.n_a > 0) den = param("a", shape.a_size(), ad::ParamRole::DynamicCoefficient);
            break;
          case stability::Parametrization::Conj:
            den = stability::conj_denominator(g, param("rho", shape.entries(), ad::ParamRole::DynamicCoefficient),
                                              param("psi", shape.entries(), ad::ParamRole::DynamicCoefficient));
            break;
          case stability::Parametrization::Full:
            den = stability::full_denominator(g, param("alpha1", shape.entries(), ad::ParamRole::DynamicCoefficient),
                                              param("alpha2", shape.entries(), ad::ParamRole::DynamicCoefficient));
            break;
        }
        out = g.gblock(in[0], num, den, shape, n);
        break;
      }
      case BlockKind::Fir: {
        const ad::LtiShape shape{b.in_channels, b.out_channels, b.n_b, 0};
        out = g.fir(in[0], param("b", shape.b_size(), ad::ParamRole::DynamicCoefficient), shape, n);
        break;
      }
      case BlockKind::Affine:
        out = g.affine(in[0], param("W", b.in_channels * b.out_channels, ad::ParamRole::StaticWeight),
                       param("bias", b.out_channels, ad::ParamRole::StaticBias), n);
        break;
      case BlockKind::Ffn: {
        const auto hidden = g.affine(in[0], param("W1", b.in_channels * b.hidden_units, ad::ParamRole::StaticWeight),
                                     param("b1", b.hidden_units, ad::ParamRole::StaticBias));
        out = g.affine(g.tanh(hidden), param("W2", b.hidden_units * b.out_channels, ad::ParamRole::StaticWeight),
                       param("b2", b.out_channels, ad::ParamRole::StaticBias), n);
        break;
      }
      case BlockKind::Tanh:
        out = g.tanh(in[0]);
        break;
      case BlockKind::Integrator:
        out = g.integrator(in[0], n);
        break;
      case BlockKind::Add:
        out = in.size() == 1 ? in[0] : g.add(in, n);
        break;
      case BlockKind::Concat:
        out = in.size() == 1 ? in[0] : g.concat(in, n);
        break;
    }
    nodes[n] = out;
  }
  return train::make_model(std::move(g), input, nodes.at(cfg.output), kTargetName);
}

json save_parameters(const ad::Graph& graph) {
  json params = json::object();
  for (ad::NodeId id : graph.parameters()) {
    const auto v = graph.value(id).values();
    params[graph.name(id)] = std::vector<double>(v.begin(), v.end());
  }
  return json{{"parameters", std::move(params)}};
}

void load_parameters(ad::Graph& graph, const json& j) {
  if (!j.is_object() || !j.contains("parameters") || !j.at("parameters").is_object()) {
    throw ConfigError("parameters", "expected an object mapping parameter names to arrays");
  }
  const auto& params = j.at("parameters");
  for (const auto& [name, _] : params.items()) {
    const auto id = graph.find(name);
    if (!id || graph.op(*id) != ad::Op::Parameter) {
      throw ConfigError("parameters." + name, "no such parameter in the model");
    }
  }
  for (ad::NodeId id : graph.parameters()) {
    const std::string& name = graph.name(id);
    const std::string path = "parameters." + name;
    if (!params.contains(name)) throw ConfigError(path, "missing");
    std::vector<double> values;
    try {
      values = params.at(name).get<std::vector<double>>();
    } catch (const json::exception&) {
      throw ConfigError(path, "must be an array of numbers");
    }
    if (values.size() != graph.channels(id)) {
      throw ConfigError(path, "has " + std::to_string(values.size()) + " values, expected " +
                                  std::to_string(graph.channels(id)));
    }
    graph.set_parameter(id, values);
  }
  graph.invalidate();
}

void validate_train_config(const train::TrainConfig& c) {
  if (c.iterations < 1) throw ConfigError("train.iterations", "must be at least 1");
  if (!(c.lr >= 0.0) || !std::isfinite(c.lr)) throw ConfigError("train.lr", "must be finite and non-negative");
  if (!(c.init_range > 0.0) || !std::isfinite(c.init_range)) throw ConfigError("train.init_range", "must be positive");
  if (!(c.beta1 >= 0.0 && c.beta1 < 1.0)) throw ConfigError("train.beta1", "must lie in [0, 1)");
  if (!(c.beta2 >= 0.0 && c.beta2 < 1.0)) throw ConfigError("train.beta2", "must lie in [0, 1)");
  if (!(c.eps > 0.0)) throw ConfigError("train.eps", "must be positive");
  c.validate();
}

train::TrainConfig parse_train_config(const json& j) {
  require_object(j, "train");
  reject_unknown_keys(j, "train", {"iterations", "lr", "seed", "init_range", "beta1", "beta2", "eps", "sequence_length"});
  train::TrainConfig c;
  c.iterations = get_count(j, "iterations", "train", c.iterations);
  c.lr = get_field<double>(j, "lr", "train", c.lr);
  c.seed = get_field<std::uint64_t>(j, "seed", "train", c.seed);
  c.init_range = get_field<double>(j, "init_range", "train", c.init_range);
  c.beta1 = get_field<double>(j, "beta1", "train", c.beta1);
  c.beta2 = get_field<double>(j, "beta2", "train", c.beta2);
  c.eps = get_field<double>(j, "eps", "train", c.eps);
  c.sequence_length = get_count(j, "sequence_length", "train", c.sequence_length);
  validate_train_config(c);
  return c;
}

json to_json(const train::TrainConfig& c) {
  return json{{"iterations", c.iterations}, {"lr", c.lr},       {"seed", c.seed},
              {"init_range", c.init_range}, {"beta1", c.beta1}, {"beta2", c.beta2},
              {"eps", c.eps},               {"sequence_length", c.sequence_length}};
}

namespace {

const std::map<std::string, PlantKind>& plant_table() {
  static const std::map<std::string, PlantKind> table{
      {"wh", PlantKind::WienerHammerstein}, {"boucwen", PlantKind::BoucWen}, {"emps", PlantKind::Emps}};
  return table;
}

const char* to_string(PlantKind k) {
  switch (k) {
    case PlantKind::WienerHammerstein: return "wh";
    case PlantKind::BoucWen: return "boucwen";
    case PlantKind::Emps: return "emps";
  }
  return "?";
}

TransferFunction parse_tf(const json& j, const std::string& path) {
  require_object(j, path);
  reject_unknown_keys(j, path, {"b", "a"});
  TransferFunction tf;
  tf.b = require_field<std::vector<double>>(j, "b", path);
  tf.a = get_field<std::vector<double>>(j, "a", path, {});
  try {
    tf.validate();
  } catch (const std::exception& e) {
    throw ConfigError(path, e.what());
  }
  return tf;
}

json tf_json(const TransferFunction& tf) { return json{{"b", tf.b}, {"a", tf.a}}; }

// Unit-DC-gain defaults with poles at 0.9, 0.8 exp(+-0.3i) and 0.7, 0.9 exp(+-0.5i).
TransferFunction default_g1() {
  const double c = 2.0 * 0.8 * std::cos(0.3);
  const std::vector<double> a{-(0.9 + c), 0.64 + 0.9 * c, -0.9 * 0.64};
  const double gain = (1.0 + a[0] + a[1] + a[2]) / 1.7;
  return {{gain, 0.5 * gain, 0.2 * gain, 0.0}, a};
}

TransferFunction default_g2() {
  const double c = 2.0 * 0.9 * std::cos(0.5);
  const std::vector<double> a{-(0.7 + c), 0.81 + 0.7 * c, -0.7 * 0.81};
  const double gain = (1.0 + a[0] + a[1] + a[2]) / 0.7;
  return {{0.5 * gain, -0.2 * gain, 0.3 * gain, 0.1 * gain}, a};
}

}  // namespace

void GeneratorConfig::validate() const {
  if (train_samples < 2) throw ConfigError("train_samples", "must be at least 2");
  if (!(fs > 0.0)) throw ConfigError("fs", "must be positive");
  if (!(f_lo >= 0.0 && f_lo < f_hi && f_hi <= fs / 2.0)) {
    throw ConfigError("band", "must satisfy 0 <= f_lo < f_hi <= fs/2");
  }
  if (!(rms > 0.0)) throw ConfigError("rms", "must be positive");
  if (noise.sigma && noise.snr_db) throw ConfigError("noise", "give either sigma or snr_db, not both");
  if (noise.sigma && !(*noise.sigma >= 0.0)) throw ConfigError("noise.sigma", "must be non-negative");
  if (kind == PlantKind::BoucWen) {
    if (boucwen.fs != fs) throw ConfigError("boucwen.fs", "must equal the generator fs");
    try {
      boucwen.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError("boucwen", e.what());
    }
  }
  if (nonlinearity != "tanh" && nonlinearity != "identity" && nonlinearity != "friction") {
    throw ConfigError("nonlinearity", "unknown static map '" + nonlinearity + "'");
  }
  if (nonlinearity == "friction" && !(friction_width > 0.0)) {
    throw ConfigError("friction_width", "must be positive");
  }
}

GeneratorConfig parse_generator_config(const json& j) {
  require_object(j, "generator");
  reject_unknown_keys(j, "", {"kind", "seed", "fs", "train_samples", "test_samples", "f_lo", "f_hi", "rms", "noise",
                              "g1", "g2", "nonlinearity", "friction_level", "friction_width", "boucwen"});
  GeneratorConfig c;
  const auto kind = require_field<std::string>(j, "kind", "generator");
  const auto it = plant_table().find(kind);
  if (it == plant_table().end()) throw ConfigError("kind", "unknown plant '" + kind + "' (wh, boucwen, emps)");
  c.kind = it->second;
  if (c.kind == PlantKind::BoucWen) {
    c.fs = 750.0;
    c.f_lo = 5.0;
    c.f_hi = 150.0;
  } else if (c.kind == PlantKind::WienerHammerstein) {
    c.f_hi = 0.25;
  } else {
    c.f_hi = 0.05;
    c.nonlinearity = "friction";
  }
  c.seed = get_field<std::uint64_t>(j, "seed", "generator", c.seed);
  c.fs = get_field<double>(j, "fs", "generator", c.fs);
  c.train_samples = get_count(j, "train_samples", "generator", c.train_samples);
  c.test_samples = get_count(j, "test_samples", "generator", c.test_samples);
  c.f_lo = get_field<double>(j, "f_lo", "generator", c.f_lo);
  c.f_hi = get_field<double>(j, "f_hi", "generator", c.f_hi);
  c.rms = get_field<double>(j, "rms", "generator", c.rms);
  if (j.contains("noise")) {
    const auto& n = j.at("noise");
    require_object(n, "noise");
    reject_unknown_keys(n, "noise", {"sigma", "snr_db"});
    if (n.contains("sigma")) c.noise.sigma = get_field<double>(n, "sigma", "noise", 0.0);
    if (n.contains("snr_db")) c.noise.snr_db = get_field<double>(n, "snr_db", "noise", 0.0);
  }
  c.g1 = j.contains("g1") ? parse_tf(j.at("g1"), "g1") : default_g1();
  if (c.kind == PlantKind::Emps && !j.contains("g1")) c.g1 = {{0.0, 0.05}, {-0.95}};
  c.g2 = j.contains("g2") ? parse_tf(j.at("g2"), "g2") : default_g2();
  c.nonlinearity = get_field<std::string>(j, "nonlinearity", "generator", c.nonlinearity);
  c.friction_level = get_field<double>(j, "friction_level", "generator", c.friction_level);
  c.friction_width = get_field<double>(j, "friction_width", "generator", c.friction_width);
  c.boucwen.fs = c.fs;
  if (j.contains("boucwen")) {
    const auto& b = j.at("boucwen");
    require_object(b, "boucwen");
    reject_unknown_keys(b, "boucwen", {"mass", "stiffness", "damping", "alpha", "beta", "gamma", "delta", "nu",
                                       "substeps", "output_scale"});
    auto& p = c.boucwen;
    p.mass = get_field<double>(b, "mass", "boucwen", p.mass);
    p.stiffness = get_field<double>(b, "stiffness", "boucwen", p.stiffness);
    p.damping = get_field<double>(b, "damping", "boucwen", p.damping);
    p.alpha = get_field<double>(b, "alpha", "boucwen", p.alpha);
    p.beta = get_field<double>(b, "beta", "boucwen", p.beta);
    p.gamma = get_field<double>(b, "gamma", "boucwen", p.gamma);
    p.delta = get_field<double>(b, "delta", "boucwen", p.delta);
    p.nu = get_field<double>(b, "nu", "boucwen", p.nu);
    p.substeps = get_count(b, "substeps", "boucwen", p.substeps);
    p.output_scale = get_field<double>(b, "output_scale", "boucwen", p.output_scale);
  }
  c.validate();
  return c;
}

json to_json(const GeneratorConfig& c) {
  json j{{"kind", to_string(c.kind)},
         {"seed", c.seed},
         {"fs", c.fs},
         {"train_samples", c.train_samples},
         {"test_samples", c.test_samples},
         {"f_lo", c.f_lo},
         {"f_hi", c.f_hi},
         {"rms", c.rms}};
  json noise = json::object();
  if (c.noise.sigma) noise["sigma"] = *c.noise.sigma;
  if (c.noise.snr_db) noise["snr_db"] = *c.noise.snr_db;
  j["noise"] = noise;
  if (c.kind == PlantKind::BoucWen) {
    const auto& p = c.boucwen;
    j["boucwen"] = json{{"mass", p.mass},   {"stiffness", p.stiffness}, {"damping", p.damping},
                        {"alpha", p.alpha}, {"beta", p.beta},           {"gamma", p.gamma},
                        {"delta", p.delta}, {"nu", p.nu},               {"substeps", p.substeps},
                        {"output_scale", p.output_scale}};
  } else {
    j["g1"] = tf_json(c.g1);
    if (c.kind == PlantKind::WienerHammerstein) j["g2"] = tf_json(c.g2);
    j["nonlinearity"] = c.nonlinearity;
    if (c.nonlinearity == "friction") {
      j["friction_level"] = c.friction_level;
      j["friction_width"] = c.friction_width;
    }
  }
  return j;
}

data::StaticMap make_static_map(const GeneratorConfig& c) {
  if (c.nonlinearity == "tanh") return [](double x) { return std::tanh(x); };
  if (c.nonlinearity == "identity") return [](double x) { return x; };
  if (c.nonlinearity == "friction") {
    const double level = c.friction_level;
    const double width = c.friction_width;
    return [level, width](double x) { return x - level * std::tanh(x / width); };
  }
  throw ConfigError("nonlinearity", "unknown static map '" + c.nonlinearity + "'");
}

namespace {

TimeSeries simulate_plant(const GeneratorConfig& c, const TimeSeries& u) {
  switch (c.kind) {
    case PlantKind::WienerHammerstein:
      return data::simulate_wh_reference(c.g1, make_static_map(c), c.g2, u);
    case PlantKind::BoucWen:
      return data::simulate_boucwen(c.boucwen, u);
    case PlantKind::Emps:
      return data::simulate_wh_reference(c.g1, make_static_map(c), TransferFunction{{1.0}, {-1.0}}, u);
  }
  throw ConfigError("kind", "unknown plant");
}

data::Dataset make_record(const GeneratorConfig& c, std::size_t samples, std::uint64_t stream, std::size_t split) {
  data::MultisineConfig ms{samples, c.fs, c.f_lo, c.f_hi, c.rms, c.seed * 4 + stream};
  data::Dataset d;
  d.u = data::generate_multisine(ms);
  d.y = data::add_noise(simulate_plant(c, d.u), c.noise, c.seed * 4 + stream + 2);
  d.fs = c.fs;
  d.split = split;
  return d;
}

}  // namespace

GeneratedData generate(const GeneratorConfig& c) {
  c.validate();
  GeneratedData out;
  out.train = make_record(c, c.train_samples, 0, c.train_samples);
  out.test = make_record(c, c.test_samples, 1, 0);
  return out;
}

std::optional<std::pair<ModelConfig, json>> ground_truth_model(const GeneratorConfig& c) {
  if (c.kind != PlantKind::WienerHammerstein || c.nonlinearity != "tanh") return std::nullopt;
  auto block = [](std::string name, BlockKind kind, std::size_t nb, std::size_t na) {
    BlockConfig b;
    b.name = std::move(name);
    b.kind = kind;
    b.n_b = nb;
    b.n_a = na;
    return b;
  };
  ModelConfig m;
  m.input = "u";
  m.output = "G2";
  m.blocks = {block("G1", BlockKind::GBlock, c.g1.nb(), c.g1.na()), block("F", BlockKind::Tanh, 0, 0),
              block("G2", BlockKind::GBlock, c.g2.nb(), c.g2.na())};
  m.connections = {{"u", "G1"}, {"G1", "F"}, {"F", "G2"}};
  json params{{"parameters", json{{"G1.b", c.g1.b}, {"G2.b", c.g2.b}}}};
  if (c.g1.na() > 0) params["parameters"]["G1.a"] = c.g1.a;
  if (c.g2.na() > 0) params["parameters"]["G2.a"] = c.g2.a;
  return std::make_pair(std::move(m), std::move(params));
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path.string(), "cannot open file");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), std::string("invalid JSON: ") + e.what());
  }
}

void write_json_atomic(const std::filesystem::path& path, const json& j) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("error while writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace dynonet::config
