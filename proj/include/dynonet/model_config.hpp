#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dynonet/bench_data.hpp"
#include "dynonet/stability.hpp"
#include "dynonet/training.hpp"

namespace dynonet::config {

/// Invalid configuration; the message starts with the offending field path,
/// e.g. "blocks[2].n_a: ...".
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& what)
      : std::invalid_argument(field + ": " + what), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class BlockKind { GBlock, Fir, Affine, Ffn, Tanh, Integrator, Add, Concat };

const char* to_string(BlockKind kind);

struct BlockConfig {
  std::string name;
  BlockKind kind = BlockKind::GBlock;
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  std::size_t hidden_units = 20;
  stability::Parametrization parametrization = stability::Parametrization::Raw;
  bool trainable = true;
};

struct ModelConfig {
  std::string input = "u";
  std::size_t input_channels = 1;
  std::string output;
  std::vector<BlockConfig> blocks;
  std::vector<std::pair<std::string, std::string>> connections;

  /// Names, references, acyclicity and channel counts. Throws ConfigError.
  void validate() const;
  /// Block indices in an order where every producer precedes its consumers.
  std::vector<std::size_t> topological_order() const;
};

ModelConfig parse_model_config(const nlohmann::json& j);
nlohmann::json to_json(const ModelConfig& cfg);
ModelConfig load_model_config(const std::filesystem::path& path);

/// Builds the graph (input named cfg.input, target input "y") with parameter
/// leaves named "<block>.<field>".
train::Model build_model(const ModelConfig& cfg);

/// Trainable and frozen parameter values by name.
nlohmann::json save_parameters(const ad::Graph& graph);
/// Every parameter of the graph must be present with the right size.
void load_parameters(ad::Graph& graph, const nlohmann::json& j);

train::TrainConfig parse_train_config(const nlohmann::json& j);
/// TrainConfig::validate with errors naming the field ("train.lr").
void validate_train_config(const train::TrainConfig& cfg);
nlohmann::json to_json(const train::TrainConfig& cfg);

enum class PlantKind { WienerHammerstein, BoucWen, Emps };

/// Synthetic data generator description.
struct GeneratorConfig {
  PlantKind kind = PlantKind::WienerHammerstein;
  std::uint64_t seed = 0;
  double fs = 1.0;
  std::size_t train_samples = 8192;
  std::size_t test_samples = 8192;
  double f_lo = 0.0;
  double f_hi = 0.5;
  double rms = 1.0;
  data::NoiseSpec noise;

  // Wiener-Hammerstein (G1 - f - G2) and the EMPS-like plant (G1 - f - integrator).
  TransferFunction g1;
  TransferFunction g2;
  std::string nonlinearity = "tanh";
  double friction_level = 0.3;
  double friction_width = 0.05;

  data::BoucWenParams boucwen;

  void validate() const;
};

GeneratorConfig parse_generator_config(const nlohmann::json& j);
nlohmann::json to_json(const GeneratorConfig& cfg);

/// Static map named by GeneratorConfig::nonlinearity ("tanh", "identity",
/// "friction").
data::StaticMap make_static_map(const GeneratorConfig& cfg);

struct GeneratedData {
  data::Dataset train;
  data::Dataset test;
};

GeneratedData generate(const GeneratorConfig& cfg);

/// For a WH generator with tanh nonlinearity: an equivalent model config and
/// its parameter values.
std::optional<std::pair<ModelConfig, nlohmann::json>> ground_truth_model(const GeneratorConfig& cfg);

nlohmann::json read_json(const std::filesystem::path& path);
/// Writes to a temporary sibling and renames it into place.
void write_json_atomic(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace dynonet::config
