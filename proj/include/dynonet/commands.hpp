#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "dynonet/autodiff.hpp"
#include "dynonet/model_config.hpp"

namespace dynonet::cli {

enum ExitCode : int { kSuccess = 0, kValidationError = 1, kNumericalFailure = 2 };

/// Environment variable consulted when --out is not given.
inline constexpr const char* kOutDirEnv = "DYNONET_OUT_DIR";

/// --out if given, else $DYNONET_OUT_DIR if set and non-empty, else "dynonet_out".
std::filesystem::path resolve_out_dir(const std::optional<std::filesystem::path>& flag);

struct GenerateOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
};

struct TrainOptions {
  std::filesystem::path config;
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> test_dataset;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iterations;
  std::optional<double> lr;
  std::optional<std::filesystem::path> out;
  std::size_t report_every = 100;
};

struct EvalOptions {
  std::filesystem::path config;
  std::filesystem::path params;
  std::filesystem::path dataset;
  std::optional<std::filesystem::path> out;
};

struct GradcheckOptions {
  std::filesystem::path config;
  std::uint64_t seed = 0;
  std::size_t samples = 128;
  double tolerance = 1e-5;
  /// Test fixture: scale the backward result of this parameter.
  std::optional<std::string> fault_parameter;
  double fault_factor = 1.01;
};

/// A config file holds either a bare model description or an object
/// {"model": {...}, "train": {...}}.
struct ExperimentConfig {
  config::ModelConfig model;
  train::TrainConfig train;
};

ExperimentConfig load_experiment(const std::filesystem::path& path);

int cmd_generate(const GenerateOptions& opt, std::ostream& out);
int cmd_train(const TrainOptions& opt, std::ostream& out);
int cmd_eval(const EvalOptions& opt, std::ostream& out);
int cmd_gradcheck(const GradcheckOptions& opt, std::ostream& out);

/// Parses arguments (args[0] is the program name), dispatches, and maps
/// exceptions to exit codes: validation problems 1, numerical failures 2.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dynonet::cli
