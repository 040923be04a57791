#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dynonet/autodiff.hpp"

namespace dynonet::train {

/// A graph with its conventional endpoints: one sequence input, one target
/// input, the simulated output and the MSE loss between the two.
struct Model {
  ad::Graph graph;
  ad::NodeId input = 0;
  ad::NodeId target = 0;
  ad::NodeId prediction = 0;
  ad::NodeId loss = 0;

  const std::string& input_name() const { return graph.name(input); }
  const std::string& target_name() const { return graph.name(target); }
};

/// Adds the target input and MSE loss to a graph that already has its input
/// and prediction nodes.
Model make_model(ad::Graph graph, ad::NodeId input, ad::NodeId prediction, std::string target_name = "y");

/// Open-loop simulation of the model output for input u.
TimeSeries simulate(Model& model, const TimeSeries& u);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

struct ParamGroup {
  std::string name;
  std::span<double> values;
  std::span<const double> grad;
};

/// One bias-corrected Adam update of every group. Moment buffers are sized on
/// the first call. A non-finite gradient throws NumericalRangeError naming the
/// group, before any parameter is touched.
void adam_step(std::span<const ParamGroup> groups, AdamState& state);

struct TrainConfig {
  std::size_t iterations = 1000;
  double lr = 1e-3;
  std::uint64_t seed = 0;
  /// G-block coefficients are drawn from U(-init_range, init_range).
  double init_range = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// 0 trains on the whole sequence; otherwise the training data is cut into
  /// consecutive windows of this length (each simulated from rest) and the
  /// gradient is averaged over them.
  std::size_t sequence_length = 0;
  /// Re-initialize parameters before training.
  bool initialize = true;

  void validate() const;
};

/// Dynamic coefficients ~ U(-init_range, init_range); static weights and biases
/// ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)). Frozen parameters are untouched.
void init_params(ad::Graph& graph, const TrainConfig& cfg, std::uint64_t seed);

/// 100 * (1 - ||y_meas - y_sim|| / ||y_meas - mean(y_meas)||). Throws
/// std::domain_error for a constant y_meas.
double fit_index(const TimeSeries& y_meas, const TimeSeries& y_sim);
double rmse(const TimeSeries& y_meas, const TimeSeries& y_sim);

struct MetricsReport {
  double fit = 0.0;
  double rmse = 0.0;
};

MetricsReport evaluate(const TimeSeries& y_meas, const TimeSeries& y_sim);

/// Raised when the loss becomes non-finite during training.
class DivergenceError : public NumericalRangeError {
 public:
  DivergenceError(std::size_t iteration, const std::string& what)
      : NumericalRangeError(what), iteration_(iteration) {}
  std::size_t iteration() const { return iteration_; }

 private:
  std::size_t iteration_;
};

struct TrainResult {
  /// Loss before each update, one entry per iteration.
  std::vector<double> loss_trace;
  MetricsReport train;
  std::optional<MetricsReport> test;
  double seconds = 0.0;
};

struct IoPair {
  TimeSeries u;
  TimeSeries y;
};

/// Full-batch Adam on the MSE simulation error. `progress` (if set) is called
/// every `report_every` iterations with (iteration, loss).
TrainResult train(Model& model, const IoPair& train_data, const std::optional<IoPair>& test_data,
                  const TrainConfig& cfg,
                  const std::function<void(std::size_t, double)>& progress = {},
                  std::size_t report_every = 100);

/// Moving average of the trace with the given window (shorter at the start).
std::vector<double> smoothed(std::span<const double> trace, std::size_t window);

}  // namespace dynonet::train
