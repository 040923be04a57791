#include "dynonet/training.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <stdexcept>

namespace dynonet::train {

Model make_model(ad::Graph graph, ad::NodeId input, ad::NodeId prediction, std::string target_name) {
  Model m{std::move(graph), input, 0, prediction, 0};
  m.target = m.graph.input(std::move(target_name), m.graph.channels(prediction));
  m.loss = m.graph.mse_loss(prediction, m.target);
  return m;
}

TimeSeries simulate(Model& model, const TimeSeries& u) {
  return model.graph.forward({{model.input_name(), u}}, model.prediction);
}

void adam_step(std::span<const ParamGroup> groups, AdamState& state) {
  for (const auto& g : groups) {
    if (g.values.size() != g.grad.size()) {
      throw ShapeError("adam_step: gradient of '" + g.name + "' does not match its parameter");
    }
    for (double v : g.grad) {
      if (!std::isfinite(v)) throw NumericalRangeError("adam_step: non-finite gradient in '" + g.name + "'");
    }
  }
  if (state.m.empty()) {
    for (const auto& g : groups) {
      state.m.emplace_back(g.values.size(), 0.0);
      state.v.emplace_back(g.values.size(), 0.0);
    }
  }
  if (state.m.size() != groups.size()) throw ShapeError("adam_step: parameter groups changed between steps");

  const auto& c = state.config;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto& m = state.m[i];
    auto& v = state.v[i];
    if (m.size() != groups[i].values.size()) throw ShapeError("adam_step: group size changed");
    for (std::size_t j = 0; j < m.size(); ++j) {
      const double g = groups[i].grad[j];
      m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g;
      v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[j] / bias1;
      const double v_hat = v[j] / bias2;
      groups[i].values[j] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
  }
}

void TrainConfig::validate() const {
  if (iterations < 1) throw std::invalid_argument("iterations must be at least 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw std::invalid_argument("learning rate must be finite and non-negative");
  if (!(init_range > 0.0)) throw std::invalid_argument("init_range must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw std::invalid_argument("Adam eps must be positive");
}

void init_params(ad::Graph& graph, const TrainConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  for (ad::NodeId id : graph.trainable_parameters()) {
    double bound = cfg.init_range;
    switch (graph.role(id)) {
      case ad::ParamRole::DynamicCoefficient:
        break;
      case ad::ParamRole::StaticWeight:
      case ad::ParamRole::StaticBias:
        bound = 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(graph.fan_in(id), 1)));
        break;
      case ad::ParamRole::Constant:
        continue;
    }
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : graph.parameter_values(id)) v = dist(rng);
  }
  graph.invalidate();
}

namespace {

void check_pair(const TimeSeries& y_meas, const TimeSeries& y_sim, const char* what) {
  if (!y_meas.same_shape(y_sim)) throw ShapeError(std::string(what) + ": measured and simulated shapes differ");
}

double squared_error(const TimeSeries& y_meas, const TimeSeries& y_sim) {
  const auto a = y_meas.values();
  const auto b = y_sim.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc;
}

}  // namespace

double fit_index(const TimeSeries& y_meas, const TimeSeries& y_sim) {
  check_pair(y_meas, y_sim, "fit_index");
  const auto a = y_meas.values();
  double mean = 0.0;
  for (double v : a) mean += v;
  mean /= static_cast<double>(a.size());
  double dev = 0.0;
  for (double v : a) dev += (v - mean) * (v - mean);
  if (dev == 0.0) throw std::domain_error("fit_index undefined for a constant measured output");
  return 100.0 * (1.0 - std::sqrt(squared_error(y_meas, y_sim)) / std::sqrt(dev));
}

double rmse(const TimeSeries& y_meas, const TimeSeries& y_sim) {
  check_pair(y_meas, y_sim, "rmse");
  return std::sqrt(squared_error(y_meas, y_sim) / static_cast<double>(y_meas.size()));
}

MetricsReport evaluate(const TimeSeries& y_meas, const TimeSeries& y_sim) {
  return {fit_index(y_meas, y_sim), rmse(y_meas, y_sim)};
}

namespace {

std::vector<IoPair> windows(const IoPair& data, std::size_t length) {
  const std::size_t T = data.u.samples();
  if (length == 0 || length >= T) return {data};
  std::vector<IoPair> out;
  auto cut = [](const TimeSeries& x, std::size_t begin, std::size_t n) {
    std::vector<double> buf(x.data().begin() + static_cast<std::ptrdiff_t>(begin * x.channels()),
                            x.data().begin() + static_cast<std::ptrdiff_t>((begin + n) * x.channels()));
    return TimeSeries(n, x.channels(), std::move(buf));
  };
  for (std::size_t begin = 0; begin + length <= T; begin += length) {
    out.push_back({cut(data.u, begin, length), cut(data.y, begin, length)});
  }
  return out;
}

}  // namespace

TrainResult train(Model& model, const IoPair& train_data, const std::optional<IoPair>& test_data,
                  const TrainConfig& cfg, const std::function<void(std::size_t, double)>& progress,
                  std::size_t report_every) {
  cfg.validate();
  if (train_data.u.samples() != train_data.y.samples()) throw ShapeError("train: input/output lengths differ");
  const auto start = std::chrono::steady_clock::now();
  auto& graph = model.graph;
  if (cfg.initialize) init_params(graph, cfg, cfg.seed);

  const auto params = graph.trainable_parameters();
  const auto batches = windows(train_data, cfg.sequence_length);
  AdamState state{{cfg.lr, cfg.beta1, cfg.beta2, cfg.eps}};
  std::vector<std::vector<double>> grads(params.size());

  TrainResult result;
  result.loss_trace.reserve(cfg.iterations);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    double loss = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) grads[i].assign(graph.channels(params[i]), 0.0);
    try {
      for (const auto& batch : batches) {
        loss += graph.forward({{model.input_name(), batch.u}, {model.target_name(), batch.y}}, model.loss)(0, 0);
        graph.backward(model.loss);
        for (std::size_t i = 0; i < params.size(); ++i) {
          if (!graph.has_grad(params[i])) continue;
          const auto g = graph.grad(params[i]).values();
          for (std::size_t j = 0; j < g.size(); ++j) grads[i][j] += g[j];
        }
      }
    } catch (const NumericalRangeError& e) {
      throw DivergenceError(it, "training diverged at iteration " + std::to_string(it) + ": " + e.what());
    }
    const double scale = 1.0 / static_cast<double>(batches.size());
    loss *= scale;
    if (!std::isfinite(loss)) {
      throw DivergenceError(it, "training diverged at iteration " + std::to_string(it) + ": non-finite loss");
    }
    result.loss_trace.push_back(loss);
    if (progress && (it % report_every == 0 || it + 1 == cfg.iterations)) progress(it, loss);

    std::vector<ParamGroup> groups;
    groups.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      for (double& g : grads[i]) g *= scale;
      groups.push_back({graph.name(params[i]), graph.parameter_values(params[i]), grads[i]});
    }
    try {
      adam_step(groups, state);
    } catch (const NumericalRangeError& e) {
      throw DivergenceError(it, "training diverged at iteration " + std::to_string(it) + ": " + e.what());
    }
    graph.invalidate();
  }

  try {
    result.train = evaluate(train_data.y, simulate(model, train_data.u));
    if (test_data) result.test = evaluate(test_data->y, simulate(model, test_data->u));
  } catch (const NumericalRangeError& e) {
    throw DivergenceError(cfg.iterations, std::string("final simulation failed: ") + e.what());
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

std::vector<double> smoothed(std::span<const double> trace, std::size_t window) {
  if (window == 0) throw std::invalid_argument("smoothing window must be positive");
  std::vector<double> out(trace.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < trace.size(); ++i) {
    acc += trace[i];
    if (i >= window) acc -= trace[i - window];
    out[i] = acc / static_cast<double>(std::min(i + 1, window));
  }
  return out;
}

}  // namespace dynonet::train
