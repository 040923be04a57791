#include <doctest.h>

#include "dynonet/training.hpp"
#include "test_util.hpp"

using namespace dynonet;
using namespace testutil;
using ad::NodeId;
using ad::ParamRole;

namespace {

// u -> G(nb, na) -> affine(hidden) -> tanh -> affine -> y, plus a frozen integrator branch.
train::Model small_model(std::size_t nb, std::size_t na, std::size_t hidden = 4) {
  ad::Graph g;
  const NodeId u = g.input("u", 1);
  const NodeId b = g.parameter("G.b", std::vector<double>(nb + 1), ParamRole::DynamicCoefficient);
  const NodeId a = g.parameter("G.a", std::vector<double>(na), ParamRole::DynamicCoefficient);
  const NodeId v = g.gblock(u, b, a, {1, 1, nb, na});
  const NodeId h = g.tanh(g.affine(v, g.parameter("F.W1", std::vector<double>(hidden), ParamRole::StaticWeight),
                                   g.parameter("F.b1", std::vector<double>(hidden), ParamRole::StaticBias)));
  const NodeId w = g.affine(h, g.parameter("F.W2", std::vector<double>(hidden), ParamRole::StaticWeight),
                            g.parameter("F.b2", std::vector<double>(1), ParamRole::StaticBias));
  const NodeId y = g.add(w, g.scale(g.integrator(u, "I"), 1e-3));
  return train::make_model(std::move(g), u, y);
}

train::Model linear_model(std::size_t nb, std::size_t na) {
  ad::Graph g;
  const NodeId u = g.input("u", 1);
  const NodeId b = g.parameter("G.b", std::vector<double>(nb + 1), ParamRole::DynamicCoefficient);
  const NodeId a = g.parameter("G.a", std::vector<double>(na), ParamRole::DynamicCoefficient);
  return train::make_model(std::move(g), u, g.gblock(u, b, a, {1, 1, nb, na}));
}

std::vector<std::vector<double>> snapshot(ad::Graph& g) {
  std::vector<std::vector<double>> out;
  for (NodeId id : g.parameters()) {
    const auto v = g.parameter_values(id);
    out.emplace_back(v.begin(), v.end());
  }
  return out;
}

// Long double transcription of the bias-corrected update rule.
struct AdamOracle {
  long double lr, b1, b2, eps;
  std::vector<long double> m, v, theta;
  int t = 0;

  void step(const std::vector<double>& g) {
    ++t;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const long double mh = m[i] / (1 - std::pow(b1, t));
      const long double vh = v[i] / (1 - std::pow(b2, t));
      theta[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
};

}  // namespace

TEST_CASE("init_params respects the ranges and leaves frozen parameters alone") {
  auto model = small_model(3, 3, 16);
  auto& g = model.graph;
  train::TrainConfig cfg;
  cfg.init_range = 0.01;
  train::init_params(g, cfg, 7);
  for (NodeId id : g.parameters()) {
    const auto v = g.parameter_values(id);
    const std::string& name = g.name(id);
    CAPTURE(name);
    if (name == "I.b") CHECK(std::vector<double>(v.begin(), v.end()) == std::vector<double>{1.0});
    else if (name == "I.a") CHECK(std::vector<double>(v.begin(), v.end()) == std::vector<double>{-1.0});
    else if (name.rfind("G.", 0) == 0) CHECK(max_abs(v) <= 0.01);
    else CHECK(max_abs(v) <= 1.0 / std::sqrt(static_cast<double>(g.fan_in(id))));
    if (name.rfind("I.", 0) != 0) CHECK(max_abs(v) > 0.0);
  }
  CHECK(max_abs(g.parameter_values(*g.find("F.W2"))) > 0.1);

  const auto first = snapshot(g);
  train::init_params(g, cfg, 7);
  CHECK(snapshot(g) == first);
  train::init_params(g, cfg, 8);
  CHECK(snapshot(g) != first);
}

TEST_CASE("adam_step examples") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    std::vector<double> theta{0.5, -1.5};
    const std::vector<double> grad{0.0, 0.0};
    const std::vector<train::ParamGroup> groups{{"p", theta, grad}};
    train::AdamState state;
    for (int i = 0; i < 5; ++i) train::adam_step(groups, state);
    CHECK(theta == std::vector<double>{0.5, -1.5});
    CHECK(state.step == 5);
  }
  SUBCASE("constant gradient moves by lr / (1 + eps) per step") {
    std::vector<double> theta{1.0};
    const std::vector<double> grad{1.0};
    const std::vector<train::ParamGroup> groups{{"p", theta, grad}};
    train::AdamState state;
    state.config.lr = 0.1;
    const double step = 0.1 / (1.0 + 1e-8);
    for (int i = 1; i <= 3; ++i) {
      train::adam_step(groups, state);
      CHECK(theta[0] == doctest::Approx(1.0 - i * step).epsilon(1e-14));
    }
  }
  SUBCASE("zero learning rate is the identity") {
    std::mt19937_64 rng(1);
    auto theta = randn(10, rng);
    const auto original = theta;
    const auto grad = randn(10, rng);
    const std::vector<train::ParamGroup> groups{{"p", theta, grad}};
    train::AdamState state;
    state.config.lr = 0.0;
    train::adam_step(groups, state);
    CHECK(theta == original);
  }
  SUBCASE("non-finite gradient names the group and changes nothing") {
    std::vector<double> a{1.0};
    std::vector<double> b{2.0};
    const std::vector<double> ga{0.5};
    const std::vector<double> gb{std::nan("")};
    const std::vector<train::ParamGroup> groups{{"first", a, ga}, {"second.W", b, gb}};
    train::AdamState state;
    try {
      train::adam_step(groups, state);
      FAIL("expected NumericalRangeError");
    } catch (const NumericalRangeError& e) {
      CHECK(std::string(e.what()).find("second.W") != std::string::npos);
    }
    CHECK(a[0] == 1.0);
    CHECK(b[0] == 2.0);
  }
}

TEST_CASE("adam_step matches an independent implementation") {
  std::mt19937_64 rng(2);
  for (double lr : {1e-3, 1e-2, 0.3}) {
    auto theta1 = randn(6, rng);
    auto theta2 = randn(3, rng);
    std::vector<double> g1(6);
    std::vector<double> g2(3);
    AdamOracle oracle{lr, 0.9, 0.999, 1e-8, std::vector<long double>(9, 0), std::vector<long double>(9, 0), {}};
    for (double x : theta1) oracle.theta.push_back(x);
    for (double x : theta2) oracle.theta.push_back(x);
    train::AdamState state;
    state.config.lr = lr;
    const std::vector<train::ParamGroup> groups{{"a", theta1, g1}, {"b", theta2, g2}};
    for (int step = 0; step < 100; ++step) {
      const auto g = randn(9, rng, step % 7 == 0 ? 1e-6 : 3.0);
      std::copy(g.begin(), g.begin() + 6, g1.begin());
      std::copy(g.begin() + 6, g.end(), g2.begin());
      train::adam_step(groups, state);
      oracle.step(g);
    }
    for (std::size_t i = 0; i < 6; ++i) CHECK(std::fabs(theta1[i] - static_cast<double>(oracle.theta[i])) < 1e-12);
    for (std::size_t i = 0; i < 3; ++i) CHECK(std::fabs(theta2[i] - static_cast<double>(oracle.theta[6 + i])) < 1e-12);
  }
}

TEST_CASE("fit and rmse examples") {
  const auto y = TimeSeries::column({0.0, 2.0});
  CHECK(train::fit_index(y, y) == 100.0);
  CHECK(train::fit_index(y, TimeSeries::column({1.0, 1.0})) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(train::fit_index(y, TimeSeries::column({2.0, 0.0})) == doctest::Approx(-100.0));
  CHECK(train::fit_index(y, TimeSeries::column({0.0, 0.0})) == doctest::Approx(100.0 * (1.0 - std::sqrt(2.0))));
  CHECK(train::rmse(y, TimeSeries::column({0.0, 0.0})) == doctest::Approx(std::sqrt(2.0)));
  CHECK(train::rmse(y, y) == 0.0);
  CHECK_THROWS_AS(train::fit_index(TimeSeries::column({3.0, 3.0}), y), std::domain_error);
  CHECK_THROWS_AS(train::rmse(y, TimeSeries::column({1.0, 2.0, 3.0})), ShapeError);
}

TEST_CASE("metric properties") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto y = random_series(200, 1, rng);
    auto sim = y;
    const auto noise = randn(200, rng, 0.3);
    for (std::size_t t = 0; t < 200; ++t) sim(t, 0) += noise[t];
    auto ys = y;
    auto ss = sim;
    const double c = 0.01 + 100.0 * trial;
    for (double& v : ys.values()) v *= c;
    for (double& v : ss.values()) v *= c;
    CHECK(train::fit_index(ys, ss) == doctest::Approx(train::fit_index(y, sim)).epsilon(1e-12));
    CHECK(train::rmse(y, sim) == doctest::Approx(std::sqrt(dot(noise, noise) / 200.0)).epsilon(1e-12));
    const auto m = train::evaluate(y, sim);
    CHECK(m.fit == train::fit_index(y, sim));
    CHECK(m.rmse == train::rmse(y, sim));
    CHECK(m.fit < 100.0);
  }
}

TEST_CASE("one step with zero learning rate changes nothing") {
  std::mt19937_64 rng(4);
  const train::IoPair data{random_series(200, 1, rng), random_series(200, 1, rng)};
  auto model = small_model(2, 2);
  train::TrainConfig cfg;
  cfg.iterations = 1;
  cfg.lr = 0.0;
  cfg.seed = 3;
  train::init_params(model.graph, cfg, cfg.seed);
  const auto before = snapshot(model.graph);
  const auto untrained = train::evaluate(data.y, train::simulate(model, data.u));
  const auto result = train::train(model, data, std::nullopt, cfg);
  CHECK(snapshot(model.graph) == before);
  CHECK(result.train.fit == untrained.fit);
  CHECK(result.train.rmse == untrained.rmse);
  CHECK(result.loss_trace.size() == 1);
}

TEST_CASE("training identifies a second-order linear system") {
  std::mt19937_64 rng(5);
  const TransferFunction truth{{0.0, 0.4, 0.25}, {-1.3, 0.6}};
  const auto u = random_series(1000, 1, rng);
  const TimeSeries y(1000, 1, signal::iir_filter(truth, u.data()));
  const auto u_test = random_series(500, 1, rng);
  const TimeSeries y_test(500, 1, signal::iir_filter(truth, u_test.data()));
  auto model = linear_model(2, 2);
  train::TrainConfig cfg;
  cfg.iterations = 3000;
  cfg.lr = 1e-2;
  cfg.seed = 1;
  const auto result = train::train(model, {u, y}, train::IoPair{u_test, y_test}, cfg);
  CHECK(result.train.fit >= 99.9);
  REQUIRE(result.test);
  CHECK(result.test->fit >= 99.9);
  CHECK(result.loss_trace.size() == 3000);
  CHECK(result.loss_trace.back() < 1e-3 * result.loss_trace.front());
}

TEST_CASE("training is deterministic") {
  std::mt19937_64 rng(6);
  const train::IoPair data{random_series(300, 1, rng), random_series(300, 1, rng)};
  train::TrainConfig cfg;
  cfg.iterations = 50;
  cfg.lr = 1e-2;
  cfg.seed = 11;
  auto m1 = small_model(2, 2);
  auto m2 = small_model(2, 2);
  const auto r1 = train::train(m1, data, std::nullopt, cfg);
  const auto r2 = train::train(m2, data, std::nullopt, cfg);
  CHECK(r1.loss_trace == r2.loss_trace);
  CHECK(snapshot(m1.graph) == snapshot(m2.graph));
}

TEST_CASE("divergence reports the iteration") {
  std::mt19937_64 rng(7);
  auto u = random_series(3000, 1, rng);
  for (double& v : u.values()) v *= 100.0;
  const train::IoPair data{u, random_series(3000, 1, rng)};
  auto model = linear_model(1, 2);
  train::TrainConfig cfg;
  cfg.iterations = 200;
  cfg.lr = 5.0;
  try {
    train::train(model, data, std::nullopt, cfg);
    FAIL("expected DivergenceError");
  } catch (const train::DivergenceError& e) {
    CHECK(e.iteration() < cfg.iterations);
    CHECK(std::string(e.what()).find("iteration " + std::to_string(e.iteration())) != std::string::npos);
  }
}

TEST_CASE("training windows and progress reporting") {
  std::mt19937_64 rng(8);
  const train::IoPair data{random_series(400, 1, rng), random_series(400, 1, rng)};
  auto model = small_model(1, 1);
  train::TrainConfig cfg;
  cfg.iterations = 25;
  cfg.sequence_length = 100;
  std::vector<std::size_t> reported;
  train::train(model, data, std::nullopt, cfg, [&](std::size_t it, double) { reported.push_back(it); }, 10);
  CHECK(reported == std::vector<std::size_t>{0, 10, 20, 24});
  cfg.sequence_length = 500;
  const auto whole_window = train::train(model, data, std::nullopt, cfg).loss_trace;
  cfg.sequence_length = 0;
  CHECK(train::train(model, data, std::nullopt, cfg).loss_trace == whole_window);
  train::TrainConfig bad;
  bad.lr = -1.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("smoothed moving average") {
  const std::vector<double> trace{4, 2, 6, 8, 0};
  CHECK(train::smoothed(trace, 1) == trace);
  CHECK(train::smoothed(trace, 2) == std::vector<double>{4, 3, 4, 7, 4});
  const auto s = train::smoothed(trace, 3);
  CHECK(s[0] == 4.0);
  CHECK(s[2] == doctest::Approx(4.0));
  CHECK(s[4] == doctest::Approx(14.0 / 3.0));
}
