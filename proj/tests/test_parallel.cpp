#include <doctest.h>
#include <omp.h>

#include <array>
#include <tuple>

#include "dynonet/lti.hpp"
#include "dynonet/reference.hpp"
#include "dynonet/static_layers.hpp"
#include "test_util.hpp"

using namespace dynonet;
using namespace testutil;

namespace {

lti::MimoOperator random_grid(std::size_t m, std::size_t p, std::size_t nb, std::size_t na, std::mt19937_64& rng) {
  lti::MimoOperator op(m, p);
  for (std::size_t k = 0; k < m; ++k) {
    for (std::size_t h = 0; h < p; ++h) op.at(k, h) = random_stable_tf(nb, na, rng);
  }
  return op;
}

class ThreadCount {
 public:
  explicit ThreadCount(int n) : saved_(omp_get_max_threads()) { omp_set_num_threads(n); }
  ~ThreadCount() { omp_set_num_threads(saved_); }

 private:
  int saved_;
};

}  // namespace

TEST_CASE("parallel MIMO kernels equal the serial reference bitwise") {
  std::mt19937_64 rng(1);
  using Shape = std::array<std::size_t, 3>;
  for (auto [m, p, T] : {Shape{1, 1, 100}, Shape{3, 2, 257}, Shape{8, 8, 4096}, Shape{4, 1, 20000}}) {
    const auto op = random_grid(m, p, 3, 3, rng);
    const auto u = random_series(T, p, rng);
    const auto y_bar = random_series(T, m, rng);
    CHECK(lti::mimo_forward(u, op) == reference::mimo_forward(u, op));
    const auto par = lti::mimo_backward(u, op, y_bar);
    const auto ser = reference::mimo_backward(u, op, y_bar);
    CHECK(par.b_bar == ser.b_bar);
    CHECK(par.a_bar == ser.a_bar);
    CHECK(par.u_bar == ser.u_bar);
  }
}

TEST_CASE("parallel FIR kernels equal the serial reference bitwise") {
  std::mt19937_64 rng(2);
  for (std::size_t T : {1u, 10u, 5000u, 70000u}) {
    const auto u = randn(T, rng);
    const auto y_bar = randn(T, rng);
    for (std::size_t nb : {0u, 3u, 40u}) {
      const auto b = randn(nb + 1, rng);
      CHECK(lti::fir_forward(u, b) == reference::fir_forward(u, b));
      const auto par = lti::fir_backward(u, b, y_bar);
      const auto ser = reference::fir_backward(u, b, y_bar);
      CHECK(par.b_bar == ser.b_bar);
      CHECK(par.u_bar == ser.u_bar);
    }
  }
}

TEST_CASE("parallel affine kernels equal the serial reference bitwise") {
  std::mt19937_64 rng(3);
  using Shape = std::array<std::size_t, 3>;
  for (auto [in, out, T] : {Shape{1, 1, 5}, Shape{8, 4, 1000}, Shape{20, 20, 8192}}) {
    const auto x = random_series(T, in, rng);
    const auto w = randn(in * out, rng);
    const auto bias = randn(out, rng);
    const auto y_bar = random_series(T, out, rng);
    CHECK(layers::affine_forward(x, w, bias) == reference::affine_forward(x, w, bias));
    const auto par = layers::affine_backward(x, w, y_bar);
    const auto ser = reference::affine_backward(x, w, y_bar);
    CHECK(par.x_bar == ser.x_bar);
    CHECK(par.weight_bar == ser.weight_bar);
    CHECK(par.bias_bar == ser.bias_bar);
  }
}

TEST_CASE("results do not depend on the thread count") {
  std::mt19937_64 rng(4);
  const auto op = random_grid(6, 5, 2, 3, rng);
  const auto u = random_series(6000, 5, rng);
  const auto y_bar = random_series(6000, 6, rng);
  const auto x = random_series(6000, 16, rng);
  const auto w = randn(16 * 12, rng);
  const auto bias = randn(12, rng);
  const auto x_bar = random_series(6000, 12, rng);

  auto run = [&] {
    auto g = lti::mimo_backward(u, op, y_bar);
    auto a = layers::affine_backward(x, w, x_bar);
    return std::make_tuple(lti::mimo_forward(u, op), g.b_bar, g.a_bar, g.u_bar, a.weight_bar, a.x_bar);
  };
  decltype(run()) single;
  {
    ThreadCount guard(1);
    single = run();
  }
  for (int threads : {2, 3, 8}) {
    ThreadCount guard(threads);
    CHECK(run() == single);
  }
}

TEST_CASE("exceptions inside parallel regions reach the caller") {
  lti::MimoOperator op(4, 4, TransferFunction{{1.0}, {-0.5}});
  op.at(2, 3) = TransferFunction{{1.0}, {-3.0}};
  const TimeSeries u(3000, 4, 1.0);
  CHECK_THROWS_AS(lti::mimo_forward(u, op), NumericalRangeError);
  CHECK_THROWS_AS(reference::mimo_forward(u, op), NumericalRangeError);
}
