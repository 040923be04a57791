// Serial reference kernels against the OpenMP ones on a few MIMO sizes.
//
//   bench_kernels [samples] [repeats]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <random>
#include <string>

#include "dynonet/lti.hpp"
#include "dynonet/reference.hpp"
#include "dynonet/static_layers.hpp"

using namespace dynonet;

namespace {

template <class F>
double best_of(std::size_t repeats, F&& f) {
  double best = 1e300;
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    best = std::min(best, s);
  }
  return best;
}

TimeSeries random_series(std::size_t T, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  TimeSeries x(T, c, 0.0);
  for (double& v : x.values()) v = n(rng);
  return x;
}

lti::MimoOperator random_operator(std::size_t m, std::size_t p, std::size_t nb, std::size_t na,
                                  std::mt19937_64& rng) {
  std::uniform_real_distribution<double> coef(-0.2, 0.2);
  std::vector<TransferFunction> entries;
  for (std::size_t i = 0; i < m * p; ++i) {
    TransferFunction tf;
    tf.b.resize(nb + 1);
    tf.a.resize(na);
    for (double& v : tf.b) v = coef(rng);
    for (double& v : tf.a) v = coef(rng) / static_cast<double>(na);
    entries.push_back(std::move(tf));
  }
  return lti::MimoOperator(m, p, std::move(entries));
}

void row(const char* kernel, const std::string& shape, double serial, double parallel) {
  std::printf("%-16s %-12s %12.3f %12.3f %8.2fx\n", kernel, shape.c_str(), serial * 1e3, parallel * 1e3,
              serial / parallel);
}

}  // namespace

int main(int argc, char** argv) {
  const std::size_t T = argc > 1 ? std::strtoul(argv[1], nullptr, 10) : 8192;
  const std::size_t repeats = argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 5;
  std::mt19937_64 rng(1);

  std::printf("T=%zu threads=%d best of %zu\n", T, omp_get_max_threads(), repeats);
  std::printf("%-16s %-12s %12s %12s %9s\n", "kernel", "shape", "serial ms", "openmp ms", "speedup");

  for (auto [m, p] : {std::pair<std::size_t, std::size_t>{1, 1}, {4, 4}, {8, 8}, {16, 16}}) {
    const auto op = random_operator(m, p, 3, 3, rng);
    const auto u = random_series(T, p, rng);
    const auto y_bar = random_series(T, m, rng);
    const std::string shape = std::to_string(m) + "x" + std::to_string(p);
    row("mimo_forward", shape, best_of(repeats, [&] { reference::mimo_forward(u, op); }),
        best_of(repeats, [&] { lti::mimo_forward(u, op); }));
    row("mimo_backward", shape, best_of(repeats, [&] { reference::mimo_backward(u, op, y_bar); }),
        best_of(repeats, [&] { lti::mimo_backward(u, op, y_bar); }));
  }

  {
    const auto u = random_series(T, 1, rng);
    const auto y_bar = random_series(T, 1, rng);
    const auto b = random_series(64, 1, rng);
    row("fir_forward", "nb=63", best_of(repeats, [&] { reference::fir_forward(u.values(), b.values()); }),
        best_of(repeats, [&] { lti::fir_forward(u.values(), b.values()); }));
    row("fir_backward", "nb=63",
        best_of(repeats, [&] { reference::fir_backward(u.values(), b.values(), y_bar.values()); }),
        best_of(repeats, [&] { lti::fir_backward(u.values(), b.values(), y_bar.values()); }));
  }

  {
    const std::size_t in = 32;
    const std::size_t out = 32;
    const auto x = random_series(T, in, rng);
    const auto w = random_series(in * out, 1, rng);
    const auto bias = random_series(out, 1, rng);
    const auto y_bar = random_series(T, out, rng);
    row("affine_forward", "32x32",
        best_of(repeats, [&] { reference::affine_forward(x, w.values(), bias.values()); }),
        best_of(repeats, [&] { layers::affine_forward(x, w.values(), bias.values()); }));
    row("affine_backward", "32x32", best_of(repeats, [&] { reference::affine_backward(x, w.values(), y_bar); }),
        best_of(repeats, [&] { layers::affine_backward(x, w.values(), y_bar); }));
  }
  return 0;
}
