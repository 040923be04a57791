#include "dynonet/static_layers.hpp"

#include <string>

namespace dynonet::layers {

namespace {

std::size_t output_width(const TimeSeries& x, std::span<const double> weight) {
  const std::size_t in = x.channels();
  if (weight.empty() || weight.size() % in != 0) {
    throw ShapeError("affine: weight size " + std::to_string(weight.size()) +
                     " is not a multiple of the input width " + std::to_string(in));
  }
  return weight.size() / in;
}

}  // namespace

TimeSeries affine_forward(const TimeSeries& x, std::span<const double> weight,
                          std::span<const double> bias) {
  const std::size_t in = x.channels();
  const std::size_t out = output_width(x, weight);
  if (bias.size() != out) throw ShapeError("affine: bias size does not match the output width");
  const std::size_t T = x.samples();
  TimeSeries y(T, out);
  const auto n = static_cast<std::ptrdiff_t>(T);
#pragma omp parallel for if (T * weight.size() > 32768) schedule(static)
  for (std::ptrdiff_t tt = 0; tt < n; ++tt) {
    const auto t = static_cast<std::size_t>(tt);
    for (std::size_t o = 0; o < out; ++o) {
      double acc = bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += weight[o * in + i] * x(t, i);
      y(t, o) = acc;
    }
  }
  return y;
}

AffineGradients affine_backward(const TimeSeries& x, std::span<const double> weight,
                                const TimeSeries& y_bar) {
  const std::size_t in = x.channels();
  const std::size_t out = output_width(x, weight);
  if (y_bar.channels() != out || y_bar.samples() != x.samples()) {
    throw ShapeError("affine: output adjoint shape mismatch");
  }
  const std::size_t T = x.samples();
  const bool big = T * weight.size() > 32768;
  AffineGradients g{TimeSeries(T, in), std::vector<double>(weight.size(), 0.0),
                    std::vector<double>(out, 0.0)};

  const auto n = static_cast<std::ptrdiff_t>(T);
#pragma omp parallel for if (big) schedule(static)
  for (std::ptrdiff_t tt = 0; tt < n; ++tt) {
    const auto t = static_cast<std::size_t>(tt);
    for (std::size_t i = 0; i < in; ++i) {
      double acc = 0.0;
      for (std::size_t o = 0; o < out; ++o) acc += weight[o * in + i] * y_bar(t, o);
      g.x_bar(t, i) = acc;
    }
  }

  const auto n_rows = static_cast<std::ptrdiff_t>(out);
#pragma omp parallel for if (big) schedule(static)
  for (std::ptrdiff_t oo = 0; oo < n_rows; ++oo) {
    const auto o = static_cast<std::size_t>(oo);
    double bias_acc = 0.0;
    for (std::size_t t = 0; t < T; ++t) bias_acc += y_bar(t, o);
    g.bias_bar[o] = bias_acc;
    for (std::size_t i = 0; i < in; ++i) {
      double acc = 0.0;
      for (std::size_t t = 0; t < T; ++t) acc += y_bar(t, o) * x(t, i);
      g.weight_bar[o * in + i] = acc;
    }
  }
  return g;
}

}  // namespace dynonet::layers
