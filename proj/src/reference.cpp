#include "dynonet/reference.hpp"

namespace dynonet::reference {

TimeSeries mimo_forward(const TimeSeries& u, const lti::MimoOperator& op) {
  if (u.channels() != op.inputs()) throw ShapeError("reference::mimo_forward: channel mismatch");
  TimeSeries y(u.samples(), op.outputs());
  for (std::size_t k = 0; k < op.outputs(); ++k) {
    for (std::size_t h = 0; h < op.inputs(); ++h) {
      y.add_to_channel(k, signal::iir_filter(op.at(k, h), u.channel(h)));
    }
  }
  return y;
}

lti::MimoGradients mimo_backward(const TimeSeries& u, const lti::MimoOperator& op,
                                 const TimeSeries& y_bar) {
  lti::MimoGradients g;
  g.u_bar = TimeSeries(u.samples(), op.inputs());
  for (std::size_t k = 0; k < op.outputs(); ++k) {
    const auto yb = y_bar.channel(k);
    for (std::size_t h = 0; h < op.inputs(); ++h) {
      const auto& tf = op.at(k, h);
      const auto uh = u.channel(h);
      const auto y = signal::iir_filter(tf, uh);
      g.b_bar.push_back(lti::gblock_backward_b(uh, tf.a, tf.nb(), yb));
      g.a_bar.push_back(lti::gblock_backward_a(y, tf.a, yb));
    }
  }
  // Input adjoints summed in output-channel order, as in the parallel kernel.
  for (std::size_t h = 0; h < op.inputs(); ++h) {
    for (std::size_t k = 0; k < op.outputs(); ++k) {
      g.u_bar.add_to_channel(h, lti::gblock_backward_u({op.at(k, h)}, y_bar.channel(k)));
    }
  }
  return g;
}

std::vector<double> fir_forward(std::span<const double> u, std::span<const double> b) {
  std::vector<double> y(u.size(), 0.0);
  for (std::size_t t = 0; t < u.size(); ++t) {
    for (std::size_t j = 0; j < b.size() && j <= t; ++j) y[t] += b[j] * u[t - j];
  }
  return y;
}

lti::FirGradients fir_backward(std::span<const double> u, std::span<const double> b,
                               std::span<const double> y_bar) {
  const std::size_t T = u.size();
  lti::FirGradients g{std::vector<double>(b.size(), 0.0), std::vector<double>(T, 0.0)};
  for (std::size_t j = 0; j < b.size(); ++j) {
    for (std::size_t t = j; t < T; ++t) g.b_bar[j] += y_bar[t] * u[t - j];
  }
  for (std::size_t tau = 0; tau < T; ++tau) {
    for (std::size_t j = 0; j < b.size() && tau + j < T; ++j) g.u_bar[tau] += b[j] * y_bar[tau + j];
  }
  return g;
}

TimeSeries affine_forward(const TimeSeries& x, std::span<const double> weight,
                          std::span<const double> bias) {
  const std::size_t in = x.channels();
  const std::size_t out = bias.size();
  if (weight.size() != in * out) throw ShapeError("reference::affine_forward: shape mismatch");
  TimeSeries y(x.samples(), out);
  for (std::size_t t = 0; t < x.samples(); ++t) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = bias[o];
      for (std::size_t i = 0; i < in; ++i) acc += weight[o * in + i] * x(t, i);
      y(t, o) = acc;
    }
  }
  return y;
}

layers::AffineGradients affine_backward(const TimeSeries& x, std::span<const double> weight,
                                        const TimeSeries& y_bar) {
  const std::size_t in = x.channels();
  const std::size_t out = y_bar.channels();
  layers::AffineGradients g{TimeSeries(x.samples(), in), std::vector<double>(weight.size(), 0.0),
                            std::vector<double>(out, 0.0)};
  for (std::size_t t = 0; t < x.samples(); ++t) {
    for (std::size_t o = 0; o < out; ++o) {
      g.bias_bar[o] += y_bar(t, o);
      for (std::size_t i = 0; i < in; ++i) {
        g.weight_bar[o * in + i] += y_bar(t, o) * x(t, i);
        g.x_bar(t, i) += weight[o * in + i] * y_bar(t, o);
      }
    }
  }
  return g;
}

}  // namespace dynonet::reference
