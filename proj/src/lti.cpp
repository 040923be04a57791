#include "dynonet/lti.hpp"

#include <algorithm>
#include <string>

#include "parallel.hpp"

namespace dynonet::lti {

MimoOperator::MimoOperator(std::size_t outputs, std::size_t inputs, TransferFunction fill)
    : outputs_(outputs), inputs_(inputs), entries_(outputs * inputs, std::move(fill)) {
  if (outputs == 0 || inputs == 0) throw ShapeError("MimoOperator needs at least one channel");
}

MimoOperator::MimoOperator(std::size_t outputs, std::size_t inputs, std::vector<TransferFunction> entries)
    : outputs_(outputs), inputs_(inputs), entries_(std::move(entries)) {
  if (outputs == 0 || inputs == 0) throw ShapeError("MimoOperator needs at least one channel");
  if (entries_.size() != outputs * inputs) {
    throw ShapeError("MimoOperator: expected " + std::to_string(outputs * inputs) + " entries, got " +
                     std::to_string(entries_.size()));
  }
}

namespace {

void check_same_length(std::span<const double> x, std::span<const double> y, const char* what) {
  if (x.size() != y.size()) {
    throw ShapeError(std::string(what) + ": length mismatch " + std::to_string(x.size()) + " vs " +
                     std::to_string(y.size()));
  }
}

// out_j = sum_{t=j}^{T-1} y_bar_t * s_{t-j}, j = 0..count-1.
std::vector<double> lagged_dots(std::span<const double> s, std::span<const double> y_bar,
                                std::size_t count) {
  const std::size_t T = y_bar.size();
  std::vector<double> out(count, 0.0);
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for if (count * T > 65536) schedule(static)
  for (std::ptrdiff_t jj = 0; jj < n; ++jj) {
    const auto j = static_cast<std::size_t>(jj);
    double acc = 0.0;
    for (std::size_t t = j; t < T; ++t) acc += y_bar[t] * s[t - j];
    out[j] = acc;
  }
  return out;
}

TransferFunction sensitivity_filter(std::span<const double> a, double gain) {
  return TransferFunction{{gain}, {a.begin(), a.end()}};
}

}  // namespace

std::vector<double> gblock_forward(std::span<const double> u, const GBlockParams& params,
                                   MultiplyCounter* counter) {
  return signal::iir_filter(params.tf, u, counter);
}

std::vector<double> gblock_backward_b(std::span<const double> u, std::span<const double> a,
                                      std::size_t nb, std::span<const double> y_bar) {
  check_same_length(u, y_bar, "gblock_backward_b");
  const auto s = signal::iir_filter(sensitivity_filter(a, 1.0), u);
  return lagged_dots(s, y_bar, nb + 1);
}

std::vector<double> gblock_backward_a(std::span<const double> y, std::span<const double> a,
                                      std::span<const double> y_bar) {
  check_same_length(y, y_bar, "gblock_backward_a");
  // Sensitivity of y_t w.r.t. a_j is s_{t-j} with s = -(1/A) y.
  const auto s = signal::iir_filter(sensitivity_filter(a, -1.0), y);
  std::vector<double> lagged = lagged_dots(s, y_bar, a.size() + 1);
  lagged.erase(lagged.begin());
  return lagged;
}

std::vector<double> gblock_backward_u(const GBlockParams& params, std::span<const double> y_bar) {
  auto reversed = signal::iir_filter(params.tf, signal::flip(y_bar));
  std::reverse(reversed.begin(), reversed.end());
  return reversed;
}

GradientBundle gblock_backward(std::span<const double> u, std::span<const double> y,
                               const GBlockParams& params, std::span<const double> y_bar) {
  GradientBundle g;
  if (params.train_b) g.b_bar = gblock_backward_b(u, params.tf.a, params.tf.nb(), y_bar);
  if (params.train_a) g.a_bar = gblock_backward_a(y, params.tf.a, y_bar);
  g.u_bar = gblock_backward_u(params, y_bar);
  return g;
}

TimeSeries mimo_forward(const TimeSeries& u, const MimoOperator& op,
                        std::vector<std::vector<double>>* entry_outputs) {
  if (u.channels() != op.inputs()) {
    throw ShapeError("mimo_forward: input has " + std::to_string(u.channels()) +
                     " channels, operator expects " + std::to_string(op.inputs()));
  }
  const std::size_t T = u.samples();
  const std::size_t m = op.outputs();
  const std::size_t p = op.inputs();

  std::vector<std::vector<double>> inputs(p);
  for (std::size_t h = 0; h < p; ++h) inputs[h] = u.channel(h);

  std::vector<std::vector<double>> entries(m * p);
  detail::ExceptionSlot errors;
  const auto n_entries = static_cast<std::ptrdiff_t>(m * p);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t e = 0; e < n_entries; ++e) {
    errors.run([&] {
      const auto idx = static_cast<std::size_t>(e);
      entries[idx] = signal::iir_filter(op.entries()[idx], inputs[idx % p]);
    });
  }
  errors.rethrow();

  TimeSeries y(T, m);
  const auto n_out = static_cast<std::ptrdiff_t>(m);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t kk = 0; kk < n_out; ++kk) {
    const auto k = static_cast<std::size_t>(kk);
    for (std::size_t h = 0; h < p; ++h) {
      const auto& yk = entries[k * p + h];
      for (std::size_t t = 0; t < T; ++t) y(t, k) += yk[t];
    }
  }
  if (entry_outputs != nullptr) *entry_outputs = std::move(entries);
  return y;
}

MimoGradients mimo_backward(const TimeSeries& u, const MimoOperator& op, const TimeSeries& y_bar,
                            const std::vector<std::vector<double>>* entry_outputs,
                            MimoBackwardOptions options) {
  if (u.channels() != op.inputs() || y_bar.channels() != op.outputs() ||
      u.samples() != y_bar.samples()) {
    throw ShapeError("mimo_backward: shapes of input, operator and output adjoint disagree");
  }
  std::vector<std::vector<double>> recomputed;
  if (entry_outputs == nullptr && options.a) {
    mimo_forward(u, op, &recomputed);
    entry_outputs = &recomputed;
  }
  const std::size_t T = u.samples();
  const std::size_t m = op.outputs();
  const std::size_t p = op.inputs();

  std::vector<std::vector<double>> inputs(p);
  for (std::size_t h = 0; h < p; ++h) inputs[h] = u.channel(h);
  std::vector<std::vector<double>> adjoints(m);
  for (std::size_t k = 0; k < m; ++k) adjoints[k] = y_bar.channel(k);

  MimoGradients g;
  if (options.b) g.b_bar.resize(m * p);
  if (options.a) g.a_bar.resize(m * p);
  std::vector<std::vector<double>> u_bar_entries(options.u ? m * p : 0);

  detail::ExceptionSlot errors;
  const auto n_entries = static_cast<std::ptrdiff_t>(m * p);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t e = 0; e < n_entries; ++e) {
    errors.run([&] {
      const auto idx = static_cast<std::size_t>(e);
      const auto k = idx / p;
      const auto h = idx % p;
      const auto& tf = op.entries()[idx];
      if (options.b) g.b_bar[idx] = gblock_backward_b(inputs[h], tf.a, tf.nb(), adjoints[k]);
      if (options.a) g.a_bar[idx] = gblock_backward_a((*entry_outputs)[idx], tf.a, adjoints[k]);
      if (options.u) u_bar_entries[idx] = gblock_backward_u(GBlockParams{tf}, adjoints[k]);
    });
  }
  errors.rethrow();
  if (!options.u) return g;

  g.u_bar = TimeSeries(T, p);
  const auto n_in = static_cast<std::ptrdiff_t>(p);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t hh = 0; hh < n_in; ++hh) {
    const auto h = static_cast<std::size_t>(hh);
    for (std::size_t k = 0; k < m; ++k) {
      const auto& ub = u_bar_entries[k * p + h];
      for (std::size_t t = 0; t < T; ++t) g.u_bar(t, h) += ub[t];
    }
  }
  return g;
}

std::vector<double> fir_forward(std::span<const double> u, std::span<const double> b) {
  if (b.empty()) throw ShapeError("fir_forward: empty numerator");
  const std::size_t T = u.size();
  std::vector<double> y(T, 0.0);
  const auto n = static_cast<std::ptrdiff_t>(T);
#pragma omp parallel for if (T * b.size() > 65536) schedule(static)
  for (std::ptrdiff_t tt = 0; tt < n; ++tt) {
    const auto t = static_cast<std::size_t>(tt);
    const std::size_t hi = std::min(t, b.size() - 1);
    double acc = 0.0;
    for (std::size_t j = 0; j <= hi; ++j) acc += b[j] * u[t - j];
    y[t] = acc;
  }
  return y;
}

FirGradients fir_backward(std::span<const double> u, std::span<const double> b,
                          std::span<const double> y_bar) {
  check_same_length(u, y_bar, "fir_backward");
  if (b.empty()) throw ShapeError("fir_backward: empty numerator");
  const std::size_t T = u.size();
  FirGradients g;
  // b_bar_j = (u * y_bar)_j: correlation at non-negative lags.
  g.b_bar = lagged_dots(u, y_bar, b.size());
  g.u_bar.assign(T, 0.0);
  const auto n = static_cast<std::ptrdiff_t>(T);
#pragma omp parallel for if (T * b.size() > 65536) schedule(static)
  for (std::ptrdiff_t tt = 0; tt < n; ++tt) {
    const auto tau = static_cast<std::size_t>(tt);
    const std::size_t hi = std::min(b.size() - 1, T - 1 - tau);
    double acc = 0.0;
    for (std::size_t j = 0; j <= hi; ++j) acc += b[j] * y_bar[tau + j];
    g.u_bar[tau] = acc;
  }
  return g;
}

}  // namespace dynonet::lti
