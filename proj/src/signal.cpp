#include "dynonet/signal.hpp"

#include <algorithm>
#include <cmath>

namespace dynonet {

TimeSeries::TimeSeries(std::size_t samples, std::size_t channels, double fill)
    : samples_(samples), channels_(channels), data_(samples * channels, fill) {
  if (samples == 0 || channels == 0) {
    throw ShapeError("TimeSeries requires at least one sample and one channel");
  }
}

TimeSeries::TimeSeries(std::size_t samples, std::size_t channels, std::vector<double> data)
    : samples_(samples), channels_(channels), data_(std::move(data)) {
  if (samples == 0 || channels == 0) {
    throw ShapeError("TimeSeries requires at least one sample and one channel");
  }
  if (data_.size() != samples * channels) {
    throw ShapeError("TimeSeries data size " + std::to_string(data_.size()) + " does not match " +
                     std::to_string(samples) + "x" + std::to_string(channels));
  }
}

TimeSeries TimeSeries::column(std::vector<double> values) {
  const auto n = values.size();
  return TimeSeries(n, 1, std::move(values));
}

TimeSeries TimeSeries::row(std::vector<double> values) {
  const auto n = values.size();
  return TimeSeries(1, n, std::move(values));
}

std::vector<double> TimeSeries::channel(std::size_t k) const {
  if (k >= channels_) throw ShapeError("channel index out of range");
  std::vector<double> out(samples_);
  for (std::size_t t = 0; t < samples_; ++t) out[t] = data_[t * channels_ + k];
  return out;
}

void TimeSeries::set_channel(std::size_t k, std::span<const double> v) {
  if (k >= channels_ || v.size() != samples_) throw ShapeError("set_channel: shape mismatch");
  for (std::size_t t = 0; t < samples_; ++t) data_[t * channels_ + k] = v[t];
}

void TimeSeries::add_to_channel(std::size_t k, std::span<const double> v) {
  if (k >= channels_ || v.size() != samples_) throw ShapeError("add_to_channel: shape mismatch");
  for (std::size_t t = 0; t < samples_; ++t) data_[t * channels_ + k] += v[t];
}

bool TimeSeries::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void TimeSeries::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void TransferFunction::validate() const {
  if (b.empty()) throw std::invalid_argument("transfer function numerator must be non-empty");
  auto finite = [](double v) { return std::isfinite(v); };
  if (!std::all_of(b.begin(), b.end(), finite) || !std::all_of(a.begin(), a.end(), finite)) {
    throw std::invalid_argument("transfer function coefficients must be finite");
  }
}

namespace signal {

std::vector<double> flip(std::span<const double> v) { return {v.rbegin(), v.rend()}; }

std::vector<double> convolve(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw ShapeError("convolve: empty operand");
  const std::size_t nx = x.size();
  const std::size_t ny = y.size();
  std::vector<double> out(nx + ny - 1, 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::size_t lo = i + 1 > ny ? i + 1 - ny : 0;
    const std::size_t hi = std::min(i, nx - 1);
    // Pairwise from both ends: convolve(x, y) == convolve(y, x) bitwise.
    double acc = 0.0;
    std::size_t j = lo;
    std::size_t k = hi;
    for (; j < k; ++j, --k) acc += x[j] * y[i - j] + x[k] * y[i - k];
    if (j == k) acc += x[j] * y[i - j];
    out[i] = acc;
  }
  return out;
}

std::vector<double> Correlation::non_negative(std::size_t count) const {
  std::vector<double> out(count, 0.0);
  for (std::size_t i = 0; i < count; ++i) {
    const auto idx = static_cast<std::ptrdiff_t>(i) - first_lag;
    if (idx >= 0 && static_cast<std::size_t>(idx) < values.size()) out[i] = values[idx];
  }
  return out;
}

Correlation cross_correlate(std::span<const double> x, std::span<const double> y) {
  if (x.empty() || y.empty()) throw ShapeError("cross_correlate: empty operand");
  const auto nx = static_cast<std::ptrdiff_t>(x.size());
  const auto ny = static_cast<std::ptrdiff_t>(y.size());
  Correlation c;
  c.first_lag = -nx + 1;
  c.values.assign(static_cast<std::size_t>(nx + ny - 1), 0.0);
  for (std::ptrdiff_t i = -nx + 1; i <= ny - 1; ++i) {
    double acc = 0.0;
    const std::ptrdiff_t hi = std::min(nx + i - 1, ny - 1);
    for (std::ptrdiff_t j = std::max<std::ptrdiff_t>(i, 0); j <= hi; ++j) acc += x[j - i] * y[j];
    c.values[static_cast<std::size_t>(i - c.first_lag)] = acc;
  }
  return c;
}

std::vector<double> iir_filter(const TransferFunction& tf, std::span<const double> u,
                               MultiplyCounter* counter) {
  tf.validate();
  const std::size_t T = u.size();
  const std::size_t nb = tf.nb();
  const std::size_t na = tf.na();

  // Zero-padded histories so that every step runs the full recurrence.
  std::vector<double> u_ext(nb + T, 0.0);
  std::copy(u.begin(), u.end(), u_ext.begin() + static_cast<std::ptrdiff_t>(nb));
  std::vector<double> y_ext(na + T, 0.0);

  for (std::size_t t = 0; t < T; ++t) {
    const double* u_now = u_ext.data() + nb + t;
    double* y_now = y_ext.data() + na + t;
    double acc = 0.0;
    for (std::size_t k = 0; k <= nb; ++k) acc += tf.b[k] * u_now[-static_cast<std::ptrdiff_t>(k)];
    for (std::size_t k = 1; k <= na; ++k) acc -= tf.a[k - 1] * y_now[-static_cast<std::ptrdiff_t>(k)];
    if (!std::isfinite(acc)) {
      throw NumericalRangeError("iir_filter: non-finite output at t=" + std::to_string(t));
    }
    *y_now = acc;
  }
  if (counter != nullptr) counter->count += static_cast<std::uint64_t>(T) * (nb + na + 1);

  return {y_ext.begin() + static_cast<std::ptrdiff_t>(na), y_ext.end()};
}

std::vector<double> impulse_response(const TransferFunction& tf, std::size_t samples) {
  if (samples == 0) throw ShapeError("impulse_response: need at least one sample");
  std::vector<double> impulse(samples, 0.0);
  impulse[0] = 1.0;
  return iir_filter(tf, impulse);
}

}  // namespace signal
}  // namespace dynonet
