#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dynonet {

/// Raised when a recurrence leaves the representable range (typically an
/// unstable filter run over a long horizon).
class NumericalRangeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised on inconsistent shapes between values, parameters or channels.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// T x c real signal stored time-major: sample t of channel k lives at
/// data()[t * channels() + k].
///
/// Coefficient vectors and scalars flowing through the autodiff graph use the
/// same type with a single row.
class TimeSeries {
 public:
  TimeSeries() = default;
  TimeSeries(std::size_t samples, std::size_t channels, double fill = 0.0);
  TimeSeries(std::size_t samples, std::size_t channels, std::vector<double> data);

  /// Single-channel series from a plain vector.
  static TimeSeries column(std::vector<double> values);
  /// Single-row series from a plain vector.
  static TimeSeries row(std::vector<double> values);

  std::size_t samples() const { return samples_; }
  std::size_t channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t t, std::size_t k) { return data_[t * channels_ + k]; }
  double operator()(std::size_t t, std::size_t k) const { return data_[t * channels_ + k]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& data() const { return data_; }

  std::vector<double> channel(std::size_t k) const;
  void set_channel(std::size_t k, std::span<const double> v);
  void add_to_channel(std::size_t k, std::span<const double> v);

  bool same_shape(const TimeSeries& other) const {
    return samples_ == other.samples_ && channels_ == other.channels_;
  }
  bool all_finite() const;
  void fill(double v);

  friend bool operator==(const TimeSeries&, const TimeSeries&) = default;

 private:
  std::size_t samples_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

/// SISO rational operator B(q)/A(q).
///
/// `b` holds b_0..b_{n_b}; `a` holds a_1..a_{n_a} (a_0 = 1 is implicit, so
/// a[0] is the coefficient of q^-1). An empty `a` is an FIR filter.
struct TransferFunction {
  std::vector<double> b{1.0};
  std::vector<double> a{};

  std::size_t nb() const { return b.empty() ? 0 : b.size() - 1; }
  std::size_t na() const { return a.size(); }
  bool is_fir() const { return a.empty(); }

  /// Throws std::invalid_argument if b is empty or a coefficient is not finite.
  void validate() const;

  friend bool operator==(const TransferFunction&, const TransferFunction&) = default;
};

/// Optional instrumentation for counting floating point multiplications
/// performed by the filtering kernels.
struct MultiplyCounter {
  std::uint64_t count = 0;
};

namespace signal {

std::vector<double> flip(std::span<const double> v);

/// Full linear convolution, length n_x + n_y - 1.
std::vector<double> convolve(std::span<const double> x, std::span<const double> y);

/// Cross-correlation over all lags i = -n_x+1 .. n_y-1.
struct Correlation {
  std::vector<double> values;
  std::ptrdiff_t first_lag = 0;

  double at_lag(std::ptrdiff_t lag) const { return values.at(static_cast<std::size_t>(lag - first_lag)); }
  /// Lags 0 .. count-1 (zero beyond the last computed lag).
  std::vector<double> non_negative(std::size_t count) const;
};

Correlation cross_correlate(std::span<const double> x, std::span<const double> y);

/// Filters u through tf from rest. Every step performs exactly
/// n_b + n_a + 1 multiplications, out-of-range history being read as zero.
std::vector<double> iir_filter(const TransferFunction& tf, std::span<const double> u,
                               MultiplyCounter* counter = nullptr);

/// First `samples` values of the impulse response of tf.
std::vector<double> impulse_response(const TransferFunction& tf, std::size_t samples);

}  // namespace signal
}  // namespace dynonet
