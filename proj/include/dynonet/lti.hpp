#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "dynonet/signal.hpp"

namespace dynonet::lti {

/// Coefficients of one G-block plus which coefficient groups may be trained.
struct GBlockParams {
  TransferFunction tf;
  bool train_b = true;
  bool train_a = true;

  bool frozen() const { return !train_b && !train_a; }
  /// Pure integrator 1 / (1 - q^-1), never trained.
  static GBlockParams integrator() { return {TransferFunction{{1.0}, {-1.0}}, false, false}; }
};

/// m x p grid of SISO transfer functions; entry (k, h) maps input channel h to
/// output channel k.
class MimoOperator {
 public:
  MimoOperator() = default;
  MimoOperator(std::size_t outputs, std::size_t inputs, TransferFunction fill = {});
  MimoOperator(std::size_t outputs, std::size_t inputs, std::vector<TransferFunction> entries);

  std::size_t outputs() const { return outputs_; }
  std::size_t inputs() const { return inputs_; }
  std::size_t entry_count() const { return entries_.size(); }

  TransferFunction& at(std::size_t k, std::size_t h) { return entries_.at(k * inputs_ + h); }
  const TransferFunction& at(std::size_t k, std::size_t h) const { return entries_.at(k * inputs_ + h); }
  const std::vector<TransferFunction>& entries() const { return entries_; }

 private:
  std::size_t outputs_ = 0;
  std::size_t inputs_ = 0;
  std::vector<TransferFunction> entries_;
};

struct GradientBundle {
  std::vector<double> b_bar;
  std::vector<double> a_bar;
  std::vector<double> u_bar;
};

/// Per-entry coefficient gradients (row-major over (k, h), same layout as
/// MimoOperator) and the input adjoint.
struct MimoGradients {
  std::vector<std::vector<double>> b_bar;
  std::vector<std::vector<double>> a_bar;
  TimeSeries u_bar;
};

// SISO G-block. All kernels assume zero initial conditions.

std::vector<double> gblock_forward(std::span<const double> u, const GBlockParams& params,
                                   MultiplyCounter* counter = nullptr);

/// Numerator gradient: filter u once through 1/A(q), then correlate with y_bar.
std::vector<double> gblock_backward_b(std::span<const double> u, std::span<const double> a,
                                      std::size_t nb, std::span<const double> y_bar);

/// Denominator gradient from the block output y: filter y once through
/// -1/A(q), then correlate the one-step-delayed result with y_bar.
std::vector<double> gblock_backward_a(std::span<const double> y, std::span<const double> a,
                                      std::span<const double> y_bar);

/// Input adjoint: y_bar filtered through G(q) in reverse time.
std::vector<double> gblock_backward_u(const GBlockParams& params, std::span<const double> y_bar);

/// All three adjoints of one block. Frozen coefficient groups get empty vectors.
GradientBundle gblock_backward(std::span<const double> u, std::span<const double> y,
                               const GBlockParams& params, std::span<const double> y_bar);

// MIMO operator. Channel loops run in parallel; each output/input adjoint is
// accumulated in a fixed channel order, so results do not depend on the
// thread count.

/// If `entry_outputs` is non-null it receives G_kh u_h for every entry, which
/// mimo_backward can reuse.
TimeSeries mimo_forward(const TimeSeries& u, const MimoOperator& op,
                        std::vector<std::vector<double>>* entry_outputs = nullptr);

/// Selects which adjoints mimo_backward produces; skipped ones stay empty.
struct MimoBackwardOptions {
  bool b = true;
  bool a = true;
  bool u = true;
};

MimoGradients mimo_backward(const TimeSeries& u, const MimoOperator& op, const TimeSeries& y_bar,
                            const std::vector<std::vector<double>>* entry_outputs = nullptr,
                            MimoBackwardOptions options = {});

// FIR specialization: no recurrence, every output sample is independent.

std::vector<double> fir_forward(std::span<const double> u, std::span<const double> b);

struct FirGradients {
  std::vector<double> b_bar;
  std::vector<double> u_bar;
};

FirGradients fir_backward(std::span<const double> u, std::span<const double> b,
                          std::span<const double> y_bar);

}  // namespace dynonet::lti
