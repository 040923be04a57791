#pragma once

#include <span>
#include <vector>

#include "dynonet/signal.hpp"

namespace dynonet::layers {

// Memoryless layers applied identically at every time step. Loops over time
// are parallel; reductions over time are parallel over the reduced entries and
// sequential in t, so results are reproducible for any thread count.

/// y_t = W x_t + bias with W stored row-major (outputs x inputs).
TimeSeries affine_forward(const TimeSeries& x, std::span<const double> weight,
                          std::span<const double> bias);

struct AffineGradients {
  TimeSeries x_bar;
  std::vector<double> weight_bar;
  std::vector<double> bias_bar;
};

AffineGradients affine_backward(const TimeSeries& x, std::span<const double> weight,
                                const TimeSeries& y_bar);

}  // namespace dynonet::layers
