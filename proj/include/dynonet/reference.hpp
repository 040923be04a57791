#pragma once

// Straight serial implementations of the parallel kernels. They share no code
// with the OpenMP versions and exist for equivalence tests and benchmarks.

#include <span>
#include <vector>

#include "dynonet/lti.hpp"
#include "dynonet/static_layers.hpp"

namespace dynonet::reference {

TimeSeries mimo_forward(const TimeSeries& u, const lti::MimoOperator& op);
lti::MimoGradients mimo_backward(const TimeSeries& u, const lti::MimoOperator& op,
                                 const TimeSeries& y_bar);

std::vector<double> fir_forward(std::span<const double> u, std::span<const double> b);
lti::FirGradients fir_backward(std::span<const double> u, std::span<const double> b,
                               std::span<const double> y_bar);

TimeSeries affine_forward(const TimeSeries& x, std::span<const double> weight,
                          std::span<const double> bias);
layers::AffineGradients affine_backward(const TimeSeries& x, std::span<const double> weight,
                                        const TimeSeries& y_bar);

}  // namespace dynonet::reference
