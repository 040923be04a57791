#pragma once

#include <string>
#include <utility>

#include "dynonet/autodiff.hpp"

namespace dynonet::stability {

/// Denominator coefficients (a1, a2) of 1 + a1 q^-1 + a2 q^-2.
struct SecondOrderCoeffs {
  double a1 = 0.0;
  double a2 = 0.0;
};

/// Pole radius r = sigmoid(rho), pole angle beta = pi * sigmoid(psi).
struct ConjPoleParam {
  double rho = 0.0;
  double psi = 0.0;
};

/// Unconstrained coordinates covering the whole stable triangle.
struct FullRegionParam {
  double alpha1 = 0.0;
  double alpha2 = 0.0;
};

enum class PoleKind { RealDistinct, Coincident, ComplexConjugate };

/// Both roots of z^2 + a1 z + a2 strictly inside the unit circle:
/// |a1| < 2 and |a1| - 1 < a2 < 1.
bool jury_stable(double a1, double a2);

/// Classification by the sign of the discriminant a1^2 - 4 a2.
PoleKind classify_poles(double a1, double a2);

/// Largest root magnitude of z^2 + a1 z + a2.
double spectral_radius(double a1, double a2);

SecondOrderCoeffs conj_param_to_coeffs(ConjPoleParam p);
SecondOrderCoeffs full_param_to_coeffs(FullRegionParam p);

/// Denominator parametrization of a second-order G-block.
enum class Parametrization { Raw, Conj, Full };

const char* to_string(Parametrization p);
Parametrization parse_parametrization(const std::string& text);

/// Graph versions of the two maps. `first` and `second` are single-row nodes of
/// equal width n (rho/psi or alpha1/alpha2, one column per G-block entry); the
/// returned node is the 2n-wide coefficient row [a1 ..., a2 ...] expected by
/// Graph::gblock with na = 2.
ad::NodeId conj_denominator(ad::Graph& graph, ad::NodeId rho, ad::NodeId psi);
ad::NodeId full_denominator(ad::Graph& graph, ad::NodeId alpha1, ad::NodeId alpha2);

}  // namespace dynonet::stability
