#include "dynonet/stability.hpp"

#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>

namespace dynonet::stability {

namespace {

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

bool jury_stable(double a1, double a2) {
  // a2 is the product of the two roots, hence the upper bound 1.
  return std::fabs(a1) < 2.0 && std::fabs(a1) - 1.0 < a2 && a2 < 1.0;
}

PoleKind classify_poles(double a1, double a2) {
  const double disc = a1 * a1 - 4.0 * a2;
  if (disc > 0.0) return PoleKind::RealDistinct;
  if (disc < 0.0) return PoleKind::ComplexConjugate;
  return PoleKind::Coincident;
}

double spectral_radius(double a1, double a2) {
  const std::complex<double> disc = std::sqrt(std::complex<double>(a1 * a1 - 4.0 * a2, 0.0));
  const auto r1 = (-a1 + disc) / 2.0;
  const auto r2 = (-a1 - disc) / 2.0;
  return std::max(std::abs(r1), std::abs(r2));
}

SecondOrderCoeffs conj_param_to_coeffs(ConjPoleParam p) {
  const double r = sigmoid(p.rho);
  const double beta = std::numbers::pi * sigmoid(p.psi);
  return {-2.0 * r * std::cos(beta), r * r};
}

SecondOrderCoeffs full_param_to_coeffs(FullRegionParam p) {
  const double a1 = 2.0 * std::tanh(p.alpha1);
  const double m = std::fabs(a1);
  return {a1, m + (2.0 - m) * sigmoid(p.alpha2) - 1.0};
}

const char* to_string(Parametrization p) {
  switch (p) {
    case Parametrization::Raw: return "raw";
    case Parametrization::Conj: return "conj";
    case Parametrization::Full: return "full";
  }
  return "?";
}

Parametrization parse_parametrization(const std::string& text) {
  if (text == "raw") return Parametrization::Raw;
  if (text == "conj") return Parametrization::Conj;
  if (text == "full") return Parametrization::Full;
  throw std::invalid_argument("unknown parametrization '" + text + "' (expected raw, conj or full)");
}

ad::NodeId conj_denominator(ad::Graph& graph, ad::NodeId rho, ad::NodeId psi) {
  const ad::NodeId r = graph.sigmoid(rho);
  const ad::NodeId beta = graph.scale(graph.sigmoid(psi), std::numbers::pi);
  const ad::NodeId a1 = graph.scale(graph.mul(r, graph.cos(beta)), -2.0);
  const ad::NodeId a2 = graph.mul(r, r);
  return graph.concat({a1, a2});
}

ad::NodeId full_denominator(ad::Graph& graph, ad::NodeId alpha1, ad::NodeId alpha2) {
  const ad::NodeId a1 = graph.scale(graph.tanh(alpha1), 2.0);
  const ad::NodeId m = graph.abs(a1);
  // |a1| + (2 - |a1|) * sigmoid(alpha2) - 1
  const ad::NodeId span = graph.scale(m, -1.0, 2.0);
  const ad::NodeId a2 = graph.scale(graph.add(m, graph.mul(span, graph.sigmoid(alpha2))), 1.0, -1.0);
  return graph.concat({a1, a2});
}

}  // namespace dynonet::stability
