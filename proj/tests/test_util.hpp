#pragma once

#include <cmath>
#include <complex>
#include <random>
#include <span>
#include <vector>

#include "dynonet/signal.hpp"

namespace testutil {

using dynonet::TimeSeries;
using dynonet::TransferFunction;

inline std::vector<double> randn(std::size_t n, std::mt19937_64& rng, double sigma = 1.0) {
  std::normal_distribution<double> d(0.0, sigma);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

inline std::vector<double> randu(std::size_t n, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(rng);
  return v;
}

inline TimeSeries random_series(std::size_t T, std::size_t c, std::mt19937_64& rng) {
  return TimeSeries(T, c, randn(T * c, rng));
}

/// Monic polynomial coefficients (without the leading 1) from its roots.
inline std::vector<double> poly_from_roots(const std::vector<std::complex<double>>& roots) {
  std::vector<std::complex<double>> p{1.0};
  for (const auto& r : roots) {
    std::vector<std::complex<double>> next(p.size() + 1, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      next[i] += p[i];
      next[i + 1] -= r * p[i];
    }
    p = std::move(next);
  }
  std::vector<double> a;
  for (std::size_t i = 1; i < p.size(); ++i) a.push_back(p[i].real());
  return a;
}

/// Denominator of order na with every pole of magnitude <= max_radius.
inline std::vector<double> random_stable_denominator(std::size_t na, std::mt19937_64& rng, double max_radius = 0.95) {
  std::uniform_real_distribution<double> radius(0.0, max_radius);
  std::uniform_real_distribution<double> angle(0.0, M_PI);
  std::vector<std::complex<double>> roots;
  while (roots.size() + 2 <= na) {
    const auto z = std::polar(radius(rng), angle(rng));
    roots.push_back(z);
    roots.push_back(std::conj(z));
  }
  if (roots.size() < na) roots.emplace_back(radius(rng) * (angle(rng) < M_PI / 2 ? 1.0 : -1.0), 0.0);
  return poly_from_roots(roots);
}

inline TransferFunction random_stable_tf(std::size_t nb, std::size_t na, std::mt19937_64& rng,
                                         double max_radius = 0.95) {
  return {randn(nb + 1, rng), random_stable_denominator(na, rng, max_radius)};
}

inline double dot(std::span<const double> x, std::span<const double> y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) acc += x[i] * y[i];
  return acc;
}

inline double max_abs_diff(std::span<const double> x, std::span<const double> y) {
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, std::fabs(x[i] - y[i]));
  return m;
}

inline double max_abs(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::fabs(v));
  return m;
}

/// Central differences of f at theta with step rel_step * max(1, |theta_i|).
template <class F>
std::vector<double> central_diff(F&& f, std::vector<double> theta, double rel_step = 1e-6) {
  std::vector<double> g(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    const double h = rel_step * std::max(1.0, std::fabs(saved));
    theta[i] = saved + h;
    const double up = f(theta);
    theta[i] = saved - h;
    const double down = f(theta);
    theta[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// max_i |a_i - n_i| / max(|a_i|, |n_i|, floor)
inline double max_rel_error(std::span<const double> analytic, std::span<const double> numeric, double floor = 1e-8) {
  double m = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric[i]), floor});
    m = std::max(m, std::fabs(analytic[i] - numeric[i]) / denom);
  }
  return m;
}

/// Direct evaluation of y(t) = sum b_k u(t-k) - sum a_k y(t-k).
inline std::vector<double> naive_recurrence(const TransferFunction& tf, std::span<const double> u) {
  std::vector<double> y(u.size(), 0.0);
  for (std::size_t t = 0; t < u.size(); ++t) {
    double acc = 0.0;
    for (std::size_t k = 0; k < tf.b.size(); ++k) {
      if (k <= t) acc += tf.b[k] * u[t - k];
    }
    for (std::size_t k = 1; k <= tf.a.size(); ++k) {
      if (k <= t) acc -= tf.a[k - 1] * y[t - k];
    }
    y[t] = acc;
  }
  return y;
}

}  // namespace testutil
