#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "curvkit/matrix.hpp"
#include "curvkit/nn.hpp"
#include "curvkit/rng.hpp"

namespace test_util {

using curvkit::Matrix;
using curvkit::Vector;

inline Vector random_vector(std::size_t n, std::uint64_t seed) {
  curvkit::KeyedRng rng(seed);
  Vector v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols,
                            std::uint64_t seed) {
  curvkit::KeyedRng rng(seed);
  Matrix m(rows, cols);
  for (double& x : m.values()) x = rng.normal();
  return m;
}

inline Matrix random_symmetric(std::size_t n, std::uint64_t seed) {
  Matrix a = random_matrix(n, n, seed);
  Matrix s(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) s(i, j) = 0.5 * (a(i, j) + a(j, i));
  return s;
}

inline Matrix random_spd(std::size_t n, std::uint64_t seed) {
  Matrix a = random_matrix(n, n, seed);
  Matrix s = a * a.transposed();
  for (std::size_t i = 0; i < n; ++i) s(i, i) += 1.0;
  return s;
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi sweeps. Independent
// oracle for the power-iteration spectral norm.
inline std::vector<double> jacobi_eigenvalues(Matrix a,
                                              std::size_t sweeps = 100) {
  const std::size_t n = a.rows();
  for (std::size_t s = 0; s < sweeps; ++s) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-24) break;
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eigs(n);
  for (std::size_t i = 0; i < n; ++i) eigs[i] = a(i, i);
  return eigs;
}

// Central finite-difference Jacobian of a vector-to-vector function.
inline Matrix fd_jacobian(const std::function<Vector(const Vector&)>& f,
                          const Vector& x, double h = 1e-5) {
  const Vector f0 = f(x);
  Matrix j(f0.size(), x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    Vector plus = x, minus = x;
    const double step = h * std::max(1.0, std::abs(x[k]));
    plus[k] += step;
    minus[k] -= step;
    const Vector fp = f(plus), fm = f(minus);
    for (std::size_t i = 0; i < f0.size(); ++i) {
      j(i, k) = (fp[i] - fm[i]) / (2.0 * step);
    }
  }
  return j;
}

inline Vector fd_gradient(const std::function<double(const Vector&)>& f,
                          const Vector& x, double h = 1e-5) {
  Vector g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    Vector plus = x, minus = x;
    const double step = h * std::max(1.0, std::abs(x[k]));
    plus[k] += step;
    minus[k] -= step;
    g[k] = (f(plus) - f(minus)) / (2.0 * step);
  }
  return g;
}

// MLP with the given layer widths, an activation between linear layers.
inline curvkit::Network make_mlp(const std::vector<std::size_t>& widths,
                                 curvkit::Activation act, std::uint64_t seed,
                                 bool with_bias = true) {
  std::vector<curvkit::Layer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    curvkit::KeyedRng rng(seed, l);
    curvkit::LinearLayer lin;
    lin.weight = Matrix(widths[l + 1], widths[l]);
    for (double& w : lin.weight.values()) w = 0.6 * rng.normal();
    if (with_bias) {
      Vector b(widths[l + 1]);
      for (double& x : b) x = 0.2 * rng.normal();
      lin.bias = std::move(b);
    }
    layers.emplace_back(std::move(lin));
    if (l + 2 < widths.size()) layers.emplace_back(act);
  }
  return curvkit::Network(std::move(layers), widths.front());
}

inline curvkit::Network make_deep_linear(const std::vector<std::size_t>& widths,
                                         std::uint64_t seed,
                                         bool with_bias = true) {
  std::vector<curvkit::Layer> layers;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    curvkit::KeyedRng rng(seed, l);
    curvkit::LinearLayer lin;
    lin.weight = Matrix(widths[l + 1], widths[l]);
    for (double& w : lin.weight.values()) w = 0.6 * rng.normal();
    if (with_bias) {
      Vector b(widths[l + 1]);
      for (double& x : b) x = 0.2 * rng.normal();
      lin.bias = std::move(b);
    }
    layers.emplace_back(std::move(lin));
  }
  return curvkit::Network(std::move(layers), widths.front());
}

inline double rel_frobenius_diff(const Matrix& a, const Matrix& b) {
  return curvkit::frobenius_norm(a - b) /
         std::max(1e-300, curvkit::frobenius_norm(b));
}

}  // namespace test_util
