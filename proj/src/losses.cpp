#include "curvkit/losses.hpp"

#include <algorithm>
#include <cmath>

namespace curvkit {

namespace {

const Vector& regression_target(const Label& y, std::size_t dim) {
  const auto* t = std::get_if<Vector>(&y);
  if (!t) throw DimensionError("square loss expects a vector-valued label");
  if (t->size() != dim) throw DimensionError("label dimension mismatch");
  for (double v : *t) {
    if (!std::isfinite(v)) throw NumericError("non-finite regression target");
  }
  return *t;
}

std::size_t class_index(const Label& y, std::size_t num_classes) {
  const auto* c = std::get_if<std::size_t>(&y);
  if (!c) throw DimensionError("cross-entropy expects a class-index label");
  if (*c >= num_classes) throw DimensionError("class index out of range");
  return *c;
}

}  // namespace

double reduction_factor(const LossConfig& cfg, std::size_t n, std::size_t dim_y) {
  if (n < 1 || dim_y < 1) throw DimensionError("reduction_factor: n, dim_y >= 1");
  const double denom = static_cast<double>(n) * static_cast<double>(dim_y);
  if (cfg.criterion == Criterion::SquareLoss) {
    return cfg.reduction == Reduction::Sum ? 2.0 : 2.0 / denom;
  }
  return cfg.reduction == Reduction::Sum ? 1.0 : 1.0 / denom;
}

Vector softmax(const Vector& f) {
  if (f.empty()) throw DimensionError("softmax: empty input");
  const double shift = *std::max_element(f.begin(), f.end());
  Vector s(f.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    s[i] = std::exp(f[i] - shift);
    sum += s[i];
  }
  for (double& x : s) x /= sum;
  return s;
}

double criterion_value(const LossConfig& cfg, const Vector& f, const Label& y) {
  if (cfg.criterion == Criterion::SquareLoss) {
    const Vector& t = regression_target(y, f.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double d = f[i] - t[i];
      acc += d * d;
    }
    return 0.5 * acc;
  }
  const std::size_t c = class_index(y, f.size());
  // -log softmax(f)[c], max-shifted log-sum-exp
  const double shift = *std::max_element(f.begin(), f.end());
  double lse = 0.0;
  for (double x : f) lse += std::exp(x - shift);
  return std::log(lse) - (f[c] - shift);
}

Vector criterion_gradient(const LossConfig& cfg, const Vector& f, const Label& y) {
  if (cfg.criterion == Criterion::SquareLoss) {
    const Vector& t = regression_target(y, f.size());
    Vector g(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) g[i] = f[i] - t[i];
    return g;
  }
  const std::size_t c = class_index(y, f.size());
  Vector g = softmax(f);
  g[c] -= 1.0;
  return g;
}

Matrix criterion_hessian(const LossConfig& cfg, const Vector& f) {
  if (f.empty()) throw DimensionError("criterion_hessian: empty prediction");
  if (cfg.criterion == Criterion::SquareLoss) {
    return Matrix::identity(f.size());
  }
  const Vector s = softmax(f);
  Matrix h = Matrix::diagonal(s);
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) h(i, j) -= s[i] * s[j];
  return h;
}

Matrix hessian_factorization(const LossConfig& cfg, const Vector& f) {
  if (f.empty()) throw DimensionError("hessian_factorization: empty prediction");
  if (cfg.criterion == Criterion::SquareLoss) {
    return Matrix::identity(f.size());
  }
  const Vector s = softmax(f);
  Vector sq(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) sq[i] = std::sqrt(s[i]);
  Matrix out = Matrix::diagonal(sq);
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) out(i, j) -= s[i] * sq[j];
  return out;
}

Label sample_label(const LossConfig& cfg, const Vector& f, RandomSource& rng) {
  if (cfg.criterion == Criterion::SquareLoss) {
    Vector y(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) y[i] = f[i] + rng.normal();
    return y;
  }
  const Vector s = softmax(f);
  const double u = rng.uniform();
  double cum = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    cum += s[i];
    if (u < cum) return i;  // ties break toward the lower class index
  }
  return s.size() - 1;
}

}  // namespace curvkit
