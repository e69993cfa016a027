#pragma once

#include <cstddef>
#include <variant>

#include "curvkit/matrix.hpp"
#include "curvkit/rng.hpp"

namespace curvkit {

enum class Criterion { SquareLoss, SoftmaxCrossEntropy };
enum class Reduction { Sum, Mean };

struct LossConfig {
  Criterion criterion = Criterion::SquareLoss;
  Reduction reduction = Reduction::Mean;
};

// Regression target (vector of dim C) or 0-based class index.
using Label = std::variant<Vector, std::size_t>;

// Scalar R multiplying the summed per-datum criteria in the empirical risk.
// Square loss: sum -> 2, mean -> 2/(n*dim_y). Cross-entropy: sum -> 1,
// mean -> 1/(n*dim_y), with dim_y = 1 for plain class labels.
double reduction_factor(const LossConfig& cfg, std::size_t n, std::size_t dim_y);

double criterion_value(const LossConfig& cfg, const Vector& f, const Label& y);

// Square loss: f - y. Cross-entropy: softmax(f) - onehot(y).
Vector criterion_gradient(const LossConfig& cfg, const Vector& f, const Label& y);

// Square loss: I. Cross-entropy: diag(s) - s s^T, s = softmax(f). Both are
// independent of the label.
Matrix criterion_hessian(const LossConfig& cfg, const Vector& f);

// S with S S^T == criterion_hessian. Square loss: I. Cross-entropy:
// diag(sqrt(s)) - s sqrt(s)^T.
Matrix hessian_factorization(const LossConfig& cfg, const Vector& f);

// Draw a label from the predictive distribution induced by the criterion:
// unit-covariance Gaussian around f for the square loss, categorical with
// probabilities softmax(f) for cross-entropy.
Label sample_label(const LossConfig& cfg, const Vector& f, RandomSource& rng);

// Numerically stable softmax (max-shifted).
Vector softmax(const Vector& f);

}  // namespace curvkit
