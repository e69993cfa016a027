#pragma once

#include "curvkit/curvature.hpp"

namespace curvkit {

// Criterion-space vectors backpropagated to build the grad-output factor.
// Type-II: the dim(F) columns of the Hessian factorization S. MC: M
// gradients at sampled labels. Empirical: one gradient at the true label.
std::vector<Vector> backprop_vectors(const CurvatureKind& kind,
                                     const LossConfig& cfg, const Vector& f,
                                     const Label& y, RandomSource& rng);

// Kronecker factors of the per-layer KFAC approximation:
//   A = R sum_n x~_n x~_n^T        (input-based)
//   B = (1/(N*M)) sum_n sum_c g_nc g_nc^T   (grad-output-based; M = samples
//       per datum for the MC kind, 1 otherwise)
// Materializes as A (x) B for cvec and B (x) A for rvec.
struct KfacBlock {
  std::size_t layer_index = 0;
  FlattenOrder order = FlattenOrder::Cvec;
  Matrix input_factor;        // A, (D_in + bias)^2
  Matrix grad_output_factor;  // B, D_out^2
};

struct KfacOptions {
  // When false, skip the [x; 1] augmentation and approximate the
  // weight-only block instead of the combined [W b] block.
  bool augment_bias = true;
};

KfacBlock kfac_block(const Network& net, const Dataset& data,
                     const LossConfig& cfg, std::size_t layer_index,
                     const CurvatureKind& kind, FlattenOrder order,
                     std::uint64_t seed, const KfacOptions& options = {});

Matrix kfac_materialize(const KfacBlock& block,
                        std::size_t element_cap = kDefaultKronElementCap);

enum class ResidualMetric { Frobenius, Spectral };

// ||materialized KFAC - exact|| / ||exact|| in the chosen norm.
double kfac_residual(const KfacBlock& block, const CurvatureBlock& exact,
                     ResidualMetric metric);
double relative_residual(const Matrix& approx, const Matrix& exact,
                         ResidualMetric metric);

// Frobenius-optimal B for fitting I (x) B to sum_n cvec(g_n) cvec(g_n)^T:
// simply (1/N) sum_n g_n g_n^T.
Matrix kfac_expectation_fit(const std::vector<Vector>& gradients);

}  // namespace curvkit
