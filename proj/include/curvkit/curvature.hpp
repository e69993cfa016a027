#pragma once

#include <cstdint>
#include <functional>

#include "curvkit/dataset.hpp"
#include "curvkit/losses.hpp"
#include "curvkit/nn.hpp"

namespace curvkit {

enum class CurvatureKindTag { GgnTypeII, McFisher, EmpiricalFisher };

struct CurvatureKind {
  CurvatureKindTag tag = CurvatureKindTag::GgnTypeII;
  std::size_t m_samples = 1;  // MC only, >= 1
  std::uint64_t seed = 0;     // MC only

  static CurvatureKind ggn() { return {CurvatureKindTag::GgnTypeII, 1, 0}; }
  static CurvatureKind mc_fisher(std::size_t m, std::uint64_t seed) {
    return {CurvatureKindTag::McFisher, m, seed};
  }
  static CurvatureKind empirical() {
    return {CurvatureKindTag::EmpiricalFisher, 1, 0};
  }
};

struct CurvatureBlock {
  std::size_t layer_index = 0;
  FlattenOrder order = FlattenOrder::Cvec;
  Matrix matrix;  // P x P, P = flattened parameter count of the layer
};

// Reduction factor for a network/loss pair: dim_y is the output dimension
// for the square loss and 1 for class labels.
double risk_reduction_factor(const LossConfig& cfg, std::size_t n,
                             std::size_t output_dim);

double risk_value(const Network& net, const Dataset& data,
                  const LossConfig& cfg);

// R * sum_n J_n^T grad c(f_n, y_n), over all linear-layer parameters.
Vector risk_gradient(const Network& net, const Dataset& data,
                     const LossConfig& cfg, FlattenOrder order);

// --- exact curvature matrices ----------------------------------------------

// R * sum_n J_n^T H_n J_n restricted to one linear layer's parameters.
CurvatureBlock ggn_block(const Network& net, const Dataset& data,
                         const LossConfig& cfg, std::size_t layer_index,
                         FlattenOrder order);

// Full GGN over the concatenated parameters, cross-layer blocks included.
Matrix ggn_full(const Network& net, const Dataset& data, const LossConfig& cfg,
                FlattenOrder order);

// G v computed per datum as J^T (H (J v)), matrix-free in the full GGN.
Vector ggn_vector_product(const Network& net, const Dataset& data,
                          const LossConfig& cfg, FlattenOrder order,
                          const Vector& v);

// (R/M) * sum_n sum_m J_n^T g_nm g_nm^T J_n, labels sampled from the
// predictive distribution with a (seed, n, m)-keyed stream.
CurvatureBlock mc_fisher_block(const Network& net, const Dataset& data,
                               const LossConfig& cfg, std::size_t layer_index,
                               FlattenOrder order, std::size_t m_samples,
                               std::uint64_t seed);
Matrix mc_fisher_full(const Network& net, const Dataset& data,
                      const LossConfig& cfg, FlattenOrder order,
                      std::size_t m_samples, std::uint64_t seed);

// R * sum_n J_n^T g_n g_n^T J_n with gradients at the true labels.
CurvatureBlock empirical_fisher_block(const Network& net, const Dataset& data,
                                      const LossConfig& cfg,
                                      std::size_t layer_index,
                                      FlattenOrder order);
Matrix empirical_fisher_full(const Network& net, const Dataset& data,
                             const LossConfig& cfg, FlattenOrder order);

CurvatureBlock curvature_block(const Network& net, const Dataset& data,
                               const LossConfig& cfg, std::size_t layer_index,
                               FlattenOrder order, const CurvatureKind& kind);

// --- finite-difference Hessian oracle --------------------------------------

// Central differences of a gradient function; shared FD core for the full
// risk Hessian and the closed-form reference problems.
Matrix fd_hessian_of_gradient(
    const std::function<Vector(const Vector&)>& gradient, const Vector& x,
    double h_base = 1e-5);

// Full parameter Hessian of the empirical risk via central differences of
// the analytic gradient. Smooth activations only; refuses ReLU.
Matrix hessian_full_fd(const Network& net, const Dataset& data,
                       const LossConfig& cfg, FlattenOrder order);

}  // namespace curvkit
