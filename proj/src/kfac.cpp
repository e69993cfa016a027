#include "curvkit/kfac.hpp"

#include <cmath>

#include "curvkit/rng.hpp"

namespace curvkit {

std::vector<Vector> backprop_vectors(const CurvatureKind& kind,
                                     const LossConfig& cfg, const Vector& f,
                                     const Label& y, RandomSource& rng) {
  switch (kind.tag) {
    case CurvatureKindTag::GgnTypeII: {
      const Matrix s = hessian_factorization(cfg, f);
      std::vector<Vector> cols;
      cols.reserve(s.cols());
      for (std::size_t c = 0; c < s.cols(); ++c) cols.push_back(s.col(c));
      return cols;
    }
    case CurvatureKindTag::McFisher: {
      std::vector<Vector> grads;
      grads.reserve(kind.m_samples);
      for (std::size_t m = 0; m < kind.m_samples; ++m) {
        const Label sampled = sample_label(cfg, f, rng);
        grads.push_back(criterion_gradient(cfg, f, sampled));
      }
      return grads;
    }
    case CurvatureKindTag::EmpiricalFisher:
      return {criterion_gradient(cfg, f, y)};
  }
  throw UnsupportedError("backprop_vectors: unknown kind");
}

KfacBlock kfac_block(const Network& net, const Dataset& data,
                     const LossConfig& cfg, std::size_t layer_index,
                     const CurvatureKind& kind, FlattenOrder order,
                     std::uint64_t seed, const KfacOptions& options) {
  const auto* lin = std::get_if<LinearLayer>(&net.layers().at(layer_index));
  if (!lin) throw UnsupportedError("kfac_block: not a linear layer");
  if (data.size() == 0) throw DimensionError("kfac_block: empty dataset");

  const Capture cap = forward_capture(net, data.inputs);
  const std::size_t n_data = data.size();
  const bool augment = options.augment_bias && lin->bias.has_value();
  const std::size_t a_dim = lin->weight.cols() + (augment ? 1 : 0);
  const std::size_t b_dim = lin->weight.rows();
  const double r = risk_reduction_factor(cfg, n_data, net.output_dim());

  Matrix a(a_dim, a_dim);
  Matrix b(b_dim, b_dim);
  std::size_t backprop_count_per_datum = 0;
  for (std::size_t n = 0; n < n_data; ++n) {
    Vector x = cap.layer_inputs[n][layer_index];
    if (augment) x.push_back(1.0);
    for (std::size_t i = 0; i < a_dim; ++i) {
      for (std::size_t j = 0; j < a_dim; ++j) a(i, j) += x[i] * x[j];
    }

    // MC samples use the same (seed, n, m) keys as the exact MC Fisher, so
    // the two draw identical labels.
    std::vector<Vector> deltas;
    if (kind.tag == CurvatureKindTag::McFisher) {
      const CurvatureKind single = CurvatureKind::mc_fisher(1, seed);
      for (std::size_t m = 0; m < kind.m_samples; ++m) {
        KeyedRng rng(seed, n, m);
        Vector g = backprop_vectors(single, cfg, cap.prediction(n),
                                    data.labels[n], rng)
                       .front();
        deltas.push_back(std::move(g));
      }
    } else {
      KeyedRng rng(seed, n);
      deltas = backprop_vectors(kind, cfg, cap.prediction(n), data.labels[n],
                                rng);
    }
    backprop_count_per_datum = deltas.size();
    for (const Vector& delta : deltas) {
      const Vector g = vjp_to_layer(net, cap, layer_index, n, delta);
      for (std::size_t i = 0; i < b_dim; ++i) {
        for (std::size_t j = 0; j < b_dim; ++j) b(i, j) += g[i] * g[j];
      }
    }
  }

  a = a.scaled(r);
  // B's normalizer: N for type-II/empirical (the per-datum sum over c has
  // no average), N*M for MC where the M samples estimate an expectation.
  const double b_norm =
      kind.tag == CurvatureKindTag::McFisher
          ? static_cast<double>(n_data) *
                static_cast<double>(backprop_count_per_datum)
          : static_cast<double>(n_data);
  b = b.scaled(1.0 / b_norm);
  return KfacBlock{layer_index, order, std::move(a), std::move(b)};
}

Matrix kfac_materialize(const KfacBlock& block, std::size_t element_cap) {
  return block.order == FlattenOrder::Cvec
             ? kron(block.input_factor, block.grad_output_factor, element_cap)
             : kron(block.grad_output_factor, block.input_factor, element_cap);
}

double relative_residual(const Matrix& approx, const Matrix& exact,
                         ResidualMetric metric) {
  if (!approx.same_shape(exact)) {
    throw DimensionError("relative_residual: shapes differ");
  }
  const Matrix diff = approx - exact;
  if (metric == ResidualMetric::Frobenius) {
    return frobenius_norm(diff) / frobenius_norm(exact);
  }
  return spectral_norm(diff) / spectral_norm(exact);
}

double kfac_residual(const KfacBlock& block, const CurvatureBlock& exact,
                     ResidualMetric metric) {
  if (block.order != exact.order) {
    throw DimensionError("kfac_residual: flattening orders differ");
  }
  return relative_residual(kfac_materialize(block), exact.matrix, metric);
}

Matrix kfac_expectation_fit(const std::vector<Vector>& gradients) {
  if (gradients.empty()) {
    throw DimensionError("kfac_expectation_fit: no gradients");
  }
  const std::size_t dim = gradients.front().size();
  Matrix b(dim, dim);
  for (const Vector& g : gradients) {
    if (g.size() != dim) {
      throw DimensionError("kfac_expectation_fit: ragged gradients");
    }
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = 0; j < dim; ++j) b(i, j) += g[i] * g[j];
    }
  }
  return b.scaled(1.0 / static_cast<double>(gradients.size()));
}

}  // namespace curvkit
