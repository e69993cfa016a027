#include "curvkit/curvature.hpp"

#include <cmath>

#include "curvkit/rng.hpp"

namespace curvkit {

double risk_reduction_factor(const LossConfig& cfg, std::size_t n,
                             std::size_t output_dim) {
  const std::size_t dim_y =
      cfg.criterion == Criterion::SquareLoss ? output_dim : 1;
  return reduction_factor(cfg, n, dim_y);
}

namespace {

void check_data(const Network& net, const Dataset& data) {
  if (data.size() == 0) throw DimensionError("empty dataset");
  if (data.inputs.cols() != net.input_dim()) {
    throw DimensionError("dataset input width does not match network");
  }
}

Vector augmented(const Vector& x, bool with_bias) {
  Vector out = x;
  if (with_bias) out.push_back(1.0);
  return out;
}

// Accumulates sum_c J^T v_c v_c^T J for one datum into `acc`, where J is
// the layer's parameter Jacobian. Used by the Fisher variants.
void accumulate_outer(Matrix& acc, const Matrix& j, const Vector& g) {
  const Vector jg = j.transposed() * g;
  for (std::size_t i = 0; i < jg.size(); ++i) {
    if (jg[i] == 0.0) continue;
    for (std::size_t k = 0; k < jg.size(); ++k) acc(i, k) += jg[i] * jg[k];
  }
}

// Symmetrize in place; the analytic assemblies are symmetric up to
// floating-point noise and downstream PSD checks expect exact symmetry of
// the stored matrix to hold to tight tolerance.
void symmetrize(Matrix& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = i + 1; j < m.cols(); ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = v;
      m(j, i) = v;
    }
  }
}

}  // namespace

double risk_value(const Network& net, const Dataset& data,
                  const LossConfig& cfg) {
  check_data(net, data);
  const Capture cap = forward_capture(net, data.inputs);
  double acc = 0.0;
  for (std::size_t n = 0; n < data.size(); ++n) {
    acc += criterion_value(cfg, cap.prediction(n), data.labels[n]);
  }
  return risk_reduction_factor(cfg, data.size(), net.output_dim()) * acc;
}

namespace {

// Backpropagates dz from the network output, accumulating per-linear-layer
// parameter gradients (dz_l x~_l^T flattened by `order`) into `out`.
void backward_accumulate(const Network& net, const Capture& cap,
                         std::size_t datum, Vector dz, FlattenOrder order,
                         double scale, Vector& out) {
  // Layer offsets in the flattened parameter vector.
  std::size_t total = net.param_count();
  std::size_t offset_after = total;
  for (std::size_t k = net.layers().size(); k-- > 0;) {
    const Layer& layer = net.layers()[k];
    const Vector& x = cap.layer_inputs[datum][k];
    if (const auto* lin = std::get_if<LinearLayer>(&layer)) {
      const Vector xa = augmented(x, lin->bias.has_value());
      const std::size_t p = lin->weight.rows() * xa.size();
      offset_after -= p;
      const Vector part =
          flatten(Matrix::outer(dz, xa), order);
      for (std::size_t i = 0; i < p; ++i) {
        out[offset_after + i] += scale * part[i];
      }
      Vector prev(lin->weight.cols(), 0.0);
      for (std::size_t i = 0; i < lin->weight.rows(); ++i) {
        for (std::size_t j = 0; j < lin->weight.cols(); ++j) {
          prev[j] += lin->weight(i, j) * dz[i];
        }
      }
      dz = std::move(prev);
    } else {
      const Vector d =
          activation_derivative(std::get<Activation>(layer), x);
      for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= d[i];
    }
  }
}

}  // namespace

Vector risk_gradient(const Network& net, const Dataset& data,
                     const LossConfig& cfg, FlattenOrder order) {
  check_data(net, data);
  const Capture cap = forward_capture(net, data.inputs);
  const double r = risk_reduction_factor(cfg, data.size(), net.output_dim());
  Vector grad(net.param_count(), 0.0);
  for (std::size_t n = 0; n < data.size(); ++n) {
    const Vector g = criterion_gradient(cfg, cap.prediction(n), data.labels[n]);
    backward_accumulate(net, cap, n, g, order, r, grad);
  }
  return grad;
}

CurvatureBlock ggn_block(const Network& net, const Dataset& data,
                         const LossConfig& cfg, std::size_t layer_index,
                         FlattenOrder order) {
  check_data(net, data);
  const Capture cap = forward_capture(net, data.inputs);
  const std::size_t p = net.layer_param_count(layer_index);
  Matrix acc(p, p);
  for (std::size_t n = 0; n < data.size(); ++n) {
    const Matrix j = net_param_jacobian(net, cap, layer_index, n, order);
    const Matrix h = criterion_hessian(cfg, cap.prediction(n));
    acc += j.transposed() * h * j;
  }
  const double r = risk_reduction_factor(cfg, data.size(), net.output_dim());
  Matrix m = acc.scaled(r);
  symmetrize(m);
  return CurvatureBlock{layer_index, order, std::move(m)};
}

namespace {

// Full prediction Jacobian w.r.t. all linear-layer parameters for one
// datum: per-layer Jacobians concatenated in forward order.
Matrix full_param_jacobian(const Network& net, const Capture& cap,
                           std::size_t datum, FlattenOrder order) {
  const std::size_t d = net.param_count();
  Matrix j(net.output_dim(), d);
  std::size_t offset = 0;
  for (std::size_t l : net.linear_layer_indices()) {
    const Matrix jl = net_param_jacobian(net, cap, l, datum, order);
    for (std::size_t i = 0; i < jl.rows(); ++i) {
      for (std::size_t k = 0; k < jl.cols(); ++k) {
        j(i, offset + k) = jl(i, k);
      }
    }
    offset += jl.cols();
  }
  return j;
}

}  // namespace

Matrix ggn_full(const Network& net, const Dataset& data, const LossConfig& cfg,
                FlattenOrder order) {
  check_data(net, data);
  const Capture cap = forward_capture(net, data.inputs);
  const std::size_t d = net.param_count();
  Matrix acc(d, d);
  for (std::size_t n = 0; n < data.size(); ++n) {
    const Matrix j = full_param_jacobian(net, cap, n, order);
    const Matrix h = criterion_hessian(cfg, cap.prediction(n));
    acc += j.transposed() * h * j;
  }
  const double r = risk_reduction_factor(cfg, data.size(), net.output_dim());
  Matrix m = acc.scaled(r);
  symmetrize(m);
  return m;
}

Vector ggn_vector_product(const Network& net, const Dataset& data,
                          const LossConfig& cfg, FlattenOrder order,
                          const Vector& v) {
  check_data(net, data);
  if (v.size() != net.param_count()) {
    throw DimensionError("ggn_vector_product: length mismatch");
  }
  const Capture cap = forward_capture(net, data.inputs);
  const double r = risk_reduction_factor(cfg, data.size(), net.output_dim());
  Vector out(v.size(), 0.0);
  for (std::size_t n = 0; n < data.size(); ++n) {
    // JVP: push the parameter perturbation forward through the net.
    Vector du(net.input_dim(), 0.0);
    std::size_t offset = 0;
    for (std::size_t k = 0; k < net.layers().size(); ++k) {
      const Layer& layer = net.layers()[k];
      const Vector& x = cap.layer_inputs[n][k];
      if (const auto* lin = std::get_if<LinearLayer>(&layer)) {
        const Vector xa = augmented(x, lin->bias.has_value());
        const std::size_t p = lin->weight.rows() * xa.size();
        const Vector seg(v.begin() + offset, v.begin() + offset + p);
        const Matrix dw =
            unflatten_matrix(seg, lin->weight.rows(), xa.size(), order);
        Vector dz = lin->weight * du;
        const Vector shift = dw * xa;
        for (std::size_t i = 0; i < dz.size(); ++i) dz[i] += shift[i];
        du = std::move(dz);
        offset += p;
      } else {
        const Vector dphi =
            activation_derivative(std::get<Activation>(layer), x);
        for (std::size_t i = 0; i < du.size(); ++i) du[i] *= dphi[i];
      }
    }
    // HVP at the criterion, then VJP back to the parameters.
    const Vector hu = criterion_hessian(cfg, cap.prediction(n)) * du;
    backward_accumulate(net, cap, n, hu, order, r, out);
  }
  return out;
}

namespace {

template <typename GradientsForDatum>
Matrix fisher_style_full(const Network& net, const Dataset& data,
                         FlattenOrder order, double scale,
                         GradientsForDatum&& gradients) {
  const Capture cap = forward_capture(net, data.inputs);
  const std::size_t d = net.param_count();
  Matrix acc(d, d);
  for (std::size_t n = 0; n < data.size(); ++n) {
    const Matrix j = full_param_jacobian(net, cap, n, order);
    for (const Vector& g : gradients(cap, n)) accumulate_outer(acc, j, g);
  }
  Matrix m = acc.scaled(scale);
  symmetrize(m);
  return m;
}

template <typename GradientsForDatum>
Matrix fisher_style_block(const Network& net, const Dataset& data,
                          std::size_t layer_index, FlattenOrder order,
                          double scale, GradientsForDatum&& gradients) {
  const Capture cap = forward_capture(net, data.inputs);
  const std::size_t p = net.layer_param_count(layer_index);
  Matrix acc(p, p);
  for (std::size_t n = 0; n < data.size(); ++n) {
    const Matrix j = net_param_jacobian(net, cap, layer_index, n, order);
    for (const Vector& g : gradients(cap, n)) accumulate_outer(acc, j, g);
  }
  Matrix m = acc.scaled(scale);
  symmetrize(m);
  return m;
}

std::vector<Vector> mc_gradients(const LossConfig& cfg, const Vector& f,
                                 std::size_t m_samples, std::uint64_t seed,
                                 std::size_t n) {
  std::vector<Vector> out;
  out.reserve(m_samples);
  for (std::size_t m = 0; m < m_samples; ++m) {
    KeyedRng rng(seed, n, m);
    const Label y = sample_label(cfg, f, rng);
    out.push_back(criterion_gradient(cfg, f, y));
  }
  return out;
}

}  // namespace

CurvatureBlock mc_fisher_block(const Network& net, const Dataset& data,
                               const LossConfig& cfg, std::size_t layer_index,
                               FlattenOrder order, std::size_t m_samples,
                               std::uint64_t seed) {
  check_data(net, data);
  if (m_samples < 1) throw DimensionError("mc_fisher_block: m_samples >= 1");
  const double r = risk_reduction_factor(cfg, data.size(), net.output_dim());
  Matrix m = fisher_style_block(
      net, data, layer_index, order, r / static_cast<double>(m_samples),
      [&](const Capture& cap, std::size_t n) {
        return mc_gradients(cfg, cap.prediction(n), m_samples, seed, n);
      });
  return CurvatureBlock{layer_index, order, std::move(m)};
}

Matrix mc_fisher_full(const Network& net, const Dataset& data,
                      const LossConfig& cfg, FlattenOrder order,
                      std::size_t m_samples, std::uint64_t seed) {
  check_data(net, data);
  if (m_samples < 1) throw DimensionError("mc_fisher_full: m_samples >= 1");
  const double r = risk_reduction_factor(cfg, data.size(), net.output_dim());
  return fisher_style_full(net, data, order,
                           r / static_cast<double>(m_samples),
                           [&](const Capture& cap, std::size_t n) {
                             return mc_gradients(cfg, cap.prediction(n),
                                                 m_samples, seed, n);
                           });
}

CurvatureBlock empirical_fisher_block(const Network& net, const Dataset& data,
                                      const LossConfig& cfg,
                                      std::size_t layer_index,
                                      FlattenOrder order) {
  check_data(net, data);
  const double r = risk_reduction_factor(cfg, data.size(), net.output_dim());
  Matrix m = fisher_style_block(
      net, data, layer_index, order, r,
      [&](const Capture& cap, std::size_t n) {
        return std::vector<Vector>{
            criterion_gradient(cfg, cap.prediction(n), data.labels[n])};
      });
  return CurvatureBlock{layer_index, order, std::move(m)};
}

Matrix empirical_fisher_full(const Network& net, const Dataset& data,
                             const LossConfig& cfg, FlattenOrder order) {
  check_data(net, data);
  const double r = risk_reduction_factor(cfg, data.size(), net.output_dim());
  return fisher_style_full(
      net, data, order, r, [&](const Capture& cap, std::size_t n) {
        return std::vector<Vector>{
            criterion_gradient(cfg, cap.prediction(n), data.labels[n])};
      });
}

CurvatureBlock curvature_block(const Network& net, const Dataset& data,
                               const LossConfig& cfg, std::size_t layer_index,
                               FlattenOrder order, const CurvatureKind& kind) {
  switch (kind.tag) {
    case CurvatureKindTag::GgnTypeII:
      return ggn_block(net, data, cfg, layer_index, order);
    case CurvatureKindTag::McFisher:
      return mc_fisher_block(net, data, cfg, layer_index, order,
                             kind.m_samples, kind.seed);
    case CurvatureKindTag::EmpiricalFisher:
      return empirical_fisher_block(net, data, cfg, layer_index, order);
  }
  throw UnsupportedError("curvature_block: unknown kind");
}

Matrix fd_hessian_of_gradient(
    const std::function<Vector(const Vector&)>& gradient, const Vector& x,
    double h_base) {
  const std::size_t d = x.size();
  Matrix h(d, d);
  for (std::size_t k = 0; k < d; ++k) {
    const double step = h_base * std::max(1.0, std::abs(x[k]));
    Vector plus = x, minus = x;
    plus[k] += step;
    minus[k] -= step;
    const Vector gp = gradient(plus);
    const Vector gm = gradient(minus);
    for (std::size_t i = 0; i < d; ++i) {
      h(i, k) = (gp[i] - gm[i]) / (2.0 * step);
    }
  }
  return h;
}

Matrix hessian_full_fd(const Network& net, const Dataset& data,
                       const LossConfig& cfg, FlattenOrder order) {
  check_data(net, data);
  if (net.has_relu()) {
    throw UnsupportedError(
        "hessian_full_fd: ReLU networks are not supported (finite "
        "differences need smooth activations)");
  }
  Network work = net;
  const Vector theta = net.get_parameters(order);
  return fd_hessian_of_gradient(
      [&](const Vector& t) {
        work.set_parameters(t, order);
        return risk_gradient(work, data, cfg, order);
      },
      theta);
}

}  // namespace curvkit
