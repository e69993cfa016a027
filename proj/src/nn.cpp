#include "curvkit/nn.hpp"

#include <cmath>

namespace curvkit {

bool is_linear(const Layer& layer) {
  return std::holds_alternative<LinearLayer>(layer);
}

Network::Network(std::vector<Layer> layers, std::size_t input_dim)
    : layers_(std::move(layers)), input_dim_(input_dim) {
  if (layers_.empty()) throw DimensionError("Network: no layers");
  std::size_t dim = input_dim_;
  dims_.push_back(dim);
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (const auto* lin = std::get_if<LinearLayer>(&layers_[i])) {
      if (lin->weight.cols() != dim) {
        throw DimensionError("Network: layer " + std::to_string(i) +
                             " expects input dim " +
                             std::to_string(lin->weight.cols()) + ", got " +
                             std::to_string(dim));
      }
      if (lin->bias && lin->bias->size() != lin->weight.rows()) {
        throw DimensionError("Network: layer " + std::to_string(i) +
                             " bias length mismatch");
      }
      dim = lin->weight.rows();
    }
    dims_.push_back(dim);
  }
  output_dim_ = dim;
}

std::vector<std::size_t> Network::linear_layer_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (is_linear(layers_[i])) out.push_back(i);
  }
  return out;
}

bool Network::has_relu() const {
  for (const Layer& l : layers_) {
    if (const auto* a = std::get_if<Activation>(&l)) {
      if (*a == Activation::ReLU) return true;
    }
  }
  return false;
}

std::size_t Network::layer_param_count(std::size_t i) const {
  const auto* lin = std::get_if<LinearLayer>(&layers_.at(i));
  if (!lin) throw UnsupportedError("layer_param_count: not a linear layer");
  return lin->weight.rows() * (lin->weight.cols() + (lin->bias ? 1 : 0));
}

std::size_t Network::param_count() const {
  std::size_t total = 0;
  for (std::size_t i : linear_layer_indices()) total += layer_param_count(i);
  return total;
}

namespace {

// Combined matrix [W b] when bias is present, else W.
Matrix combined_params(const LinearLayer& lin) {
  if (!lin.bias) return lin.weight;
  Matrix wb(lin.weight.rows(), lin.weight.cols() + 1);
  for (std::size_t i = 0; i < lin.weight.rows(); ++i) {
    for (std::size_t j = 0; j < lin.weight.cols(); ++j) {
      wb(i, j) = lin.weight(i, j);
    }
    wb(i, lin.weight.cols()) = (*lin.bias)[i];
  }
  return wb;
}

void split_combined(const Matrix& wb, LinearLayer& lin) {
  for (std::size_t i = 0; i < lin.weight.rows(); ++i) {
    for (std::size_t j = 0; j < lin.weight.cols(); ++j) {
      lin.weight(i, j) = wb(i, j);
    }
    if (lin.bias) (*lin.bias)[i] = wb(i, lin.weight.cols());
  }
}

}  // namespace

Vector Network::get_parameters(FlattenOrder order) const {
  Vector theta;
  theta.reserve(param_count());
  for (std::size_t i : linear_layer_indices()) {
    const auto& lin = std::get<LinearLayer>(layers_[i]);
    Vector part = flatten(combined_params(lin), order);
    theta.insert(theta.end(), part.begin(), part.end());
  }
  return theta;
}

void Network::set_parameters(const Vector& theta, FlattenOrder order) {
  if (theta.size() != param_count()) {
    throw DimensionError("set_parameters: length mismatch");
  }
  std::size_t offset = 0;
  for (std::size_t i : linear_layer_indices()) {
    auto& lin = std::get<LinearLayer>(layers_[i]);
    const std::size_t rows = lin.weight.rows();
    const std::size_t cols = lin.weight.cols() + (lin.bias ? 1 : 0);
    Vector part(theta.begin() + offset, theta.begin() + offset + rows * cols);
    split_combined(unflatten_matrix(part, rows, cols, order), lin);
    offset += rows * cols;
  }
}

namespace {

double apply_activation(Activation kind, double x) {
  switch (kind) {
    case Activation::ReLU: return x > 0.0 ? x : 0.0;
    case Activation::Tanh: return std::tanh(x);
    case Activation::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
    case Activation::Identity: return x;
  }
  return x;
}

Vector layer_forward(const Layer& layer, const Vector& x) {
  if (const auto* lin = std::get_if<LinearLayer>(&layer)) {
    Vector z = lin->weight * x;
    if (lin->bias) {
      for (std::size_t i = 0; i < z.size(); ++i) z[i] += (*lin->bias)[i];
    }
    return z;
  }
  const Activation kind = std::get<Activation>(layer);
  Vector z(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) z[i] = apply_activation(kind, x[i]);
  return z;
}

}  // namespace

Vector Network::forward(const Vector& x) const {
  if (x.size() != input_dim_) throw DimensionError("forward: input dim mismatch");
  Vector cur = x;
  for (const Layer& l : layers_) cur = layer_forward(l, cur);
  return cur;
}

Capture forward_capture(const Network& net, const Matrix& inputs) {
  if (inputs.cols() != net.input_dim()) {
    throw DimensionError("forward_capture: input width mismatch");
  }
  Capture cap;
  cap.layer_inputs.resize(inputs.rows());
  cap.layer_outputs.resize(inputs.rows());
  for (std::size_t n = 0; n < inputs.rows(); ++n) {
    Vector cur = inputs.row(n);
    for (const Layer& l : net.layers()) {
      cap.layer_inputs[n].push_back(cur);
      cur = layer_forward(l, cur);
      cap.layer_outputs[n].push_back(cur);
    }
  }
  return cap;
}

Matrix linear_param_jacobian(const Vector& x, std::size_t d_out,
                             FlattenOrder order, bool with_bias) {
  Vector aug = x;
  if (with_bias) aug.push_back(1.0);
  Matrix xt(1, aug.size(), aug);  // x~^T as a row
  const Matrix eye = Matrix::identity(d_out);
  return order == FlattenOrder::Cvec ? kron(xt, eye) : kron(eye, xt);
}

Vector activation_derivative(Activation kind, const Vector& x) {
  Vector d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    switch (kind) {
      case Activation::ReLU:
        d[i] = x[i] > 0.0 ? 1.0 : 0.0;  // derivative at 0 defined as 0
        break;
      case Activation::Tanh: {
        const double t = std::tanh(x[i]);
        d[i] = 1.0 - t * t;
        break;
      }
      case Activation::Sigmoid: {
        const double s = 1.0 / (1.0 + std::exp(-x[i]));
        d[i] = s * (1.0 - s);
        break;
      }
      case Activation::Identity:
        d[i] = 1.0;
        break;
    }
  }
  return d;
}

Matrix layer_input_jacobian(const Layer& layer, const Vector& x) {
  if (const auto* lin = std::get_if<LinearLayer>(&layer)) {
    if (x.size() != lin->weight.cols()) {
      throw DimensionError("layer_input_jacobian: input dim mismatch");
    }
    return lin->weight;
  }
  return Matrix::diagonal(
      activation_derivative(std::get<Activation>(layer), x));
}

Matrix net_jacobian_from_layer(const Network& net, const Capture& capture,
                               std::size_t layer_index, std::size_t datum) {
  if (layer_index >= net.layers().size() || datum >= capture.num_data()) {
    throw DimensionError("net_jacobian_from_layer: index out of range");
  }
  Matrix j = Matrix::identity(net.layer_output_dim(layer_index));
  for (std::size_t k = layer_index + 1; k < net.layers().size(); ++k) {
    j = layer_input_jacobian(net.layers()[k],
                             capture.layer_inputs[datum][k]) *
        j;
  }
  return j;
}

Vector vjp_to_layer(const Network& net, const Capture& capture,
                    std::size_t layer_index, std::size_t datum,
                    const Vector& v) {
  if (layer_index >= net.layers().size() || datum >= capture.num_data()) {
    throw DimensionError("vjp_to_layer: index out of range");
  }
  if (v.size() != net.output_dim()) {
    throw DimensionError("vjp_to_layer: vector dim mismatch");
  }
  Vector cur = v;
  for (std::size_t k = net.layers().size(); k-- > layer_index + 1;) {
    const Layer& layer = net.layers()[k];
    const Vector& x = capture.layer_inputs[datum][k];
    if (const auto* lin = std::get_if<LinearLayer>(&layer)) {
      Vector next(lin->weight.cols(), 0.0);
      for (std::size_t i = 0; i < lin->weight.rows(); ++i) {
        for (std::size_t j = 0; j < lin->weight.cols(); ++j) {
          next[j] += lin->weight(i, j) * cur[i];
        }
      }
      cur = std::move(next);
    } else {
      const Vector d = activation_derivative(std::get<Activation>(layer), x);
      for (std::size_t i = 0; i < cur.size(); ++i) cur[i] *= d[i];
    }
  }
  return cur;
}

Matrix net_param_jacobian(const Network& net, const Capture& capture,
                          std::size_t layer_index, std::size_t datum,
                          FlattenOrder order) {
  const auto* lin = std::get_if<LinearLayer>(&net.layers().at(layer_index));
  if (!lin) throw UnsupportedError("net_param_jacobian: not a linear layer");
  const Matrix downstream =
      net_jacobian_from_layer(net, capture, layer_index, datum);
  const Matrix local = linear_param_jacobian(
      capture.layer_inputs[datum][layer_index], lin->weight.rows(), order,
      lin->bias.has_value());
  return downstream * local;
}

}  // namespace curvkit
