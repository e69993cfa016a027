#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "curvkit/matrix.hpp"

namespace curvkit {

enum class Activation { ReLU, Tanh, Sigmoid, Identity };

struct LinearLayer {
  Matrix weight;                // D_out x D_in
  std::optional<Vector> bias;   // length D_out when present
};

// A layer is either an affine map or a parameter-free pointwise activation.
using Layer = std::variant<LinearLayer, Activation>;

bool is_linear(const Layer& layer);

// Sequential network. Adjacent layer dimensions must chain; activations are
// dimension-preserving.
class Network {
 public:
  Network(std::vector<Layer> layers, std::size_t input_dim);

  const std::vector<Layer>& layers() const { return layers_; }
  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return output_dim_; }

  // Input dimension seen by layer i.
  std::size_t layer_input_dim(std::size_t i) const { return dims_[i]; }
  std::size_t layer_output_dim(std::size_t i) const { return dims_[i + 1]; }

  std::vector<std::size_t> linear_layer_indices() const;
  bool has_relu() const;

  // Flattened parameter count of linear layer i: D_out * (D_in + bias).
  std::size_t layer_param_count(std::size_t i) const;
  std::size_t param_count() const;

  // Parameters of all linear layers, forward order; within a layer the
  // combined matrix [W b] is flattened with the given order.
  Vector get_parameters(FlattenOrder order) const;
  void set_parameters(const Vector& theta, FlattenOrder order);

  Vector forward(const Vector& x) const;

 private:
  std::vector<Layer> layers_;
  std::size_t input_dim_;
  std::size_t output_dim_;
  std::vector<std::size_t> dims_;  // dims_[i] = input dim of layer i
};

// Recorded forward pass: per datum, the input and output of every layer.
struct Capture {
  // per datum n, per layer i
  std::vector<std::vector<Vector>> layer_inputs;
  std::vector<std::vector<Vector>> layer_outputs;

  std::size_t num_data() const { return layer_inputs.size(); }
  const Vector& prediction(std::size_t n) const {
    return layer_outputs[n].back();
  }
};

// Runs the network on each row of `inputs` (N x D_in) and records every
// intermediate activation. Deterministic.
Capture forward_capture(const Network& net, const Matrix& inputs);

// Jacobian of z = W x (+ b) w.r.t. the flattened parameters.
// Cvec: x~^T (x) I_{d_out}; rvec: I_{d_out} (x) x~^T, with x~ = [x; 1] when
// with_bias.
Matrix linear_param_jacobian(const Vector& x, std::size_t d_out,
                             FlattenOrder order, bool with_bias);

// Jacobian of a layer's output w.r.t. its input, at input x.
Matrix layer_input_jacobian(const Layer& layer, const Vector& x);

// Diagonal of the activation's input Jacobian at x.
Vector activation_derivative(Activation kind, const Vector& x);

// J_{x^(i)_n} f_n: Jacobian of the prediction w.r.t. the output of layer i,
// the product of the downstream layers' input Jacobians at the captured
// activations. Identity when i is the last layer.
Matrix net_jacobian_from_layer(const Network& net, const Capture& capture,
                               std::size_t layer_index, std::size_t datum);

// (J_{x^(i)_n} f_n)^T v by backward accumulation, no materialized Jacobian.
Vector vjp_to_layer(const Network& net, const Capture& capture,
                    std::size_t layer_index, std::size_t datum,
                    const Vector& v);

// Jacobian of the prediction w.r.t. linear layer i's flattened parameters.
Matrix net_param_jacobian(const Network& net, const Capture& capture,
                          std::size_t layer_index, std::size_t datum,
                          FlattenOrder order);

// --- network spec files ----------------------------------------------------

// JSON layer list; linear layers carry inline weights or a seeded-normal
// init. See README for the schema.
Network load_network_json(const std::string& path);
Network network_from_json_text(const std::string& text);

}  // namespace curvkit
