#include "curvkit/rosenbrock.hpp"

#include <cmath>

namespace curvkit {

namespace {

void check_args(const Vector& x, double alpha) {
  if (x.size() != 2) throw DimensionError("rosenbrock: x must be 2d");
  if (!(alpha > 0.0)) throw DimensionError("rosenbrock: alpha must be > 0");
}

}  // namespace

double rosenbrock_value(const Vector& x, double alpha) {
  check_args(x, alpha);
  const double a = 1.0 - x[0];
  const double b = x[1] - x[0] * x[0];
  return a * a + alpha * b * b;
}

Vector rosenbrock_h(const Vector& x, double alpha) {
  check_args(x, alpha);
  return {1.0 - x[0], std::sqrt(alpha) * (x[1] - x[0] * x[0])};
}

Matrix rosenbrock_h_jacobian(const Vector& x, double alpha) {
  check_args(x, alpha);
  const double sa = std::sqrt(alpha);
  return Matrix(2, 2, {-1.0, 0.0, -2.0 * sa * x[0], sa});
}

Vector rosenbrock_gradient(const Vector& x, double alpha) {
  check_args(x, alpha);
  const double b = x[1] - x[0] * x[0];
  return {-2.0 * (1.0 - x[0]) - 4.0 * alpha * x[0] * b, 2.0 * alpha * b};
}

Matrix rosenbrock_ggn(const Vector& anchor, double alpha) {
  check_args(anchor, alpha);
  const double x1 = anchor[0];
  return Matrix(2, 2,
                {2.0 * (1.0 + 4.0 * alpha * x1 * x1), -4.0 * alpha * x1,
                 -4.0 * alpha * x1, 2.0 * alpha});
}

Matrix rosenbrock_hessian(const Vector& anchor, double alpha) {
  check_args(anchor, alpha);
  const double x1 = anchor[0];
  const double x2 = anchor[1];
  return Matrix(2, 2,
                {2.0 * (1.0 + 6.0 * alpha * x1 * x1 - 2.0 * alpha * x2),
                 -4.0 * alpha * x1, -4.0 * alpha * x1, 2.0 * alpha});
}

}  // namespace curvkit
