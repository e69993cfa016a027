#pragma once

#include "curvkit/matrix.hpp"

namespace curvkit {

// Closed-form 2d Rosenbrock composite g(h(x)) with g(h) = h^T h, used as
// an independent validation target for the generic curvature machinery.
// Note: g lacks the 1/2 of the square-loss criterion, hence the factor 2
// in the closed forms below.
struct RosenbrockParams {
  double alpha = 10.0;
  Vector anchor = {1.0, 2.0};
};

// (1 - x1)^2 + alpha (x2 - x1^2)^2
double rosenbrock_value(const Vector& x, double alpha);

// h(x) = (1 - x1, sqrt(alpha) (x2 - x1^2)); ||h||^2 equals the value.
Vector rosenbrock_h(const Vector& x, double alpha);

// J_x h = [[-1, 0], [-2 sqrt(alpha) x1, sqrt(alpha)]]
Matrix rosenbrock_h_jacobian(const Vector& x, double alpha);

Vector rosenbrock_gradient(const Vector& x, double alpha);

// 2 [[1 + 4 a x1^2, -2 a x1], [-2 a x1, a]]
Matrix rosenbrock_ggn(const Vector& anchor, double alpha);

// 2 [[1 + 6 a x1^2 - 2 a x2, -2 a x1], [-2 a x1, a]]
Matrix rosenbrock_hessian(const Vector& anchor, double alpha);

}  // namespace curvkit
