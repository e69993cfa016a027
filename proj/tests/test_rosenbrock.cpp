#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "curvkit/curvature.hpp"
#include "curvkit/rosenbrock.hpp"
#include "test_util.hpp"

using namespace curvkit;
using test_util::fd_jacobian;

TEST_CASE("rosenbrock_value") {
  CHECK(rosenbrock_value({1.0, 1.0}, 3.7) == 0.0);
  CHECK(rosenbrock_value({0.0, 0.0}, 10.0) == 1.0);
  CHECK(rosenbrock_value({1.0, 2.0}, 10.0) == 10.0);
  CHECK_THROWS_AS(rosenbrock_value({1.0}, 10.0), DimensionError);
  CHECK_THROWS_AS(rosenbrock_value({1.0, 1.0}, -1.0), DimensionError);
}

TEST_CASE("rosenbrock_h and its Jacobian") {
  CHECK(rosenbrock_h({1.0, 1.0}, 5.0) == Vector{0.0, 0.0});

  SUBCASE("||h||^2 equals the value") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const Vector x = test_util::random_vector(2, seed);
      const Vector h = rosenbrock_h(x, 10.0);
      CHECK(std::abs(h[0] * h[0] + h[1] * h[1] -
                     rosenbrock_value(x, 10.0)) <= 1e-14 *
                std::max(1.0, rosenbrock_value(x, 10.0)));
    }
  }

  SUBCASE("Jacobian at the printed anchor") {
    const Matrix j = rosenbrock_h_jacobian({1.0, 2.0}, 10.0);
    const double sa = std::sqrt(10.0);
    CHECK(j(0, 0) == -1.0);
    CHECK(j(0, 1) == 0.0);
    CHECK(j(1, 0) == doctest::Approx(-2.0 * sa));
    CHECK(j(1, 1) == doctest::Approx(sa));
  }

  SUBCASE("Jacobian matches finite differences") {
    const Vector x = {0.4, -1.2};
    const Matrix j = rosenbrock_h_jacobian(x, 10.0);
    const Matrix fd =
        fd_jacobian([&](const Vector& p) { return rosenbrock_h(p, 10.0); }, x);
    CHECK(max_abs_diff(j, fd) < 1e-7);
  }
}

TEST_CASE("closed-form GGN and Hessian at alpha=10, anchor (1,2)") {
  const Matrix ggn = rosenbrock_ggn({1.0, 2.0}, 10.0);
  CHECK(ggn(0, 0) == doctest::Approx(82.0));
  CHECK(ggn(0, 1) == doctest::Approx(-40.0));
  CHECK(ggn(1, 0) == doctest::Approx(-40.0));
  CHECK(ggn(1, 1) == doctest::Approx(20.0));

  const Matrix hess = rosenbrock_hessian({1.0, 2.0}, 10.0);
  CHECK(hess(0, 0) == doctest::Approx(42.0));
  CHECK(hess(0, 1) == doctest::Approx(-40.0));
  CHECK(hess(1, 0) == doctest::Approx(-40.0));
  CHECK(hess(1, 1) == doctest::Approx(20.0));
}

TEST_CASE("Hessian equals GGN on the parabola x2 == x1^2") {
  const Matrix g = rosenbrock_ggn({1.0, 1.0}, 10.0);
  const Matrix h = rosenbrock_hessian({1.0, 1.0}, 10.0);
  CHECK(max_abs_diff(g, h) < 1e-12);
}

TEST_CASE("GGN closed form equals 2 J^T J") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Vector x = test_util::random_vector(2, seed + 30);
    const Matrix j = rosenbrock_h_jacobian(x, 10.0);
    const Matrix jj = (j.transposed() * j).scaled(2.0);
    CHECK(test_util::rel_frobenius_diff(jj, rosenbrock_ggn(x, 10.0)) < 1e-12);
  }
}

TEST_CASE("generic curvature machinery reproduces the closed forms") {
  // h as the prediction, square loss against a zero target, sum reduction:
  // R = 2 compensates the missing 1/2 of g(h) = h^T h.
  const LossConfig cfg{Criterion::SquareLoss, Reduction::Sum};
  const Vector anchor = {1.0, 2.0};
  const double alpha = 10.0;

  SUBCASE("GGN assembly J^T H J with the compensating factor") {
    const Matrix j = rosenbrock_h_jacobian(anchor, alpha);
    const Matrix h = criterion_hessian(cfg, rosenbrock_h(anchor, alpha));
    const double r = reduction_factor(cfg, 1, 2);
    const Matrix assembled = (j.transposed() * h * j).scaled(r);
    CHECK(test_util::rel_frobenius_diff(assembled,
                                        rosenbrock_ggn(anchor, alpha)) < 1e-10);
  }

  SUBCASE("FD Hessian of the analytic gradient matches the closed form") {
    const Matrix h = fd_hessian_of_gradient(
        [&](const Vector& x) { return rosenbrock_gradient(x, alpha); },
        anchor);
    CHECK(max_abs_diff(h, rosenbrock_hessian(anchor, alpha)) < 1e-4);
  }
}

TEST_CASE("GGN is PSD for random anchors") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Vector anchor = test_util::random_vector(2, seed + 60);
    const double alpha = 0.1 + 20.0 * (seed + 1) / 21.0;
    const auto eigs =
        test_util::jacobi_eigenvalues(rosenbrock_ggn(anchor, alpha));
    for (double e : eigs) CHECK(e >= -1e-12);
  }
}
