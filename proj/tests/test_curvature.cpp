#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "curvkit/curvature.hpp"
#include "curvkit/losses.hpp"
#include "test_util.hpp"

using namespace curvkit;
using test_util::make_deep_linear;
using test_util::make_mlp;
using test_util::random_matrix;
using test_util::random_vector;
using test_util::rel_frobenius_diff;

namespace {

const LossConfig kMseMean{Criterion::SquareLoss, Reduction::Mean};
const LossConfig kMseSum{Criterion::SquareLoss, Reduction::Sum};
const LossConfig kCeMean{Criterion::SoftmaxCrossEntropy, Reduction::Mean};

Dataset regression_data(const Network& net, std::size_t n, std::uint64_t seed) {
  return synthetic_dataset(seed, n, net.input_dim(), net.output_dim(),
                           Criterion::SquareLoss);
}

Dataset classification_data(const Network& net, std::size_t n,
                            std::uint64_t seed) {
  return synthetic_dataset(seed, n, net.input_dim(), net.output_dim(),
                           Criterion::SoftmaxCrossEntropy);
}

// Type-II Fisher assembled from the Hessian factorization's columns; the
// equality with the GGN is a result under test, not an assumption.
Matrix type_two_fisher_block(const Network& net, const Dataset& data,
                             const LossConfig& cfg, std::size_t layer,
                             FlattenOrder order) {
  const Capture cap = forward_capture(net, data.inputs);
  const std::size_t p = net.layer_param_count(layer);
  Matrix acc(p, p);
  for (std::size_t n = 0; n < data.size(); ++n) {
    const Matrix j = net_param_jacobian(net, cap, layer, n, order);
    const Matrix s = hessian_factorization(cfg, cap.prediction(n));
    for (std::size_t c = 0; c < s.cols(); ++c) {
      const Vector jts = j.transposed() * s.col(c);
      for (std::size_t i = 0; i < p; ++i)
        for (std::size_t k = 0; k < p; ++k) acc(i, k) += jts[i] * jts[k];
    }
  }
  return acc.scaled(
      risk_reduction_factor(cfg, data.size(), net.output_dim()));
}

}  // namespace

TEST_CASE("ggn_block for a single linear layer with MSE") {
  const Network net = make_deep_linear({4, 3}, 7);
  const Dataset data = regression_data(net, 12, 1);
  const double r = risk_reduction_factor(kMseMean, data.size(), 3);

  // R sum_n x~_n x~_n^T
  Matrix xxt(5, 5);
  for (std::size_t n = 0; n < data.size(); ++n) {
    Vector x = data.inputs.row(n);
    x.push_back(1.0);
    for (std::size_t i = 0; i < 5; ++i)
      for (std::size_t j = 0; j < 5; ++j) xxt(i, j) += r * x[i] * x[j];
  }

  const Matrix cvec_block =
      ggn_block(net, data, kMseMean, 0, FlattenOrder::Cvec).matrix;
  CHECK(rel_frobenius_diff(cvec_block, kron(xxt, Matrix::identity(3))) <
        1e-12);

  const Matrix rvec_block =
      ggn_block(net, data, kMseMean, 0, FlattenOrder::Rvec).matrix;
  CHECK(rel_frobenius_diff(rvec_block, kron(Matrix::identity(3), xxt)) <
        1e-12);
}

TEST_CASE("ggn_block equals ggn_vector_product columns on a ReLU MLP") {
  const Network net = make_mlp({5, 4, 4, 3}, Activation::ReLU, 13);
  const Dataset data = regression_data(net, 8, 2);
  const Matrix full = ggn_full(net, data, kMseMean, FlattenOrder::Cvec);
  const Matrix block =
      ggn_block(net, data, kMseMean, 0, FlattenOrder::Cvec).matrix;
  // assemble the full matrix column by column through the matrix-free path
  for (std::size_t k = 0; k < full.cols(); ++k) {
    Vector e(full.cols(), 0.0);
    e[k] = 1.0;
    const Vector col = ggn_vector_product(net, data, kMseMean,
                                          FlattenOrder::Cvec, e);
    for (std::size_t i = 0; i < col.size(); ++i)
      CHECK(std::abs(col[i] - full(i, k)) < 1e-10);
  }
  // diagonal block of the full matrix matches ggn_block bitwise
  for (std::size_t i = 0; i < block.rows(); ++i)
    for (std::size_t j = 0; j < block.cols(); ++j)
      CHECK(block(i, j) == full(i, j));
}

TEST_CASE("ggn_full") {
  SUBCASE("one-layer net equals the block") {
    const Network net = make_deep_linear({3, 2}, 17);
    const Dataset data = regression_data(net, 5, 3);
    const Matrix full = ggn_full(net, data, kMseMean, FlattenOrder::Cvec);
    const Matrix block =
        ggn_block(net, data, kMseMean, 0, FlattenOrder::Cvec).matrix;
    CHECK(max_abs_diff(full, block) == 0.0);
  }

  SUBCASE("5-4-4-3 MLP, N=100: symmetric, PSD, diagonal blocks match") {
    const Network net = make_mlp({5, 4, 4, 3}, Activation::Tanh, 19);
    const Dataset data = regression_data(net, 100, 4);
    const Matrix full = ggn_full(net, data, kMseMean, FlattenOrder::Cvec);
    CHECK(rel_frobenius_diff(full.transposed(), full) < 1e-12);
    CHECK(min_eigenvalue_symmetric(full) >= -1e-8);
    std::size_t offset = 0;
    for (std::size_t l : net.linear_layer_indices()) {
      const Matrix block =
          ggn_block(net, data, kMseMean, l, FlattenOrder::Cvec).matrix;
      for (std::size_t i = 0; i < block.rows(); ++i)
        for (std::size_t j = 0; j < block.cols(); ++j)
          CHECK(block(i, j) == full(offset + i, offset + j));
      offset += block.rows();
    }
  }

  SUBCASE("sum vs mean differ exactly by the reduction factor ratio") {
    const Network net = make_mlp({4, 3, 2}, Activation::Tanh, 23);
    const Dataset data = regression_data(net, 10, 5);
    const Matrix sum = ggn_full(net, data, kMseSum, FlattenOrder::Cvec);
    const Matrix mean = ggn_full(net, data, kMseMean, FlattenOrder::Cvec);
    const double ratio = risk_reduction_factor(kMseMean, 10, 2) /
                         risk_reduction_factor(kMseSum, 10, 2);
    CHECK(rel_frobenius_diff(sum.scaled(ratio), mean) < 1e-15);
  }
}

TEST_CASE("ggn_vector_product basics") {
  const Network net = make_mlp({4, 3, 2}, Activation::Tanh, 29);
  const Dataset data = regression_data(net, 6, 6);
  const Vector zero(net.param_count(), 0.0);
  CHECK(ggn_vector_product(net, data, kMseMean, FlattenOrder::Cvec, zero) ==
        zero);
  CHECK_THROWS_AS(ggn_vector_product(net, data, kMseMean, FlattenOrder::Cvec,
                                     Vector(3, 1.0)),
                  DimensionError);
}

TEST_CASE("mc_fisher_block") {
  SUBCASE("same seed twice is bitwise identical") {
    const Network net = make_mlp({4, 3, 3}, Activation::ReLU, 31);
    const Dataset data = regression_data(net, 5, 7);
    const Matrix a =
        mc_fisher_block(net, data, kMseMean, 0, FlattenOrder::Cvec, 4, 42)
            .matrix;
    const Matrix b =
        mc_fisher_block(net, data, kMseMean, 0, FlattenOrder::Cvec, 4, 42)
            .matrix;
    CHECK(a.values() == b.values());
  }

  SUBCASE("N=1, M=1 is the scaled outer product, rank <= 1") {
    const Network net = make_mlp({4, 3, 2}, Activation::Tanh, 37);
    const Dataset data = regression_data(net, 1, 8);
    const Matrix block =
        mc_fisher_block(net, data, kMseMean, 0, FlattenOrder::Cvec, 1, 0)
            .matrix;
    // reconstruct from the definition
    const Capture cap = forward_capture(net, data.inputs);
    KeyedRng rng(0, 0, 0);
    const Label y = sample_label(kMseMean, cap.prediction(0), rng);
    const Vector g = criterion_gradient(kMseMean, cap.prediction(0), y);
    const Matrix j = net_param_jacobian(net, cap, 0, 0, FlattenOrder::Cvec);
    const Vector jg = j.transposed() * g;
    const double r = risk_reduction_factor(kMseMean, 1, 2);
    const Matrix expected = Matrix::outer(jg, jg).scaled(r);
    CHECK(rel_frobenius_diff(block, expected) < 1e-12);
    // rank <= 1: all 2x2 minors vanish
    for (std::size_t i = 1; i < block.rows(); ++i)
      for (std::size_t k = 1; k < block.cols(); ++k)
        CHECK(std::abs(block(0, 0) * block(i, k) -
                       block(0, k) * block(i, 0)) < 1e-12);
  }

  SUBCASE("converges to the GGN on a deep linear net with MSE") {
    const Network net = make_deep_linear({4, 3, 2}, 41);
    const Dataset data = regression_data(net, 16, 9);
    const Matrix ggn =
        ggn_block(net, data, kMseMean, 0, FlattenOrder::Cvec).matrix;
    double res_small = 0.0, res_large = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const Matrix small =
          mc_fisher_block(net, data, kMseMean, 0, FlattenOrder::Cvec, 10, seed)
              .matrix;
      const Matrix large = mc_fisher_block(net, data, kMseMean, 0,
                                           FlattenOrder::Cvec, 10'000, seed)
                               .matrix;
      res_small += frobenius_norm(small - ggn);
      res_large += frobenius_norm(large - ggn);
    }
    // ~1/sqrt(M): 1000x more samples, expect much smaller residual
    CHECK(res_large < 0.25 * res_small);
  }
}

TEST_CASE("empirical_fisher_block") {
  SUBCASE("zero at an interpolating solution") {
    // identity net: predictions equal inputs; labels equal inputs
    LinearLayer lin;
    lin.weight = Matrix::identity(3);
    Network net({lin}, 3);
    Dataset data;
    data.inputs = random_matrix(6, 3, 10);
    for (std::size_t n = 0; n < 6; ++n) data.labels.emplace_back(data.inputs.row(n));
    const Matrix ef =
        empirical_fisher_block(net, data, kMseMean, 0, FlattenOrder::Cvec)
            .matrix;
    CHECK(max_abs(ef) == 0.0);
  }

  SUBCASE("N=1 is a rank-1 outer product") {
    const Network net = make_mlp({4, 3, 2}, Activation::Tanh, 47);
    const Dataset data = regression_data(net, 1, 11);
    const Capture cap = forward_capture(net, data.inputs);
    const Vector g =
        criterion_gradient(kMseMean, cap.prediction(0), data.labels[0]);
    const Matrix j = net_param_jacobian(net, cap, 0, 0, FlattenOrder::Cvec);
    const Vector jg = j.transposed() * g;
    const double r = risk_reduction_factor(kMseMean, 1, 2);
    const Matrix ef =
        empirical_fisher_block(net, data, kMseMean, 0, FlattenOrder::Cvec)
            .matrix;
    CHECK(rel_frobenius_diff(ef, Matrix::outer(jg, jg).scaled(r)) < 1e-12);
  }

  SUBCASE("differs from the GGN on a generic instance") {
    const Network net = make_mlp({5, 4, 3}, Activation::Tanh, 53);
    const Dataset data = regression_data(net, 20, 0);  // pinned seed 0
    const Matrix ef =
        empirical_fisher_block(net, data, kMseMean, 0, FlattenOrder::Cvec)
            .matrix;
    const Matrix ggn =
        ggn_block(net, data, kMseMean, 0, FlattenOrder::Cvec).matrix;
    CHECK(frobenius_norm(ef - ggn) > 1e-3);
  }

  SUBCASE("at the least-squares optimum EF vanishes but the GGN does not") {
    // one linear layer fit exactly to zero targets through zero weights:
    // predictions == 0 == labels, residual gradients vanish
    LinearLayer lin;
    lin.weight = Matrix(2, 3);
    Network net({lin}, 3);
    Dataset data;
    data.inputs = random_matrix(8, 3, 12);
    for (std::size_t n = 0; n < 8; ++n) data.labels.emplace_back(Vector(2, 0.0));
    const Matrix ef =
        empirical_fisher_block(net, data, kMseMean, 0, FlattenOrder::Cvec)
            .matrix;
    const Matrix ggn =
        ggn_block(net, data, kMseMean, 0, FlattenOrder::Cvec).matrix;
    CHECK(max_abs(ef) == 0.0);
    CHECK(frobenius_norm(ggn) > 1e-3);
  }
}

TEST_CASE("GGN equals the type-II Fisher assembled from S columns") {
  const Network net = make_mlp({5, 4, 4, 3}, Activation::ReLU, 61);
  SUBCASE("MSE") {
    const Dataset data = regression_data(net, 30, 13);
    for (std::size_t l : net.linear_layer_indices()) {
      const Matrix t2 =
          type_two_fisher_block(net, data, kMseMean, l, FlattenOrder::Cvec);
      const Matrix ggn =
          ggn_block(net, data, kMseMean, l, FlattenOrder::Cvec).matrix;
      CHECK(rel_frobenius_diff(t2, ggn) < 1e-10);
    }
  }
  SUBCASE("cross-entropy") {
    const Dataset data = classification_data(net, 30, 14);
    for (std::size_t l : net.linear_layer_indices()) {
      const Matrix t2 =
          type_two_fisher_block(net, data, kCeMean, l, FlattenOrder::Cvec);
      const Matrix ggn =
          ggn_block(net, data, kCeMean, l, FlattenOrder::Cvec).matrix;
      CHECK(rel_frobenius_diff(t2, ggn) < 1e-10);
    }
  }
}

TEST_CASE("cvec/rvec bridge for curvature blocks") {
  const Network net = make_mlp({4, 3, 2}, Activation::Tanh, 67);
  const Dataset data = regression_data(net, 9, 15);
  for (std::size_t l : net.linear_layer_indices()) {
    const auto& lin = std::get<LinearLayer>(net.layers()[l]);
    const auto p = flatten_permutation(
        {lin.weight.rows(), lin.weight.cols() + 1});
    const Matrix pm = permutation_matrix(p);
    const Matrix c = ggn_block(net, data, kMseMean, l, FlattenOrder::Cvec).matrix;
    const Matrix r = ggn_block(net, data, kMseMean, l, FlattenOrder::Rvec).matrix;
    CHECK(max_abs_diff(r, pm * c * pm.transposed()) == 0.0);
  }
}

TEST_CASE("PSD of curvature blocks") {
  const Network net = make_mlp({5, 4, 3}, Activation::ReLU, 71);
  const Dataset data = regression_data(net, 15, 16);
  for (std::size_t l : net.linear_layer_indices()) {
    for (const Matrix& m :
         {ggn_block(net, data, kMseMean, l, FlattenOrder::Cvec).matrix,
          mc_fisher_block(net, data, kMseMean, l, FlattenOrder::Cvec, 3, 1)
              .matrix,
          empirical_fisher_block(net, data, kMseMean, l, FlattenOrder::Cvec)
              .matrix}) {
      CHECK(rel_frobenius_diff(m.transposed(), m) < 1e-10);
      CHECK(min_eigenvalue_symmetric(m) >= -1e-8);
    }
  }
}

TEST_CASE("hessian_full_fd") {
  SUBCASE("quadratic problem: Hessian equals GGN") {
    const Network net = make_deep_linear({3, 2}, 73);
    const Dataset data = regression_data(net, 7, 17);
    const Matrix h = hessian_full_fd(net, data, kMseMean, FlattenOrder::Cvec);
    const Matrix g = ggn_full(net, data, kMseMean, FlattenOrder::Cvec);
    CHECK(max_abs_diff(h, g) < 1e-5);
  }

  SUBCASE("symmetric on a smooth nonlinear net") {
    const Network net = make_mlp({3, 3, 2}, Activation::Tanh, 79);
    const Dataset data = regression_data(net, 5, 18);
    const Matrix h = hessian_full_fd(net, data, kMseMean, FlattenOrder::Cvec);
    CHECK(frobenius_norm(h - h.transposed()) / frobenius_norm(h) <= 1e-6);
  }

  SUBCASE("refuses ReLU") {
    const Network net = make_mlp({3, 3, 2}, Activation::ReLU, 83);
    const Dataset data = regression_data(net, 4, 19);
    CHECK_THROWS_AS(hessian_full_fd(net, data, kMseMean, FlattenOrder::Cvec),
                    UnsupportedError);
  }
}

TEST_CASE("risk gradient matches finite differences of the risk") {
  const Network net = make_mlp({4, 3, 2}, Activation::Sigmoid, 89);
  const Dataset data = regression_data(net, 6, 20);
  const Vector g = risk_gradient(net, data, kMseMean, FlattenOrder::Cvec);
  const Vector theta = net.get_parameters(FlattenOrder::Cvec);
  const Vector fd = test_util::fd_gradient(
      [&](const Vector& t) {
        Network work = net;
        work.set_parameters(t, FlattenOrder::Cvec);
        return risk_value(work, data, kMseMean);
      },
      theta);
  for (std::size_t i = 0; i < g.size(); ++i)
    CHECK(g[i] == doctest::Approx(fd[i]).epsilon(1e-6));
}
