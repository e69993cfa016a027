#include "curvkit/dataset.hpp"

#include <cmath>

#include "curvkit/rng.hpp"

namespace curvkit {

Dataset load_dataset_csv(const std::string& path, std::size_t input_dim,
                         Criterion criterion) {
  const Matrix table = load_csv(path);
  if (table.cols() <= input_dim) {
    throw DimensionError("dataset: rows need more than input_dim columns");
  }
  Dataset ds;
  ds.inputs = Matrix(table.rows(), input_dim);
  for (std::size_t n = 0; n < table.rows(); ++n) {
    for (std::size_t j = 0; j < input_dim; ++j) ds.inputs(n, j) = table(n, j);
    if (criterion == Criterion::SquareLoss) {
      Vector target;
      for (std::size_t j = input_dim; j < table.cols(); ++j) {
        target.push_back(table(n, j));
      }
      ds.labels.emplace_back(std::move(target));
    } else {
      if (table.cols() != input_dim + 1) {
        throw DimensionError("dataset: classification expects one label column");
      }
      const double raw = table(n, input_dim);
      if (raw < 0.0 || raw != std::floor(raw)) {
        throw DimensionError("dataset: class labels must be non-negative ints");
      }
      ds.labels.emplace_back(static_cast<std::size_t>(raw));
    }
  }
  return ds;
}

Dataset synthetic_dataset(std::uint64_t seed, std::size_t n,
                          std::size_t input_dim, std::size_t output_dim,
                          Criterion criterion) {
  Dataset ds;
  ds.inputs = Matrix(n, input_dim);
  for (std::size_t i = 0; i < n; ++i) {
    KeyedRng rng(seed, i);
    for (std::size_t j = 0; j < input_dim; ++j) ds.inputs(i, j) = rng.normal();
    if (criterion == Criterion::SquareLoss) {
      Vector target(output_dim);
      for (double& t : target) t = rng.normal();
      ds.labels.emplace_back(std::move(target));
    } else {
      const auto c = static_cast<std::size_t>(
          rng.uniform() * static_cast<double>(output_dim));
      ds.labels.emplace_back(c < output_dim ? c : output_dim - 1);
    }
  }
  return ds;
}

}  // namespace curvkit
