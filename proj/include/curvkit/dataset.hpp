#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "curvkit/losses.hpp"
#include "curvkit/matrix.hpp"

namespace curvkit {

struct Dataset {
  Matrix inputs;              // N x D_in
  std::vector<Label> labels;  // length N

  std::size_t size() const { return labels.size(); }
};

// One row per datum: first `input_dim` columns are inputs, the rest the
// target (C reals for regression, one integer class for classification).
Dataset load_dataset_csv(const std::string& path, std::size_t input_dim,
                         Criterion criterion);

// Seeded synthetic data: standard-normal inputs, standard-normal regression
// targets or uniform class labels.
Dataset synthetic_dataset(std::uint64_t seed, std::size_t n,
                          std::size_t input_dim, std::size_t output_dim,
                          Criterion criterion);

}  // namespace curvkit
