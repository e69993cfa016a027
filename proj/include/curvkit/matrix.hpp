#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace curvkit {

// Thrown when shapes do not line up or a tensor is empty.
struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Thrown when a numeric contract is violated (singular factor,
// non-symmetric input to a symmetric-only routine, element cap, ...).
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown for operations requested on layer/activation kinds that do not
// support them.
struct UnsupportedError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Vector = std::vector<double>;

enum class FlattenOrder { Cvec, Rvec };

inline const char* to_string(FlattenOrder o) {
  return o == FlattenOrder::Cvec ? "cvec" : "rvec";
}

// Dense real matrix, row-major storage. The cvec/rvec distinction never
// leaks into storage; it exists only in the flatten/unflatten API.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<Vector>& rows);
  static Matrix diagonal(const Vector& d);
  static Matrix outer(const Vector& u, const Vector& v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  const std::vector<double>& values() const { return data_; }
  std::vector<double>& values() { return data_; }

  Vector row(std::size_t i) const;
  Vector col(std::size_t j) const;

  Matrix transposed() const;
  Matrix operator*(const Matrix& other) const;
  Vector operator*(const Vector& v) const;
  Matrix operator+(const Matrix& other) const;
  Matrix operator-(const Matrix& other) const;
  Matrix& operator+=(const Matrix& other);
  Matrix scaled(double s) const;

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Dense tensor of rank >= 1, stored with the last index varying fastest.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  static Tensor from_matrix(const Matrix& m);
  std::size_t size() const;
};

// --- flattening conventions ------------------------------------------------

// Cvec: first index varies fastest (column-stacking for matrices).
// Rvec: last index varies fastest (row-stacking for matrices).
Vector flatten(const Tensor& t, FlattenOrder order);
Vector flatten(const Matrix& m, FlattenOrder order);
Tensor unflatten(const Vector& v, const std::vector<std::size_t>& shape,
                 FlattenOrder order);
Matrix unflatten_matrix(const Vector& v, std::size_t rows, std::size_t cols,
                        FlattenOrder order);

// Permutation p with rvec(T)[i] == cvec(T)[p[i]] for every tensor T of the
// given shape. Bridges curvature matrices: C_rvec = P C_cvec P^T.
std::vector<std::size_t> flatten_permutation(const std::vector<std::size_t>& shape);

// Permutation matrix with P[i, p[i]] = 1, i.e. (P x)[i] = x[p[i]].
Matrix permutation_matrix(const std::vector<std::size_t>& p);

// --- Kronecker algebra -----------------------------------------------------

constexpr std::size_t kDefaultKronElementCap = 100'000'000;

// Materialized Kronecker product a (x) b. Refuses results above the element
// cap; dense Kronecker products explode and the cap makes that explicit.
Matrix kron(const Matrix& a, const Matrix& b,
            std::size_t element_cap = kDefaultKronElementCap);

// left (x) right, never materialized. Storage is the two factors only.
struct KroneckerOperator {
  Matrix left;
  Matrix right;

  std::size_t rows() const { return left.rows() * right.rows(); }
  std::size_t cols() const { return left.cols() * right.cols(); }
};

// (A (x) B) v without materializing the product. Both orders route through
// the corresponding reshape identity and give identical results.
Vector kron_matvec(const KroneckerOperator& op, const Vector& v,
                   FlattenOrder order = FlattenOrder::Cvec);

// (A (x) B)^-1 = A^-1 (x) B^-1. Requires square factors with condition
// estimate below `cond_limit`.
KroneckerOperator kron_inverse(const KroneckerOperator& op,
                               double cond_limit = 1e12);

// --- norms and inversion ---------------------------------------------------

double frobenius_norm(const Matrix& m);

// Largest absolute eigenvalue of a symmetric matrix by power iteration with
// a fixed deterministic start vector.
double spectral_norm(const Matrix& m, std::size_t max_iters = 10'000,
                     double tol = 1e-10);

// Smallest eigenvalue of a symmetric matrix (power iteration on a shifted
// matrix). Used for PSD checks.
double min_eigenvalue_symmetric(const Matrix& m, std::size_t max_iters = 10'000,
                                double tol = 1e-10);

// Dense inverse via LU with partial pivoting.
Matrix inverse(const Matrix& m);

double max_abs(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);

// --- CSV I/O ---------------------------------------------------------------

// One row per line, comma separated, no header, 17 significant digits.
std::string to_csv(const Matrix& m);
void save_csv(const Matrix& m, const std::string& path);
Matrix matrix_from_csv_text(const std::string& text);
Matrix load_csv(const std::string& path);

}  // namespace curvkit
