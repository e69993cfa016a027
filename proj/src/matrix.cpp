#include "curvkit/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

namespace curvkit {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (rows_ * cols_ != data_.size()) {
    throw DimensionError("Matrix: value count does not match rows*cols");
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(const std::vector<Vector>& rows) {
  if (rows.empty()) throw DimensionError("from_rows: empty row list");
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != m.cols()) {
      throw DimensionError("from_rows: ragged rows");
    }
    for (std::size_t j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

Matrix Matrix::diagonal(const Vector& d) {
  Matrix m(d.size(), d.size());
  for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
  return m;
}

Matrix Matrix::outer(const Vector& u, const Vector& v) {
  Matrix m(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) m(i, j) = u[i] * v[j];
  return m;
}

Vector Matrix::row(std::size_t i) const {
  Vector r(cols_);
  for (std::size_t j = 0; j < cols_; ++j) r[j] = (*this)(i, j);
  return r;
}

Vector Matrix::col(std::size_t j) const {
  Vector c(rows_);
  for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
  return c;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

Matrix Matrix::operator*(const Matrix& other) const {
  if (cols_ != other.rows_) throw DimensionError("matmul: inner dims differ");
  Matrix out(rows_, other.cols_);
  for (std::size_t i = 0; i < rows_; ++i) {
    for (std::size_t k = 0; k < cols_; ++k) {
      const double a = (*this)(i, k);
      if (a == 0.0) continue;
      for (std::size_t j = 0; j < other.cols_; ++j) {
        out(i, j) += a * other(k, j);
      }
    }
  }
  return out;
}

Vector Matrix::operator*(const Vector& v) const {
  if (cols_ != v.size()) throw DimensionError("matvec: dims differ");
  Vector out(rows_, 0.0);
  for (std::size_t i = 0; i < rows_; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < cols_; ++j) acc += (*this)(i, j) * v[j];
    out[i] = acc;
  }
  return out;
}

Matrix Matrix::operator+(const Matrix& other) const {
  Matrix out = *this;
  out += other;
  return out;
}

Matrix Matrix::operator-(const Matrix& other) const {
  if (!same_shape(other)) throw DimensionError("subtract: shapes differ");
  Matrix out = *this;
  for (std::size_t i = 0; i < data_.size(); ++i) out.data_[i] -= other.data_[i];
  return out;
}

Matrix& Matrix::operator+=(const Matrix& other) {
  if (!same_shape(other)) throw DimensionError("add: shapes differ");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Matrix Matrix::scaled(double s) const {
  Matrix out = *this;
  for (double& x : out.data_) x *= s;
  return out;
}

Tensor Tensor::from_matrix(const Matrix& m) {
  return Tensor{{m.rows(), m.cols()}, m.values()};
}

std::size_t Tensor::size() const {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

namespace {

void check_tensor(const Tensor& t) {
  if (t.shape.empty() || t.size() == 0 || t.data.size() != t.size()) {
    throw DimensionError("tensor is empty or inconsistent with its shape");
  }
}

// Maps a multi-index to the stored (rvec, last-fastest) linear position.
std::size_t rvec_pos(const std::vector<std::size_t>& idx,
                     const std::vector<std::size_t>& shape) {
  std::size_t pos = 0;
  for (std::size_t k = 0; k < shape.size(); ++k) pos = pos * shape[k] + idx[k];
  return pos;
}

std::size_t cvec_pos(const std::vector<std::size_t>& idx,
                     const std::vector<std::size_t>& shape) {
  std::size_t pos = 0;
  for (std::size_t k = shape.size(); k-- > 0;) pos = pos * shape[k] + idx[k];
  return pos;
}

bool next_index(std::vector<std::size_t>& idx,
                const std::vector<std::size_t>& shape) {
  for (std::size_t k = shape.size(); k-- > 0;) {
    if (++idx[k] < shape[k]) return true;
    idx[k] = 0;
  }
  return false;
}

}  // namespace

Vector flatten(const Tensor& t, FlattenOrder order) {
  check_tensor(t);
  if (order == FlattenOrder::Rvec) return t.data;
  Vector out(t.size());
  std::vector<std::size_t> idx(t.shape.size(), 0);
  do {
    out[cvec_pos(idx, t.shape)] = t.data[rvec_pos(idx, t.shape)];
  } while (next_index(idx, t.shape));
  return out;
}

Vector flatten(const Matrix& m, FlattenOrder order) {
  return flatten(Tensor::from_matrix(m), order);
}

Tensor unflatten(const Vector& v, const std::vector<std::size_t>& shape,
                 FlattenOrder order) {
  Tensor t{shape, {}};
  if (shape.empty() || v.size() != t.size()) {
    throw DimensionError("unflatten: length does not match shape");
  }
  if (order == FlattenOrder::Rvec) {
    t.data = v;
    return t;
  }
  t.data.resize(v.size());
  std::vector<std::size_t> idx(shape.size(), 0);
  do {
    t.data[rvec_pos(idx, shape)] = v[cvec_pos(idx, shape)];
  } while (next_index(idx, shape));
  return t;
}

Matrix unflatten_matrix(const Vector& v, std::size_t rows, std::size_t cols,
                        FlattenOrder order) {
  Tensor t = unflatten(v, {rows, cols}, order);
  return Matrix(rows, cols, std::move(t.data));
}

std::vector<std::size_t> flatten_permutation(
    const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw DimensionError("flatten_permutation: empty shape");
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  std::vector<std::size_t> p(n);
  std::vector<std::size_t> idx(shape.size(), 0);
  do {
    p[rvec_pos(idx, shape)] = cvec_pos(idx, shape);
  } while (next_index(idx, shape));
  return p;
}

Matrix permutation_matrix(const std::vector<std::size_t>& p) {
  Matrix m(p.size(), p.size());
  for (std::size_t i = 0; i < p.size(); ++i) m(i, p[i]) = 1.0;
  return m;
}

Matrix kron(const Matrix& a, const Matrix& b, std::size_t element_cap) {
  const std::size_t rows = a.rows() * b.rows();
  const std::size_t cols = a.cols() * b.cols();
  if (rows != 0 && cols > element_cap / rows) {
    throw NumericError("kron: result exceeds element cap (" +
                       std::to_string(element_cap) + " entries)");
  }
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) {
      const double aij = a(i, j);
      for (std::size_t k = 0; k < b.rows(); ++k)
        for (std::size_t l = 0; l < b.cols(); ++l)
          out(i * b.rows() + k, j * b.cols() + l) = aij * b(k, l);
    }
  return out;
}

Vector kron_matvec(const KroneckerOperator& op, const Vector& v,
                   FlattenOrder order) {
  if (v.size() != op.cols()) throw DimensionError("kron_matvec: length mismatch");
  const Matrix& a = op.left;
  const Matrix& b = op.right;
  if (order == FlattenOrder::Cvec) {
    // (A (x) B) cvec(V) = cvec(B V A^T), V of shape cols(B) x cols(A)
    Matrix vm = unflatten_matrix(v, b.cols(), a.cols(), FlattenOrder::Cvec);
    return flatten(b * vm * a.transposed(), FlattenOrder::Cvec);
  }
  // (A (x) B) rvec(V) = rvec(A V B^T), V of shape cols(A) x cols(B)
  Matrix vm = unflatten_matrix(v, a.cols(), b.cols(), FlattenOrder::Rvec);
  return flatten(a * vm * b.transposed(), FlattenOrder::Rvec);
}

namespace {

Matrix checked_inverse(const Matrix& m, const char* which, double cond_limit) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string("kron_inverse: ") + which +
                         " factor is not square");
  }
  Matrix inv;
  try {
    inv = inverse(m);
  } catch (const NumericError&) {
    throw NumericError(std::string("kron_inverse: ") + which +
                       " factor is singular");
  }
  // Crude condition estimate from Frobenius norms.
  if (frobenius_norm(m) * frobenius_norm(inv) > cond_limit) {
    throw NumericError(std::string("kron_inverse: ") + which +
                       " factor is ill-conditioned");
  }
  return inv;
}

}  // namespace

KroneckerOperator kron_inverse(const KroneckerOperator& op, double cond_limit) {
  return KroneckerOperator{checked_inverse(op.left, "left", cond_limit),
                           checked_inverse(op.right, "right", cond_limit)};
}

double frobenius_norm(const Matrix& m) {
  if (m.size() == 0) throw DimensionError("frobenius_norm: empty matrix");
  double acc = 0.0;
  for (double x : m.values()) acc += x * x;
  return std::sqrt(acc);
}

namespace {

void require_symmetric(const Matrix& m, const char* who) {
  if (m.rows() != m.cols()) {
    throw NumericError(std::string(who) + ": matrix is not square");
  }
  const double scale = std::max(1.0, max_abs(m));
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = i + 1; j < m.cols(); ++j)
      if (std::abs(m(i, j) - m(j, i)) > 1e-10 * scale) {
        throw NumericError(std::string(who) + ": matrix is not symmetric");
      }
}

// Power iteration for the dominant eigenvalue magnitude of a symmetric
// matrix, deterministic start vector.
double power_iteration(const Matrix& m, std::size_t max_iters, double tol) {
  const std::size_t n = m.rows();
  Vector v(n);
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = 1.0 + 0.1 * std::sin(static_cast<double>(i) + 1.0);
  }
  double prev = 0.0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    Vector w = m * v;
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    double est = 0.0;
    for (std::size_t i = 0; i < n; ++i) est += v[i] * w[i];
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
    if (it > 0 && std::abs(std::abs(est) - std::abs(prev)) < tol) {
      return std::abs(est);
    }
    prev = est;
  }
  return std::abs(prev);
}

}  // namespace

double spectral_norm(const Matrix& m, std::size_t max_iters, double tol) {
  if (m.size() == 0) throw DimensionError("spectral_norm: empty matrix");
  require_symmetric(m, "spectral_norm");
  return power_iteration(m, max_iters, tol);
}

double min_eigenvalue_symmetric(const Matrix& m, std::size_t max_iters,
                                double tol) {
  require_symmetric(m, "min_eigenvalue_symmetric");
  // Shift by the spectral norm so the smallest eigenvalue becomes dominant
  // in magnitude for (s I - M).
  const double s = power_iteration(m, max_iters, tol);
  Matrix shifted = Matrix::identity(m.rows()).scaled(s) - m;
  const double lam = power_iteration(shifted, max_iters, tol);
  return s - lam;
}

Matrix inverse(const Matrix& m) {
  if (m.rows() != m.cols()) throw DimensionError("inverse: not square");
  const std::size_t n = m.rows();
  Matrix a = m;
  Matrix inv = Matrix::identity(n);
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(a(r, col)) > std::abs(a(pivot, col))) pivot = r;
    }
    if (a(pivot, col) == 0.0) throw NumericError("inverse: singular matrix");
    if (pivot != col) {
      for (std::size_t j = 0; j < n; ++j) {
        std::swap(a(col, j), a(pivot, j));
        std::swap(inv(col, j), inv(pivot, j));
      }
    }
    const double d = a(col, col);
    for (std::size_t j = 0; j < n; ++j) {
      a(col, j) /= d;
      inv(col, j) /= d;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = a(r, col);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        a(r, j) -= f * a(col, j);
        inv(r, j) -= f * inv(col, j);
      }
    }
  }
  return inv;
}

double max_abs(const Matrix& m) {
  double best = 0.0;
  for (double x : m.values()) best = std::max(best, std::abs(x));
  return best;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw DimensionError("max_abs_diff: shapes differ");
  double best = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    best = std::max(best, std::abs(a.values()[i] - b.values()[i]));
  }
  return best;
}

std::string to_csv(const Matrix& m) {
  std::string out;
  char buf[64];
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      out += buf;
      out += (j + 1 < m.cols()) ? ',' : '\n';
    }
  }
  return out;
}

void save_csv(const Matrix& m, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << to_csv(m);
}

Matrix matrix_from_csv_text(const std::string& text) {
  std::vector<Vector> rows;
  std::istringstream stream(text);
  std::string line;
  while (std::getline(stream, line)) {
    if (line.empty()) continue;
    Vector row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      std::string tok = line.substr(pos, comma == std::string::npos
                                             ? std::string::npos
                                             : comma - pos);
      row.push_back(std::strtod(tok.c_str(), nullptr));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    rows.push_back(std::move(row));
  }
  return Matrix::from_rows(rows);
}

Matrix load_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return matrix_from_csv_text(ss.str());
}

}  // namespace curvkit
