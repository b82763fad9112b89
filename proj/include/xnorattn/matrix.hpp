#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "xnorattn/error.hpp"
#include "xnorattn/memory.hpp"

namespace xnorattn {

class Rng;

/// Selects the serial loop nest or the OpenMP one. Both share loop order
/// and reduction blocking, so they produce bit-identical results.
enum class Execution { Serial, Parallel };

/// Rows per partial sum in reductions over the sequence axis. Fixed so the
/// reduction tree does not depend on the thread count.
inline constexpr std::size_t kReductionBlock = 256;

template <typename T>
class Matrix {
 public:
  using value_type = T;
  using Storage = std::vector<T, TrackingAllocator<T>>;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  /// Row-major literal, e.g. `Matrix<double>{{1, 2}, {3, 4}}`.
  Matrix(std::initializer_list<std::initializer_list<T>> rows);

  static Matrix identity(std::size_t n);
  static Matrix from_data(std::size_t rows, std::size_t cols, std::span<const T> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  std::span<T> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const noexcept { return {data_.data() + r * cols_, cols_}; }

  std::span<T> data() noexcept { return {data_.data(), data_.size()}; }
  std::span<const T> data() const noexcept { return {data_.data(), data_.size()}; }

  std::string shape_string() const;

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Storage data_;
};

using DenseMatrix = Matrix<double>;
using MatrixF32 = Matrix<float>;

// ---------------------------------------------------------------------------
// Core operations. All outputs are checked for NaN/Inf and throw
// Error(NonFinite) instead of returning non-finite data.

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b, Execution exec = Execution::Serial);

/// aᵀ·b without forming aᵀ. The sum over rows of a and b uses
/// kReductionBlock-sized partials combined in block order.
template <typename T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b, Execution exec = Execution::Serial);

/// Column sums with the same blocked reduction as matmul_tn (i.e. aᵀ·1).
template <typename T>
std::vector<T> column_sums(const Matrix<T>& a, Execution exec = Execution::Serial);

template <typename T>
Matrix<T> transpose(const Matrix<T>& a);

/// exp(row - max(row)) / sum, per row.
template <typename T>
Matrix<T> rowwise_softmax(const Matrix<T>& m, Execution exec = Execution::Serial);

template <typename T>
void rowwise_softmax_inplace(Matrix<T>& m, Execution exec = Execution::Serial);

/// 1 / (1 + e^-x) with the exponent clamped so it never overflows.
double sigmoid(double x) noexcept;
template <typename T>
Matrix<T> sigmoid(const Matrix<T>& m);

template <typename T>
Matrix<T> add(const Matrix<T>& a, const Matrix<T>& b);
template <typename T>
Matrix<T> subtract(const Matrix<T>& a, const Matrix<T>& b);
template <typename T>
Matrix<T> scale(const Matrix<T>& a, T s);
template <typename T>
Matrix<T> hadamard(const Matrix<T>& a, const Matrix<T>& b);

/// Horizontal concatenation [a | b].
template <typename T>
Matrix<T> hconcat(const std::vector<Matrix<T>>& blocks);
/// Columns [first, first + count).
template <typename T>
Matrix<T> column_block(const Matrix<T>& a, std::size_t first, std::size_t count);

/// Rows reordered so that out.row(i) == a.row(perm[i]).
template <typename T>
Matrix<T> permute_rows(const Matrix<T>& a, std::span<const std::size_t> perm);

template <typename T>
Matrix<T> cast_matrix(const DenseMatrix& m);

/// Throws Error(NonFinite) naming `context` if any entry is NaN or infinite.
template <typename T>
void require_finite(const Matrix<T>& m, const char* context);

/// Throws Error(ShapeMismatch) naming both shapes.
[[noreturn]] void throw_shape_mismatch(const char* op, const std::string& a, const std::string& b);

// Comparison helpers used throughout verification.
double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);
/// max|a - b| / max|reference|; reference entries all zero gives the
/// absolute difference.
double max_rel_diff(const DenseMatrix& a, const DenseMatrix& reference);

/// Entries drawn i.i.d. N(0, stddev²).
DenseMatrix random_normal(std::size_t rows, std::size_t cols, Rng& rng, double stddev = 1.0);
/// Entries drawn i.i.d. U[lo, hi).
DenseMatrix random_uniform(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi);

}  // namespace xnorattn
