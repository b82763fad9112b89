#include "xnorattn/matrix.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>

#include "xnorattn/rng.hpp"

namespace xnorattn {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::ShapeMismatch: return "shape mismatch";
    case ErrorKind::NonFinite: return "non-finite value";
    case ErrorKind::InvalidArgument: return "invalid argument";
    case ErrorKind::ZeroDenominator: return "zero denominator";
    case ErrorKind::Io: return "I/O error";
    case ErrorKind::OutOfMemory: return "out of memory";
    case ErrorKind::Divergence: return "divergence";
  }
  return "error";
}

// ---------------------------------------------------------------------------
// Allocation accounting

namespace memory {
namespace {
std::atomic<std::size_t> g_current{0};
std::atomic<std::size_t> g_peak{0};
}  // namespace

std::size_t current_bytes() noexcept { return g_current.load(std::memory_order_relaxed); }
std::size_t peak_bytes() noexcept { return g_peak.load(std::memory_order_relaxed); }

void note_alloc(std::size_t bytes) noexcept {
  const std::size_t now = g_current.fetch_add(bytes, std::memory_order_relaxed) + bytes;
  std::size_t peak = g_peak.load(std::memory_order_relaxed);
  while (now > peak && !g_peak.compare_exchange_weak(peak, now, std::memory_order_relaxed)) {
  }
}

void note_free(std::size_t bytes) noexcept { g_current.fetch_sub(bytes, std::memory_order_relaxed); }

void reset_peak() noexcept { g_peak.store(current_bytes(), std::memory_order_relaxed); }

}  // namespace memory

// ---------------------------------------------------------------------------
// Rng

namespace {

std::uint64_t splitmix64(std::uint64_t& x) noexcept {
  std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) noexcept : seed_(seed) {
  std::uint64_t sm = seed;
  for (auto& s : state_) s = splitmix64(sm);
}

std::uint64_t Rng::next_u64() noexcept {
  const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
  const std::uint64_t t = state_[1] << 17;
  state_[2] ^= state_[0];
  state_[3] ^= state_[1];
  state_[1] ^= state_[2];
  state_[0] ^= state_[3];
  state_[2] ^= t;
  state_[3] = rotl(state_[3], 45);
  return result;
}

double Rng::uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

double Rng::normal() noexcept {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// ---------------------------------------------------------------------------
// Matrix

template <typename T>
Matrix<T>::Matrix(std::initializer_list<std::initializer_list<T>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) {
      throw Error(ErrorKind::ShapeMismatch, "ragged matrix literal");
    }
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

template <typename T>
Matrix<T> Matrix<T>::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = T(1);
  return m;
}

template <typename T>
Matrix<T> Matrix<T>::from_data(std::size_t rows, std::size_t cols, std::span<const T> data) {
  if (data.size() != rows * cols) {
    throw Error(ErrorKind::ShapeMismatch, "data length " + std::to_string(data.size()) +
                                              " does not match " + std::to_string(rows) + "x" +
                                              std::to_string(cols));
  }
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data_.begin());
  return m;
}

template <typename T>
std::string Matrix<T>::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

void throw_shape_mismatch(const char* op, const std::string& a, const std::string& b) {
  throw Error(ErrorKind::ShapeMismatch, std::string(op) + ": " + a + " vs " + b);
}

template <typename T>
void require_finite(const Matrix<T>& m, const char* context) {
  const auto data = m.data();
  for (std::size_t k = 0; k < data.size(); ++k) {
    if (!std::isfinite(data[k])) {
      const std::size_t c = m.cols() == 0 ? 0 : k % m.cols();
      const std::size_t r = m.cols() == 0 ? 0 : k / m.cols();
      throw Error(ErrorKind::NonFinite, std::string(context) + " at (" + std::to_string(r) +
                                            ", " + std::to_string(c) + ")");
    }
  }
}

template <typename T>
Matrix<T> matmul(const Matrix<T>& a, const Matrix<T>& b, Execution exec) {
  if (a.cols() != b.rows()) throw_shape_mismatch("matmul", a.shape_string(), b.shape_string());
  const std::size_t n = a.rows();
  const std::size_t inner = a.cols();
  const std::size_t m = b.cols();
  Matrix<T> c(n, m);
  const bool parallel = exec == Execution::Parallel;
  // i-k-j order: the innermost loop streams rows of b and c, and every
  // output entry accumulates over k in ascending order on every path.
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t i = 0; i < n; ++i) {
    T* out = c.row(i).data();
    const T* lhs = a.row(i).data();
    for (std::size_t k = 0; k < inner; ++k) {
      const T aik = lhs[k];
      const T* rhs = b.row(k).data();
      for (std::size_t j = 0; j < m; ++j) out[j] += aik * rhs[j];
    }
  }
  require_finite(c, "matmul");
  return c;
}

namespace {

template <typename T>
void accumulate_tn_block(const Matrix<T>& a, const Matrix<T>& b, std::size_t begin,
                         std::size_t end, Matrix<T>& out) {
  const std::size_t p = a.cols();
  const std::size_t q = b.cols();
  for (std::size_t j = begin; j < end; ++j) {
    const T* arow = a.row(j).data();
    const T* brow = b.row(j).data();
    for (std::size_t r = 0; r < p; ++r) {
      const T ajr = arow[r];
      T* dst = out.row(r).data();
      for (std::size_t c = 0; c < q; ++c) dst[c] += ajr * brow[c];
    }
  }
}

template <typename T>
void add_into(Matrix<T>& dst, const Matrix<T>& src) {
  auto d = dst.data();
  auto s = src.data();
  for (std::size_t k = 0; k < d.size(); ++k) d[k] += s[k];
}

}  // namespace

template <typename T>
Matrix<T> matmul_tn(const Matrix<T>& a, const Matrix<T>& b, Execution exec) {
  if (a.rows() != b.rows()) throw_shape_mismatch("matmul_tn", a.shape_string(), b.shape_string());
  const std::size_t n = a.rows();
  const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
  Matrix<T> total(a.cols(), b.cols());
  if (exec == Execution::Parallel && blocks > 1) {
    std::vector<Matrix<T>> partials(blocks);
#pragma omp parallel for schedule(static)
    for (std::size_t blk = 0; blk < blocks; ++blk) {
      partials[blk] = Matrix<T>(a.cols(), b.cols());
      accumulate_tn_block(a, b, blk * kReductionBlock, std::min(n, (blk + 1) * kReductionBlock),
                          partials[blk]);
    }
    for (const auto& p : partials) add_into(total, p);
  } else {
    Matrix<T> partial(a.cols(), b.cols());
    for (std::size_t blk = 0; blk < blocks; ++blk) {
      std::fill(partial.data().begin(), partial.data().end(), T(0));
      accumulate_tn_block(a, b, blk * kReductionBlock, std::min(n, (blk + 1) * kReductionBlock),
                          partial);
      add_into(total, partial);
    }
  }
  require_finite(total, "matmul_tn");
  return total;
}

template <typename T>
std::vector<T> column_sums(const Matrix<T>& a, Execution exec) {
  const std::size_t n = a.rows();
  const std::size_t p = a.cols();
  const std::size_t blocks = (n + kReductionBlock - 1) / kReductionBlock;
  auto block_sum = [&](std::size_t blk, std::vector<T>& out) {
    const std::size_t end = std::min(n, (blk + 1) * kReductionBlock);
    for (std::size_t j = blk * kReductionBlock; j < end; ++j) {
      const T* row = a.row(j).data();
      for (std::size_t c = 0; c < p; ++c) out[c] += row[c];
    }
  };
  std::vector<T> total(p, T(0));
  std::vector<std::vector<T>> partials(blocks, std::vector<T>(p, T(0)));
  const bool parallel = exec == Execution::Parallel && blocks > 1;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t blk = 0; blk < blocks; ++blk) block_sum(blk, partials[blk]);
  for (const auto& part : partials) {
    for (std::size_t c = 0; c < p; ++c) total[c] += part[c];
  }
  return total;
}

template <typename T>
Matrix<T> transpose(const Matrix<T>& a) {
  Matrix<T> t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  }
  return t;
}

template <typename T>
void rowwise_softmax_inplace(Matrix<T>& m, Execution exec) {
  require_finite(m, "rowwise_softmax input");
  const bool parallel = exec == Execution::Parallel;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto row = m.row(i);
    if (row.empty()) continue;
    const T peak = *std::max_element(row.begin(), row.end());
    T sum = T(0);
    for (auto& v : row) {
      v = std::exp(v - peak);
      sum += v;
    }
    for (auto& v : row) v /= sum;
  }
}

template <typename T>
Matrix<T> rowwise_softmax(const Matrix<T>& m, Execution exec) {
  Matrix<T> out = m;
  rowwise_softmax_inplace(out, exec);
  return out;
}

double sigmoid(double x) noexcept {
  // e^-x overflows past ~709; beyond |x| = 700 the result is already 0 or 1
  // to double precision.
  const double clamped = std::clamp(x, -700.0, 700.0);
  return 1.0 / (1.0 + std::exp(-clamped));
}

template <typename T>
Matrix<T> sigmoid(const Matrix<T>& m) {
  require_finite(m, "sigmoid input");
  Matrix<T> out(m.rows(), m.cols());
  auto src = m.data();
  auto dst = out.data();
  for (std::size_t k = 0; k < src.size(); ++k) dst[k] = static_cast<T>(sigmoid(static_cast<double>(src[k])));
  return out;
}

namespace {

template <typename T, typename F>
Matrix<T> zip(const char* op, const Matrix<T>& a, const Matrix<T>& b, F f) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw_shape_mismatch(op, a.shape_string(), b.shape_string());
  }
  Matrix<T> out(a.rows(), a.cols());
  auto x = a.data();
  auto y = b.data();
  auto z = out.data();
  for (std::size_t k = 0; k < z.size(); ++k) z[k] = f(x[k], y[k]);
  require_finite(out, op);
  return out;
}

}  // namespace

template <typename T>
Matrix<T> add(const Matrix<T>& a, const Matrix<T>& b) {
  return zip("add", a, b, [](T x, T y) { return x + y; });
}
template <typename T>
Matrix<T> subtract(const Matrix<T>& a, const Matrix<T>& b) {
  return zip("subtract", a, b, [](T x, T y) { return x - y; });
}
template <typename T>
Matrix<T> hadamard(const Matrix<T>& a, const Matrix<T>& b) {
  return zip("hadamard", a, b, [](T x, T y) { return x * y; });
}

template <typename T>
Matrix<T> scale(const Matrix<T>& a, T s) {
  Matrix<T> out = a;
  for (auto& v : out.data()) v *= s;
  require_finite(out, "scale");
  return out;
}

template <typename T>
Matrix<T> hconcat(const std::vector<Matrix<T>>& blocks) {
  if (blocks.empty()) return {};
  const std::size_t rows = blocks.front().rows();
  std::size_t cols = 0;
  for (const auto& b : blocks) {
    if (b.rows() != rows) throw_shape_mismatch("hconcat", blocks.front().shape_string(), b.shape_string());
    cols += b.cols();
  }
  Matrix<T> out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    T* dst = out.row(i).data();
    for (const auto& b : blocks) {
      const auto src = b.row(i);
      dst = std::copy(src.begin(), src.end(), dst);
    }
  }
  return out;
}

template <typename T>
Matrix<T> column_block(const Matrix<T>& a, std::size_t first, std::size_t count) {
  if (first + count > a.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "column_block [" + std::to_string(first) + ", " +
                                              std::to_string(first + count) + ") of " +
                                              a.shape_string());
  }
  Matrix<T> out(a.rows(), count);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const auto src = a.row(i).subspan(first, count);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

template <typename T>
Matrix<T> permute_rows(const Matrix<T>& a, std::span<const std::size_t> perm) {
  if (perm.size() != a.rows()) {
    throw Error(ErrorKind::ShapeMismatch, "permutation length " + std::to_string(perm.size()) +
                                              " for " + a.shape_string());
  }
  Matrix<T> out(a.rows(), a.cols());
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (perm[i] >= a.rows()) throw Error(ErrorKind::InvalidArgument, "permutation index out of range");
    const auto src = a.row(perm[i]);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  return out;
}

template <typename T>
Matrix<T> cast_matrix(const DenseMatrix& m) {
  Matrix<T> out(m.rows(), m.cols());
  auto src = m.data();
  auto dst = out.data();
  for (std::size_t k = 0; k < src.size(); ++k) dst[k] = static_cast<T>(src[k]);
  return out;
}

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw_shape_mismatch("max_abs_diff", a.shape_string(), b.shape_string());
  }
  double worst = 0.0;
  auto x = a.data();
  auto y = b.data();
  for (std::size_t k = 0; k < x.size(); ++k) worst = std::max(worst, std::abs(x[k] - y[k]));
  return worst;
}

double max_rel_diff(const DenseMatrix& a, const DenseMatrix& reference) {
  const double diff = max_abs_diff(a, reference);
  double scale_ref = 0.0;
  for (double v : reference.data()) scale_ref = std::max(scale_ref, std::abs(v));
  return scale_ref > 0.0 ? diff / scale_ref : diff;
}

DenseMatrix random_normal(std::size_t rows, std::size_t cols, Rng& rng, double stddev) {
  DenseMatrix m(rows, cols);
  for (auto& v : m.data()) v = stddev * rng.normal();
  return m;
}

DenseMatrix random_uniform(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi) {
  DenseMatrix m(rows, cols);
  for (auto& v : m.data()) v = rng.uniform(lo, hi);
  return m;
}

#define XNORATTN_INSTANTIATE(T)                                                       \
  template class Matrix<T>;                                                           \
  template void require_finite<T>(const Matrix<T>&, const char*);                     \
  template Matrix<T> matmul<T>(const Matrix<T>&, const Matrix<T>&, Execution);        \
  template Matrix<T> matmul_tn<T>(const Matrix<T>&, const Matrix<T>&, Execution);     \
  template std::vector<T> column_sums<T>(const Matrix<T>&, Execution);                \
  template Matrix<T> transpose<T>(const Matrix<T>&);                                  \
  template Matrix<T> rowwise_softmax<T>(const Matrix<T>&, Execution);                 \
  template void rowwise_softmax_inplace<T>(Matrix<T>&, Execution);                    \
  template Matrix<T> sigmoid<T>(const Matrix<T>&);                                    \
  template Matrix<T> add<T>(const Matrix<T>&, const Matrix<T>&);                      \
  template Matrix<T> subtract<T>(const Matrix<T>&, const Matrix<T>&);                 \
  template Matrix<T> hadamard<T>(const Matrix<T>&, const Matrix<T>&);                 \
  template Matrix<T> scale<T>(const Matrix<T>&, T);                                   \
  template Matrix<T> hconcat<T>(const std::vector<Matrix<T>>&);                       \
  template Matrix<T> column_block<T>(const Matrix<T>&, std::size_t, std::size_t);     \
  template Matrix<T> permute_rows<T>(const Matrix<T>&, std::span<const std::size_t>); \
  template Matrix<T> cast_matrix<T>(const DenseMatrix&);

XNORATTN_INSTANTIATE(double)
XNORATTN_INSTANTIATE(float)

#undef XNORATTN_INSTANTIATE

}  // namespace xnorattn
