#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "xnorattn/matrix.hpp"

namespace xnorattn {

/// Kernel φ applied independently to every row of Q or K.
enum class FeatureMap {
  SoftmaxKernel,          // Sm(row), softmax over the feature axis
  SoftmaxComplementPair,  // (Sm(row), 1 - Sm(row))
  EluPlusOne,             // elu(x) + 1
  ReLU,                   // max(x, 0)
};

std::string to_string(FeatureMap map);
FeatureMap parse_feature_map(const std::string& name);

template <typename T>
struct FeatureRows {
  Matrix<T> primary;
  /// Set only for SoftmaxComplementPair.
  std::optional<Matrix<T>> complement;
};

template <typename T>
FeatureRows<T> apply_feature_map(FeatureMap map, const Matrix<T>& rows,
                                 Execution exec = Execution::Serial);

// Positional encodings whose weight factors as g(i)·h(j).

struct NoPos {
  friend bool operator==(const NoPos&, const NoPos&) = default;
};

/// P(i, j) = cos(π(i - j) / 2M). max_len == 0 means "use the sequence length".
struct CosinePos {
  std::size_t max_len = 0;
  friend bool operator==(const CosinePos&, const CosinePos&) = default;
};

/// Rotation of feature pairs (2k, 2k+1) by position·base^(-2k/d).
struct RotaryPos {
  double base = 10000.0;
  friend bool operator==(const RotaryPos&, const RotaryPos&) = default;
};

using PosEncoding = std::variant<NoPos, CosinePos, RotaryPos>;

std::string to_string(const PosEncoding& pos);
bool is_positional(const PosEncoding& pos) noexcept;

/// 0, 1, ..., n-1.
std::vector<std::size_t> sequence_positions(std::size_t n);

/// Row i becomes [f_i·cos(π p_i / 2M) | f_i·sin(π p_i / 2M)], doubling the
/// column count. Requires M > max(positions).
template <typename T>
Matrix<T> cosine_expand(const Matrix<T>& features, std::span<const std::size_t> positions,
                        std::size_t max_len);

/// Adjoint of cosine_expand: maps a gradient w.r.t. the expanded rows back
/// to the unexpanded feature rows.
template <typename T>
Matrix<T> cosine_expand_adjoint(const Matrix<T>& expanded_grad,
                                std::span<const std::size_t> positions, std::size_t max_len);

/// Rotates every pair (2k, 2k+1) of row i by p_i·θ_k, θ_k = base^(-2k/d).
/// `inverse` rotates by -p_i·θ_k (the transpose, used by backward passes).
template <typename T>
Matrix<T> rotary_rotate(const Matrix<T>& features, std::span<const double> positions,
                        double base, bool inverse = false);
template <typename T>
Matrix<T> rotary_rotate(const Matrix<T>& features, std::span<const std::size_t> positions,
                        double base, bool inverse = false);

/// Unfactored P(i, j). Cosine requires an explicit max_len; Rotary is
/// matrix-valued and throws InvalidArgument.
double direct_pos_weight(const PosEncoding& enc, std::size_t i, std::size_t j);

/// Resolves CosinePos::max_len == 0 to `sequence_length`.
PosEncoding resolve_positions(const PosEncoding& enc, std::size_t sequence_length);

/// Applies `enc` to feature rows at `positions` (identity for NoPos). `enc`
/// must already be resolved.
template <typename T>
Matrix<T> encode_positions(const PosEncoding& enc, const Matrix<T>& features,
                           std::span<const std::size_t> positions);

/// Adjoint of encode_positions.
template <typename T>
Matrix<T> encode_positions_adjoint(const PosEncoding& enc, const Matrix<T>& grad,
                                   std::span<const std::size_t> positions);

}  // namespace xnorattn
