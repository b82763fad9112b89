#include "xnorattn/feature_maps.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace xnorattn {

std::string to_string(FeatureMap map) {
  switch (map) {
    case FeatureMap::SoftmaxKernel: return "softmax";
    case FeatureMap::SoftmaxComplementPair: return "softmax-pair";
    case FeatureMap::EluPlusOne: return "elu";
    case FeatureMap::ReLU: return "relu";
  }
  return "unknown";
}

FeatureMap parse_feature_map(const std::string& name) {
  if (name == "softmax") return FeatureMap::SoftmaxKernel;
  if (name == "softmax-pair") return FeatureMap::SoftmaxComplementPair;
  if (name == "elu") return FeatureMap::EluPlusOne;
  if (name == "relu") return FeatureMap::ReLU;
  throw Error(ErrorKind::InvalidArgument, "unknown feature map '" + name + "'");
}

template <typename T>
FeatureRows<T> apply_feature_map(FeatureMap map, const Matrix<T>& rows, Execution exec) {
  require_finite(rows, "apply_feature_map input");
  FeatureRows<T> out;
  switch (map) {
    case FeatureMap::SoftmaxKernel:
      out.primary = rowwise_softmax(rows, exec);
      break;
    case FeatureMap::SoftmaxComplementPair: {
      out.primary = rowwise_softmax(rows, exec);
      Matrix<T> complement(rows.rows(), rows.cols());
      auto src = out.primary.data();
      auto dst = complement.data();
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] = T(1) - src[k];
      out.complement = std::move(complement);
      break;
    }
    case FeatureMap::EluPlusOne: {
      out.primary = Matrix<T>(rows.rows(), rows.cols());
      auto src = rows.data();
      auto dst = out.primary.data();
      for (std::size_t k = 0; k < src.size(); ++k) {
        dst[k] = src[k] > T(0) ? src[k] + T(1) : std::exp(src[k]);
      }
      break;
    }
    case FeatureMap::ReLU: {
      out.primary = Matrix<T>(rows.rows(), rows.cols());
      auto src = rows.data();
      auto dst = out.primary.data();
      for (std::size_t k = 0; k < src.size(); ++k) dst[k] = std::max(src[k], T(0));
      break;
    }
  }
  return out;
}

std::string to_string(const PosEncoding& pos) {
  if (std::holds_alternative<CosinePos>(pos)) return "cosine";
  if (std::holds_alternative<RotaryPos>(pos)) return "rotary";
  return "none";
}

bool is_positional(const PosEncoding& pos) noexcept { return !std::holds_alternative<NoPos>(pos); }

std::vector<std::size_t> sequence_positions(std::size_t n) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  return p;
}

namespace {

void check_positions(const char* op, std::size_t rows, std::size_t count) {
  if (rows != count) {
    throw Error(ErrorKind::ShapeMismatch, std::string(op) + ": " + std::to_string(rows) +
                                              " rows but " + std::to_string(count) + " positions");
  }
}

void check_max_len(std::span<const std::size_t> positions, std::size_t max_len) {
  if (max_len == 0) throw Error(ErrorKind::InvalidArgument, "cosine encoding needs M >= 1");
  for (std::size_t p : positions) {
    if (p >= max_len) {
      throw Error(ErrorKind::InvalidArgument, "cosine encoding: position " + std::to_string(p) +
                                                  " needs M >= " + std::to_string(p + 1) +
                                                  ", got M = " + std::to_string(max_len));
    }
  }
}

double cosine_angle(std::size_t position, std::size_t max_len) {
  return std::numbers::pi * static_cast<double>(position) / (2.0 * static_cast<double>(max_len));
}

}  // namespace

template <typename T>
Matrix<T> cosine_expand(const Matrix<T>& features, std::span<const std::size_t> positions,
                        std::size_t max_len) {
  check_positions("cosine_expand", features.rows(), positions.size());
  check_max_len(positions, max_len);
  const std::size_t d = features.cols();
  Matrix<T> out(features.rows(), 2 * d);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const double angle = cosine_angle(positions[i], max_len);
    const T c = static_cast<T>(std::cos(angle));
    const T s = static_cast<T>(std::sin(angle));
    const auto src = features.row(i);
    auto dst = out.row(i);
    for (std::size_t k = 0; k < d; ++k) {
      dst[k] = src[k] * c;
      dst[d + k] = src[k] * s;
    }
  }
  return out;
}

template <typename T>
Matrix<T> cosine_expand_adjoint(const Matrix<T>& expanded_grad,
                                std::span<const std::size_t> positions, std::size_t max_len) {
  check_positions("cosine_expand_adjoint", expanded_grad.rows(), positions.size());
  check_max_len(positions, max_len);
  if (expanded_grad.cols() % 2 != 0) {
    throw Error(ErrorKind::ShapeMismatch, "cosine_expand_adjoint: odd column count");
  }
  const std::size_t d = expanded_grad.cols() / 2;
  Matrix<T> out(expanded_grad.rows(), d);
  for (std::size_t i = 0; i < out.rows(); ++i) {
    const double angle = cosine_angle(positions[i], max_len);
    const T c = static_cast<T>(std::cos(angle));
    const T s = static_cast<T>(std::sin(angle));
    const auto src = expanded_grad.row(i);
    auto dst = out.row(i);
    for (std::size_t k = 0; k < d; ++k) dst[k] = src[k] * c + src[d + k] * s;
  }
  return out;
}

template <typename T>
Matrix<T> rotary_rotate(const Matrix<T>& features, std::span<const double> positions, double base,
                        bool inverse) {
  check_positions("rotary_rotate", features.rows(), positions.size());
  const std::size_t d = features.cols();
  if (d % 2 != 0) {
    throw Error(ErrorKind::InvalidArgument,
                "rotary encoding needs an even feature dimension, got " + std::to_string(d));
  }
  if (!(base > 0.0)) throw Error(ErrorKind::InvalidArgument, "rotary base must be positive");
  std::vector<double> theta(d / 2);
  for (std::size_t k = 0; k < theta.size(); ++k) {
    theta[k] = std::pow(base, -2.0 * static_cast<double>(k) / static_cast<double>(d));
  }
  const double sign = inverse ? -1.0 : 1.0;
  Matrix<T> out(features.rows(), d);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const auto src = features.row(i);
    auto dst = out.row(i);
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double angle = sign * positions[i] * theta[k];
      const double c = std::cos(angle);
      const double s = std::sin(angle);
      const double x = src[2 * k];
      const double y = src[2 * k + 1];
      dst[2 * k] = static_cast<T>(c * x - s * y);
      dst[2 * k + 1] = static_cast<T>(s * x + c * y);
    }
  }
  return out;
}

template <typename T>
Matrix<T> rotary_rotate(const Matrix<T>& features, std::span<const std::size_t> positions,
                        double base, bool inverse) {
  std::vector<double> p(positions.begin(), positions.end());
  return rotary_rotate(features, std::span<const double>(p), base, inverse);
}

double direct_pos_weight(const PosEncoding& enc, std::size_t i, std::size_t j) {
  if (const auto* cos_pos = std::get_if<CosinePos>(&enc)) {
    const std::size_t positions[] = {i, j};
    check_max_len(positions, cos_pos->max_len);
    const double delta = static_cast<double>(i) - static_cast<double>(j);
    return std::cos(std::numbers::pi * delta / (2.0 * static_cast<double>(cos_pos->max_len)));
  }
  if (std::holds_alternative<RotaryPos>(enc)) {
    throw Error(ErrorKind::InvalidArgument,
                "rotary encoding is matrix-valued; it has no scalar position weight");
  }
  return 1.0;
}

PosEncoding resolve_positions(const PosEncoding& enc, std::size_t sequence_length) {
  if (const auto* cos_pos = std::get_if<CosinePos>(&enc); cos_pos && cos_pos->max_len == 0) {
    return CosinePos{std::max<std::size_t>(sequence_length, 1)};
  }
  return enc;
}

template <typename T>
Matrix<T> encode_positions(const PosEncoding& enc, const Matrix<T>& features,
                           std::span<const std::size_t> positions) {
  if (const auto* cos_pos = std::get_if<CosinePos>(&enc)) {
    return cosine_expand(features, positions, cos_pos->max_len);
  }
  if (const auto* rot = std::get_if<RotaryPos>(&enc)) {
    return rotary_rotate(features, positions, rot->base);
  }
  return features;
}

template <typename T>
Matrix<T> encode_positions_adjoint(const PosEncoding& enc, const Matrix<T>& grad,
                                   std::span<const std::size_t> positions) {
  if (const auto* cos_pos = std::get_if<CosinePos>(&enc)) {
    return cosine_expand_adjoint(grad, positions, cos_pos->max_len);
  }
  if (const auto* rot = std::get_if<RotaryPos>(&enc)) {
    return rotary_rotate(grad, positions, rot->base, /*inverse=*/true);
  }
  return grad;
}

#define XNORATTN_INSTANTIATE(T)                                                                   \
  template FeatureRows<T> apply_feature_map<T>(FeatureMap, const Matrix<T>&, Execution);          \
  template Matrix<T> cosine_expand<T>(const Matrix<T>&, std::span<const std::size_t>,             \
                                      std::size_t);                                               \
  template Matrix<T> cosine_expand_adjoint<T>(const Matrix<T>&, std::span<const std::size_t>,     \
                                              std::size_t);                                       \
  template Matrix<T> rotary_rotate<T>(const Matrix<T>&, std::span<const double>, double, bool);   \
  template Matrix<T> rotary_rotate<T>(const Matrix<T>&, std::span<const std::size_t>, double,     \
                                      bool);                                                      \
  template Matrix<T> encode_positions<T>(const PosEncoding&, const Matrix<T>&,                    \
                                         std::span<const std::size_t>);                           \
  template Matrix<T> encode_positions_adjoint<T>(const PosEncoding&, const Matrix<T>&,            \
                                                 std::span<const std::size_t>);

XNORATTN_INSTANTIATE(double)
XNORATTN_INSTANTIATE(float)

#undef XNORATTN_INSTANTIATE

}  // namespace xnorattn
