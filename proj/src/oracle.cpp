#include "xnorattn/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace xnorattn {

DenseMatrix similarity_attention_oracle(const Similarity& s, std::size_t num_queries,
                                        const DenseMatrix& v, bool allow_signed) {
  const std::size_t num_keys = v.rows();
  DenseMatrix out(num_queries, v.cols());
  std::vector<double> num(v.cols());
  for (std::size_t i = 0; i < num_queries; ++i) {
    std::fill(num.begin(), num.end(), 0.0);
    double den = 0.0;
    for (std::size_t j = 0; j < num_keys; ++j) {
      const double sij = s(i, j);
      if (!std::isfinite(sij)) {
        throw Error(ErrorKind::NonFinite, "similarity (" + std::to_string(i) + ", " +
                                              std::to_string(j) + ")");
      }
      if (!allow_signed && sij < 0.0) {
        throw Error(ErrorKind::InvalidArgument, "negative similarity at row " +
                                                    std::to_string(i) + ", key " +
                                                    std::to_string(j));
      }
      den += sij;
      const auto vj = v.row(j);
      for (std::size_t c = 0; c < num.size(); ++c) num[c] += sij * vj[c];
    }
    if (den == 0.0 || (!allow_signed && !(den > 0.0))) {
      throw Error(ErrorKind::ZeroDenominator, "similarity row " + std::to_string(i) + " sums to 0");
    }
    for (std::size_t c = 0; c < num.size(); ++c) out(i, c) = num[c] / den;
  }
  require_finite(out, "similarity_attention_oracle");
  return out;
}

namespace {

// Per-row kernels written out independently of feature_maps.cpp.
std::vector<double> row_features(FeatureMap map, std::span<const double> x) {
  std::vector<double> f(x.size());
  switch (map) {
    case FeatureMap::SoftmaxKernel:
    case FeatureMap::SoftmaxComplementPair: {
      double peak = x[0];
      for (double v : x) peak = std::max(peak, v);
      double total = 0.0;
      for (std::size_t r = 0; r < x.size(); ++r) total += (f[r] = std::exp(x[r] - peak));
      for (double& v : f) v /= total;
      if (map == FeatureMap::SoftmaxComplementPair) {
        for (double& v : f) v = 1.0 - v;
      }
      break;
    }
    case FeatureMap::EluPlusOne:
      for (std::size_t r = 0; r < x.size(); ++r) f[r] = x[r] > 0.0 ? x[r] + 1.0 : std::exp(x[r]);
      break;
    case FeatureMap::ReLU:
      for (std::size_t r = 0; r < x.size(); ++r) f[r] = x[r] > 0.0 ? x[r] : 0.0;
      break;
  }
  return f;
}

std::vector<std::vector<double>> all_rows(FeatureMap map, const DenseMatrix& m) {
  std::vector<std::vector<double>> rows;
  rows.reserve(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) rows.push_back(row_features(map, m.row(i)));
  return rows;
}

// ⟨a, R(offset)·b⟩ where R rotates pair k by offset·base^(-2k/d).
double relative_rotary_dot(const std::vector<double>& a, const std::vector<double>& b,
                           double offset, double base) {
  const std::size_t d = a.size();
  double acc = 0.0;
  for (std::size_t k = 0; 2 * k + 1 < d; ++k) {
    const double angle = offset * std::pow(base, -2.0 * static_cast<double>(k) / static_cast<double>(d));
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    const double bx = c * b[2 * k] - s * b[2 * k + 1];
    const double by = s * b[2 * k] + c * b[2 * k + 1];
    acc += a[2 * k] * bx + a[2 * k + 1] * by;
  }
  return acc;
}

double plain_dot(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r) acc += a[r] * b[r];
  return acc;
}

struct FeatureTerm {
  double weight;
  std::vector<std::vector<double>> query;
  std::vector<std::vector<double>> key;
};

std::vector<FeatureTerm> oracle_terms(const AttentionSpec& spec, const DenseMatrix& q,
                                      const DenseMatrix& k) {
  std::vector<FeatureTerm> terms;
  if (spec.variant == Variant::LinearKernel) {
    terms.push_back({1.0, all_rows(spec.kernel, q), all_rows(spec.kernel, k)});
  } else {
    terms.push_back({spec.effective_w1(), all_rows(FeatureMap::SoftmaxKernel, q),
                     all_rows(FeatureMap::SoftmaxKernel, k)});
    terms.push_back({spec.effective_w2(), all_rows(FeatureMap::SoftmaxComplementPair, q),
                     all_rows(FeatureMap::SoftmaxComplementPair, k)});
  }
  return terms;
}

Similarity term_similarity(std::vector<FeatureTerm> terms, const PosEncoding& pos) {
  if (const auto* rot = std::get_if<RotaryPos>(&pos)) {
    const double base = rot->base;
    return [terms = std::move(terms), base](std::size_t i, std::size_t j) {
      const double offset = static_cast<double>(j) - static_cast<double>(i);
      double s = 0.0;
      for (const auto& t : terms) s += t.weight * relative_rotary_dot(t.query[i], t.key[j], offset, base);
      return s;
    };
  }
  return [terms = std::move(terms), pos](std::size_t i, std::size_t j) {
    double s = 0.0;
    for (const auto& t : terms) s += t.weight * plain_dot(t.query[i], t.key[j]);
    return s * direct_pos_weight(pos, i, j);
  };
}

}  // namespace

Similarity spec_similarity(const AttentionSpec& spec, const DenseMatrix& q, const DenseMatrix& k) {
  spec.validate();
  if (q.cols() != k.cols()) throw_shape_mismatch("spec_similarity", q.shape_string(), k.shape_string());
  if (spec.variant == Variant::Exact) {
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
    return [&q, &k, inv_sqrt_d](std::size_t i, std::size_t j) {
      double dot = 0.0;
      for (std::size_t r = 0; r < q.cols(); ++r) dot += q(i, r) * k(j, r);
      return std::exp(dot * inv_sqrt_d);
    };
  }
  if (spec.normalization == Normalization::PerTerm) {
    throw Error(ErrorKind::InvalidArgument, "per-term normalization has no single similarity");
  }
  return term_similarity(oracle_terms(spec, q, k),
                         resolve_positions(spec.pos, std::max(q.rows(), k.rows())));
}

DenseMatrix oracle_attention(const AttentionSpec& spec, const DenseMatrix& q, const DenseMatrix& k,
                             const DenseMatrix& v) {
  spec.validate();
  if (k.rows() != v.rows()) throw_shape_mismatch("oracle_attention", k.shape_string(), v.shape_string());
  const bool signed_sims = std::holds_alternative<RotaryPos>(spec.pos);
  if (spec.variant == Variant::Exact || spec.normalization == Normalization::Joint) {
    return similarity_attention_oracle(spec_similarity(spec, q, k), q.rows(), v, signed_sims);
  }
  const PosEncoding pos = resolve_positions(spec.pos, std::max(q.rows(), k.rows()));
  DenseMatrix out(q.rows(), v.cols());
  for (auto& term : oracle_terms(spec, q, k)) {
    const double w = term.weight;
    term.weight = 1.0;
    std::vector<FeatureTerm> single;
    single.push_back(std::move(term));
    const DenseMatrix part =
        similarity_attention_oracle(term_similarity(std::move(single), pos), q.rows(), v, signed_sims);
    out = add(out, scale(part, w));
  }
  return out;
}

}  // namespace xnorattn
