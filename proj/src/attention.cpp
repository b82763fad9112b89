#include "xnorattn/attention.hpp"

#include <cmath>
#include <limits>

#include "xnorattn/rng.hpp"

namespace xnorattn {

AttentionSpec AttentionSpec::exact() {
  AttentionSpec s;
  s.variant = Variant::Exact;
  return s;
}

AttentionSpec AttentionSpec::linear(FeatureMap kernel, PosEncoding pos) {
  AttentionSpec s;
  s.variant = Variant::LinearKernel;
  s.kernel = kernel;
  s.pos = pos;
  return s;
}

AttentionSpec AttentionSpec::xnor(PosEncoding pos) {
  AttentionSpec s;
  s.variant = Variant::Xnor;
  s.pos = pos;
  return s;
}

AttentionSpec AttentionSpec::wxnor(double w1, double w2, PosEncoding pos) {
  AttentionSpec s;
  s.variant = Variant::WXnor;
  s.w1 = w1;
  s.w2 = w2;
  s.pos = pos;
  return s;
}

void AttentionSpec::validate() const {
  if (!(eps >= 0.0) || !std::isfinite(eps)) {
    throw Error(ErrorKind::InvalidArgument, "eps must be finite and >= 0");
  }
  if (!std::isfinite(w1) || !std::isfinite(w2)) {
    throw Error(ErrorKind::InvalidArgument, "w1, w2 must be finite");
  }
  if (variant == Variant::Exact && is_positional(pos)) {
    throw Error(ErrorKind::InvalidArgument, "exact attention takes no factored positional encoding");
  }
  if (variant == Variant::LinearKernel && kernel == FeatureMap::SoftmaxComplementPair) {
    throw Error(ErrorKind::InvalidArgument,
                "the complement pair is the XNOR engine; use Variant::Xnor or WXnor");
  }
  if (const auto* rot = std::get_if<RotaryPos>(&pos); rot && !(rot->base > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "rotary base must be positive");
  }
}

std::string AttentionSpec::name() const {
  std::string base;
  switch (variant) {
    case Variant::Exact: base = "exact"; break;
    case Variant::LinearKernel: base = to_string(kernel); break;
    case Variant::Xnor: base = "xnor"; break;
    case Variant::WXnor: base = "wxnor"; break;
  }
  if (is_positional(pos)) base += "-" + to_string(pos);
  return base;
}

AttentionSpec parse_variant(const std::string& name) {
  std::string head = name;
  PosEncoding pos = NoPos{};
  if (const auto dash = name.find('-'); dash != std::string::npos) {
    head = name.substr(0, dash);
    const std::string tail = name.substr(dash + 1);
    if (tail == "cosine") {
      pos = CosinePos{};
    } else if (tail == "rotary") {
      pos = RotaryPos{};
    } else {
      throw Error(ErrorKind::InvalidArgument, "unknown positional encoding '" + tail + "'");
    }
  }
  AttentionSpec spec;
  if (head == "exact") {
    spec = AttentionSpec::exact();
    spec.pos = pos;
  } else if (head == "xnor") {
    spec = AttentionSpec::xnor(pos);
  } else if (head == "wxnor") {
    spec = AttentionSpec::wxnor(1.0, 1.0, pos);
  } else if (head == "softmax" || head == "elu" || head == "relu") {
    spec = AttentionSpec::linear(parse_feature_map(head), pos);
  } else {
    throw Error(ErrorKind::InvalidArgument, "unknown attention variant '" + name + "'");
  }
  spec.validate();
  return spec;
}

namespace {

template <typename T>
void check_qkv(const char* op, const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v) {
  if (q.cols() != k.cols()) throw_shape_mismatch(op, "Q " + q.shape_string(), "K " + k.shape_string());
  if (k.rows() != v.rows()) throw_shape_mismatch(op, "K " + k.shape_string(), "V " + v.shape_string());
  if (q.cols() == 0) throw Error(ErrorKind::ShapeMismatch, std::string(op) + ": head dimension is 0");
  if (k.rows() == 0) throw Error(ErrorKind::ShapeMismatch, std::string(op) + ": no keys");
}

template <typename T>
T guard_denominator(T den, double eps, std::size_t& clamped) {
  if (eps > 0.0 && std::abs(den) < static_cast<T>(eps)) {
    ++clamped;
    return den < T(0) ? static_cast<T>(-eps) : static_cast<T>(eps);
  }
  return den;
}

}  // namespace

template <typename T>
Matrix<T> exact_softmax_attention(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                                  Execution exec) {
  check_qkv("exact_softmax_attention", q, k, v);
  Matrix<T> scores = matmul(q, transpose(k), exec);
  const T inv_sqrt_d = T(1) / std::sqrt(static_cast<T>(q.cols()));
  for (auto& s : scores.data()) s *= inv_sqrt_d;
  rowwise_softmax_inplace(scores, exec);
  return matmul(scores, v, exec);
}

template <typename T>
std::vector<FactoredTerm<T>> build_factored_terms(const AttentionSpec& spec, const Matrix<T>& q,
                                                  const Matrix<T>& k) {
  spec.validate();
  if (spec.variant == Variant::Exact) {
    throw Error(ErrorKind::InvalidArgument, "exact attention has no factored form");
  }
  const PosEncoding pos = resolve_positions(spec.pos, std::max(q.rows(), k.rows()));
  const auto q_pos = sequence_positions(q.rows());
  const auto k_pos = sequence_positions(k.rows());
  auto encode = [&](const Matrix<T>& f, const std::vector<std::size_t>& p) {
    return encode_positions(pos, f, std::span<const std::size_t>(p));
  };

  std::vector<FactoredTerm<T>> terms;
  if (spec.variant == Variant::LinearKernel) {
    auto fq = apply_feature_map(spec.kernel, q, spec.exec);
    auto fk = apply_feature_map(spec.kernel, k, spec.exec);
    terms.push_back({1.0, encode(fq.primary, q_pos), encode(fk.primary, k_pos)});
    return terms;
  }
  auto fq = apply_feature_map(FeatureMap::SoftmaxComplementPair, q, spec.exec);
  auto fk = apply_feature_map(FeatureMap::SoftmaxComplementPair, k, spec.exec);
  terms.push_back({spec.effective_w1(), encode(fq.primary, q_pos), encode(fk.primary, k_pos)});
  terms.push_back({spec.effective_w2(), encode(*fq.complement, q_pos), encode(*fk.complement, k_pos)});
  return terms;
}

template <typename T>
Matrix<T> factored_attention(const std::vector<FactoredTerm<T>>& terms, const Matrix<T>& v,
                             double eps, Normalization normalization, Execution exec,
                             EngineDiagnostics* diag) {
  if (terms.empty()) throw Error(ErrorKind::InvalidArgument, "factored_attention: no terms");
  const std::size_t n = terms.front().query.rows();
  const std::size_t dv = v.cols();

  // Key-side summaries, computed once: φ(K)ᵀV and φ(K)ᵀ1.
  std::vector<Matrix<T>> kv;
  std::vector<std::vector<T>> ksum;
  for (const auto& t : terms) {
    if (t.key.rows() != v.rows()) throw_shape_mismatch("factored_attention", t.key.shape_string(), v.shape_string());
    if (t.query.cols() != t.key.cols() || t.query.rows() != n) {
      throw_shape_mismatch("factored_attention", t.query.shape_string(), t.key.shape_string());
    }
    kv.push_back(matmul_tn(t.key, v, exec));
    ksum.push_back(column_sums(t.key, exec));
  }

  Matrix<T> out(n, dv);
  std::size_t clamped = 0;
  std::size_t bad_row = std::numeric_limits<std::size_t>::max();
  const bool parallel = exec == Execution::Parallel;
  const bool joint = normalization == Normalization::Joint;

#pragma omp parallel if (parallel)
  {
    std::vector<T> num(dv);
    std::vector<T> term_num(dv);
    std::size_t local_clamped = 0;
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < n; ++i) {
      auto dst = out.row(i);
      std::fill(num.begin(), num.end(), T(0));
      T den = T(0);
      bool zero = false;
      for (std::size_t t = 0; t < terms.size(); ++t) {
        const auto a = terms[t].query.row(i);
        const T w = static_cast<T>(terms[t].weight);
        std::fill(term_num.begin(), term_num.end(), T(0));
        T term_den = T(0);
        for (std::size_t r = 0; r < a.size(); ++r) {
          const T coef = a[r];
          const T* kv_row = kv[t].row(r).data();
          for (std::size_t c = 0; c < dv; ++c) term_num[c] += coef * kv_row[c];
          term_den += coef * ksum[t][r];
        }
        if (joint) {
          for (std::size_t c = 0; c < dv; ++c) num[c] += w * term_num[c];
          den += w * term_den;
        } else {
          T g = guard_denominator(term_den + static_cast<T>(eps), eps, local_clamped);
          if (g == T(0)) {
            zero = true;
            break;
          }
          for (std::size_t c = 0; c < dv; ++c) num[c] += w * (term_num[c] / g);
        }
      }
      if (joint && !zero) {
        den = guard_denominator(den + static_cast<T>(eps), eps, local_clamped);
        zero = den == T(0);
        if (!zero) {
          for (std::size_t c = 0; c < dv; ++c) dst[c] = num[c] / den;
        }
      } else if (!zero) {
        for (std::size_t c = 0; c < dv; ++c) dst[c] = num[c];
      }
      if (zero) {
#pragma omp critical(xnorattn_bad_row)
        bad_row = std::min(bad_row, i);
      }
    }
#pragma omp atomic
    clamped += local_clamped;
  }

  if (bad_row != std::numeric_limits<std::size_t>::max()) {
    throw Error(ErrorKind::ZeroDenominator,
                "attention denominator is exactly 0 at row " + std::to_string(bad_row) +
                    " (eps = 0)");
  }
  if (diag) diag->clamped_denominators += clamped;
  require_finite(out, "factored_attention output");
  return out;
}

template <typename T>
Matrix<T> linear_kernel_attention(const AttentionSpec& spec, const Matrix<T>& q,
                                  const Matrix<T>& k, const Matrix<T>& v,
                                  EngineDiagnostics* diag) {
  if (spec.variant != Variant::LinearKernel) {
    throw Error(ErrorKind::InvalidArgument, "linear_kernel_attention needs a LinearKernel spec");
  }
  check_qkv("linear_kernel_attention", q, k, v);
  const auto terms = build_factored_terms(spec, q, k);
  return factored_attention(terms, v, spec.eps, Normalization::Joint, spec.exec, diag);
}

template <typename T>
Matrix<T> xnor_attention(const AttentionSpec& spec, const Matrix<T>& q, const Matrix<T>& k,
                         const Matrix<T>& v, EngineDiagnostics* diag) {
  if (spec.variant != Variant::Xnor && spec.variant != Variant::WXnor) {
    throw Error(ErrorKind::InvalidArgument, "xnor_attention needs an Xnor or WXnor spec");
  }
  check_qkv("xnor_attention", q, k, v);
  const auto terms = build_factored_terms(spec, q, k);
  return factored_attention(terms, v, spec.eps, spec.normalization, spec.exec, diag);
}

template <typename T>
Matrix<T> attention_forward(const AttentionSpec& spec, const Matrix<T>& q, const Matrix<T>& k,
                            const Matrix<T>& v, EngineDiagnostics* diag) {
  spec.validate();
  switch (spec.variant) {
    case Variant::Exact: return exact_softmax_attention(q, k, v, spec.exec);
    case Variant::LinearKernel: return linear_kernel_attention(spec, q, k, v, diag);
    case Variant::Xnor:
    case Variant::WXnor: return xnor_attention(spec, q, k, v, diag);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown variant");
}

DenseMatrix explicit_attention_weights(const AttentionSpec& spec, const DenseMatrix& q,
                                       const DenseMatrix& k) {
  spec.validate();
  if (q.rows() > kExplicitWeightsMaxN || k.rows() > kExplicitWeightsMaxN) {
    throw Error(ErrorKind::InvalidArgument,
                "explicit weights limited to N <= " + std::to_string(kExplicitWeightsMaxN));
  }
  if (q.cols() != k.cols()) throw_shape_mismatch("explicit_attention_weights", q.shape_string(), k.shape_string());
  if (spec.variant == Variant::Exact) {
    DenseMatrix scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(q.cols())));
    return rowwise_softmax(scores);
  }

  const auto terms = build_factored_terms(spec, q, k);
  const std::size_t n = q.rows();
  const std::size_t m = k.rows();
  std::vector<DenseMatrix> sims;
  for (const auto& t : terms) sims.push_back(matmul(t.query, transpose(t.key)));

  DenseMatrix weights(n, m);
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (spec.normalization == Normalization::Joint) {
      double den = 0.0;
      for (std::size_t t = 0; t < terms.size(); ++t) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < m; ++j) row_sum += sims[t](i, j);
        den += terms[t].weight * row_sum;
      }
      den = guard_denominator(den + spec.eps, spec.eps, clamped);
      if (den == 0.0) throw Error(ErrorKind::ZeroDenominator, "row " + std::to_string(i));
      for (std::size_t j = 0; j < m; ++j) {
        double s = 0.0;
        for (std::size_t t = 0; t < terms.size(); ++t) s += terms[t].weight * sims[t](i, j);
        weights(i, j) = s / den;
      }
    } else {
      for (std::size_t t = 0; t < terms.size(); ++t) {
        double row_sum = 0.0;
        for (std::size_t j = 0; j < m; ++j) row_sum += sims[t](i, j);
        const double den = guard_denominator(row_sum + spec.eps, spec.eps, clamped);
        if (den == 0.0) throw Error(ErrorKind::ZeroDenominator, "row " + std::to_string(i));
        for (std::size_t j = 0; j < m; ++j) weights(i, j) += terms[t].weight * sims[t](i, j) / den;
      }
    }
  }
  require_finite(weights, "explicit_attention_weights");
  return weights;
}

// ---------------------------------------------------------------------------

void MultiHeadParams::validate() const {
  if (heads.empty()) throw Error(ErrorKind::InvalidArgument, "multi-head attention needs >= 1 head");
  const std::size_t dm = heads.front().w_q.rows();
  const std::size_t d = heads.front().w_q.cols();
  for (std::size_t h = 0; h < heads.size(); ++h) {
    for (const DenseMatrix* w : {&heads[h].w_q, &heads[h].w_k, &heads[h].w_v}) {
      if (w->rows() != dm || w->cols() != d) {
        throw Error(ErrorKind::ShapeMismatch, "head " + std::to_string(h) + " projection is " +
                                                  w->shape_string() + ", expected " +
                                                  std::to_string(dm) + "x" + std::to_string(d));
      }
    }
  }
  if (w_o.rows() != heads.size() * d || w_o.cols() != dm) {
    throw Error(ErrorKind::ShapeMismatch, "W_O is " + w_o.shape_string() + ", expected " +
                                              std::to_string(heads.size() * d) + "x" +
                                              std::to_string(dm));
  }
}

MultiHeadParams MultiHeadParams::random(std::size_t model_dim, std::size_t num_heads,
                                        std::size_t head_dim, Rng& rng) {
  MultiHeadParams p;
  const double in_scale = 1.0 / std::sqrt(static_cast<double>(model_dim));
  for (std::size_t h = 0; h < num_heads; ++h) {
    HeadParams head;
    head.w_q = random_normal(model_dim, head_dim, rng, in_scale);
    head.w_k = random_normal(model_dim, head_dim, rng, in_scale);
    head.w_v = random_normal(model_dim, head_dim, rng, in_scale);
    p.heads.push_back(std::move(head));
  }
  p.w_o = random_normal(num_heads * head_dim, model_dim, rng,
                        1.0 / std::sqrt(static_cast<double>(num_heads * head_dim)));
  return p;
}

AttentionSpec head_spec(const AttentionSpec& spec, const HeadParams& head) {
  AttentionSpec s = spec;
  if (spec.variant == Variant::WXnor) {
    s.w1 = head.w1;
    s.w2 = head.w2;
  }
  return s;
}

DenseMatrix multi_head_attention(const DenseMatrix& x, const MultiHeadParams& params,
                                 const AttentionSpec& spec, const HeadEngine& engine) {
  params.validate();
  if (x.cols() != params.model_dim()) {
    throw_shape_mismatch("multi_head_attention", "X " + x.shape_string(),
                         "model_dim " + std::to_string(params.model_dim()));
  }
  std::vector<DenseMatrix> outputs;
  outputs.reserve(params.heads.size());
  for (const auto& head : params.heads) {
    const DenseMatrix q = matmul(x, head.w_q, spec.exec);
    const DenseMatrix k = matmul(x, head.w_k, spec.exec);
    const DenseMatrix v = matmul(x, head.w_v, spec.exec);
    const AttentionSpec hs = head_spec(spec, head);
    outputs.push_back(engine ? engine(hs, q, k, v) : attention_forward(hs, q, k, v));
  }
  return matmul(hconcat(outputs), params.w_o, spec.exec);
}

#define XNORATTN_INSTANTIATE(T)                                                                  \
  template Matrix<T> exact_softmax_attention<T>(const Matrix<T>&, const Matrix<T>&,              \
                                                const Matrix<T>&, Execution);                    \
  template Matrix<T> linear_kernel_attention<T>(const AttentionSpec&, const Matrix<T>&,          \
                                                const Matrix<T>&, const Matrix<T>&,              \
                                                EngineDiagnostics*);                             \
  template Matrix<T> xnor_attention<T>(const AttentionSpec&, const Matrix<T>&, const Matrix<T>&, \
                                       const Matrix<T>&, EngineDiagnostics*);                    \
  template Matrix<T> attention_forward<T>(const AttentionSpec&, const Matrix<T>&,                \
                                          const Matrix<T>&, const Matrix<T>&,                    \
                                          EngineDiagnostics*);                                   \
  template std::vector<FactoredTerm<T>> build_factored_terms<T>(                                 \
      const AttentionSpec&, const Matrix<T>&, const Matrix<T>&);                                 \
  template Matrix<T> factored_attention<T>(const std::vector<FactoredTerm<T>>&,                  \
                                           const Matrix<T>&, double, Normalization, Execution,   \
                                           EngineDiagnostics*);

XNORATTN_INSTANTIATE(double)
XNORATTN_INSTANTIATE(float)

#undef XNORATTN_INSTANTIATE

}  // namespace xnorattn
