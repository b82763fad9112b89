#include "xnorattn/gradients.hpp"

#include <algorithm>
#include <cmath>

namespace xnorattn {

namespace {

void check_upstream(const char* op, const DenseMatrix& q, const DenseMatrix& v,
                    const DenseMatrix& upstream) {
  if (upstream.rows() != q.rows() || upstream.cols() != v.cols()) {
    throw_shape_mismatch(op, "upstream " + upstream.shape_string(),
                         "output " + std::to_string(q.rows()) + "x" + std::to_string(v.cols()));
  }
}

// dx = s ⊙ (g - <s, g>) per row, for s = softmax(x).
DenseMatrix softmax_rows_backward(const DenseMatrix& s, const DenseMatrix& g) {
  DenseMatrix dx(s.rows(), s.cols());
  for (std::size_t i = 0; i < s.rows(); ++i) {
    const auto si = s.row(i);
    const auto gi = g.row(i);
    double dot = 0.0;
    for (std::size_t r = 0; r < si.size(); ++r) dot += si[r] * gi[r];
    auto out = dx.row(i);
    for (std::size_t r = 0; r < si.size(); ++r) out[r] = si[r] * (gi[r] - dot);
  }
  return dx;
}

DenseMatrix kernel_backward(FeatureMap map, const DenseMatrix& x, const DenseMatrix& features,
                            const DenseMatrix& g) {
  switch (map) {
    case FeatureMap::SoftmaxKernel: return softmax_rows_backward(features, g);
    case FeatureMap::EluPlusOne: {
      DenseMatrix dx(x.rows(), x.cols());
      auto xs = x.data();
      auto gs = g.data();
      auto out = dx.data();
      for (std::size_t k = 0; k < xs.size(); ++k) out[k] = gs[k] * (xs[k] > 0.0 ? 1.0 : std::exp(xs[k]));
      return dx;
    }
    case FeatureMap::ReLU: {
      DenseMatrix dx(x.rows(), x.cols());
      auto xs = x.data();
      auto gs = g.data();
      auto out = dx.data();
      for (std::size_t k = 0; k < xs.size(); ++k) out[k] = xs[k] > 0.0 ? gs[k] : 0.0;
      return dx;
    }
    case FeatureMap::SoftmaxComplementPair: break;
  }
  throw Error(ErrorKind::InvalidArgument, "kernel_backward: complement pair handled by XNOR path");
}

struct TermGrads {
  std::vector<DenseMatrix> d_query;  // per term, w.r.t. encoded query features
  std::vector<DenseMatrix> d_key;
  std::vector<double> d_weight;
  DenseMatrix dv;
};

// Backward through factored_attention (joint normalization).
TermGrads factored_backward(const std::vector<FactoredTerm<double>>& terms, const DenseMatrix& v,
                            double eps, const DenseMatrix& upstream) {
  const std::size_t n = terms.front().query.rows();
  const std::size_t dv = v.cols();

  std::vector<DenseMatrix> kv;
  std::vector<std::vector<double>> ksum;
  for (const auto& t : terms) {
    kv.push_back(matmul_tn(t.key, v));
    ksum.push_back(column_sums(t.key));
  }

  // Forward recomputation per row: u_t = A_t,i KV_t, s_t = A_t,i · z_t.
  std::vector<DenseMatrix> u(terms.size(), DenseMatrix(n, dv));
  std::vector<std::vector<double>> s(terms.size(), std::vector<double>(n, 0.0));
  DenseMatrix d_num(n, dv);
  std::vector<double> d_den(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> num(dv, 0.0);
    double den = 0.0;
    for (std::size_t t = 0; t < terms.size(); ++t) {
      const auto a = terms[t].query.row(i);
      auto ui = u[t].row(i);
      for (std::size_t r = 0; r < a.size(); ++r) {
        const auto kv_row = kv[t].row(r);
        for (std::size_t c = 0; c < dv; ++c) ui[c] += a[r] * kv_row[c];
        s[t][i] += a[r] * ksum[t][r];
      }
      for (std::size_t c = 0; c < dv; ++c) num[c] += terms[t].weight * ui[c];
      den += terms[t].weight * s[t][i];
    }
    den += eps;
    bool clamped = false;
    if (eps > 0.0 && std::abs(den) < eps) {
      den = den < 0.0 ? -eps : eps;
      clamped = true;
    }
    if (den == 0.0) {
      throw Error(ErrorKind::ZeroDenominator, "backward: row " + std::to_string(i) + " (eps = 0)");
    }
    const auto gi = upstream.row(i);
    double g_dot_o = 0.0;
    for (std::size_t c = 0; c < dv; ++c) {
      d_num(i, c) = gi[c] / den;
      g_dot_o += gi[c] * (num[c] / den);
    }
    d_den[i] = clamped ? 0.0 : -g_dot_o / den;
  }

  TermGrads out;
  out.dv = DenseMatrix(v.rows(), dv);
  DenseMatrix d_den_col(n, 1);
  for (std::size_t i = 0; i < n; ++i) d_den_col(i, 0) = d_den[i];

  for (std::size_t t = 0; t < terms.size(); ++t) {
    const double w = terms[t].weight;
    const std::size_t p = terms[t].query.cols();

    double dw = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ui = u[t].row(i);
      const auto dn = d_num.row(i);
      for (std::size_t c = 0; c < dv; ++c) dw += ui[c] * dn[c];
      dw += s[t][i] * d_den[i];
    }
    out.d_weight.push_back(dw);

    // dA_t = w (dNum KV_tᵀ + dden z_tᵀ)
    DenseMatrix d_query = matmul(d_num, transpose(kv[t]));
    for (std::size_t i = 0; i < n; ++i) {
      auto row = d_query.row(i);
      for (std::size_t r = 0; r < p; ++r) row[r] = w * (row[r] + d_den[i] * ksum[t][r]);
    }
    out.d_query.push_back(std::move(d_query));

    // dKV_t = w A_tᵀ dNum, dz_t = w A_tᵀ dden
    DenseMatrix d_kv = scale(matmul_tn(terms[t].query, d_num), w);
    DenseMatrix d_z = scale(matmul_tn(terms[t].query, d_den_col), w);

    // dB_t = V dKV_tᵀ + 1 dz_tᵀ
    DenseMatrix d_key = matmul(v, transpose(d_kv));
    for (std::size_t j = 0; j < d_key.rows(); ++j) {
      auto row = d_key.row(j);
      for (std::size_t r = 0; r < p; ++r) row[r] += d_z(r, 0);
    }
    out.d_key.push_back(std::move(d_key));

    out.dv = add(out.dv, matmul(terms[t].key, d_kv));
  }
  return out;
}

void check_factored_spec(const AttentionSpec& spec) {
  if (spec.normalization != Normalization::Joint) {
    throw Error(ErrorKind::InvalidArgument, "backward is defined for joint normalization only");
  }
}

}  // namespace

GradBundle xnor_attention_backward(const AttentionSpec& spec, const DenseMatrix& q,
                                   const DenseMatrix& k, const DenseMatrix& v,
                                   const DenseMatrix& upstream) {
  if (spec.variant != Variant::Xnor && spec.variant != Variant::WXnor) {
    throw Error(ErrorKind::InvalidArgument, "xnor_attention_backward needs an Xnor or WXnor spec");
  }
  check_factored_spec(spec);
  check_upstream("xnor_attention_backward", q, v, upstream);
  if (q.cols() != k.cols() || k.rows() != v.rows()) {
    throw_shape_mismatch("xnor_attention_backward", q.shape_string(), k.shape_string());
  }

  const auto terms = build_factored_terms(spec, q, k);
  const TermGrads tg = factored_backward(terms, v, spec.eps, upstream);

  const PosEncoding pos = resolve_positions(spec.pos, std::max(q.rows(), k.rows()));
  const auto q_pos = sequence_positions(q.rows());
  const auto k_pos = sequence_positions(k.rows());
  auto unencode = [&](const DenseMatrix& g, const std::vector<std::size_t>& p) {
    return encode_positions_adjoint(pos, g, std::span<const std::size_t>(p));
  };

  // Sm' = 1 - Sm, so the complement's gradient enters with a minus sign.
  const DenseMatrix d_sm_q = subtract(unencode(tg.d_query[0], q_pos), unencode(tg.d_query[1], q_pos));
  const DenseMatrix d_sm_k = subtract(unencode(tg.d_key[0], k_pos), unencode(tg.d_key[1], k_pos));

  GradBundle g;
  g.dq = softmax_rows_backward(rowwise_softmax(q), d_sm_q);
  g.dk = softmax_rows_backward(rowwise_softmax(k), d_sm_k);
  g.dv = tg.dv;
  g.dw1 = tg.d_weight[0];
  g.dw2 = tg.d_weight[1];
  return g;
}

GradBundle linear_attention_backward(const AttentionSpec& spec, const DenseMatrix& q,
                                     const DenseMatrix& k, const DenseMatrix& v,
                                     const DenseMatrix& upstream) {
  if (spec.variant != Variant::LinearKernel) {
    throw Error(ErrorKind::InvalidArgument, "linear_attention_backward needs a LinearKernel spec");
  }
  check_upstream("linear_attention_backward", q, v, upstream);
  if (q.cols() != k.cols() || k.rows() != v.rows()) {
    throw_shape_mismatch("linear_attention_backward", q.shape_string(), k.shape_string());
  }

  const auto terms = build_factored_terms(spec, q, k);
  const TermGrads tg = factored_backward(terms, v, spec.eps, upstream);

  const PosEncoding pos = resolve_positions(spec.pos, std::max(q.rows(), k.rows()));
  const auto q_pos = sequence_positions(q.rows());
  const auto k_pos = sequence_positions(k.rows());
  const DenseMatrix d_fq = encode_positions_adjoint(pos, tg.d_query[0], std::span<const std::size_t>(q_pos));
  const DenseMatrix d_fk = encode_positions_adjoint(pos, tg.d_key[0], std::span<const std::size_t>(k_pos));

  GradBundle g;
  g.dq = kernel_backward(spec.kernel, q, apply_feature_map(spec.kernel, q).primary, d_fq);
  g.dk = kernel_backward(spec.kernel, k, apply_feature_map(spec.kernel, k).primary, d_fk);
  g.dv = tg.dv;
  return g;
}

GradBundle exact_attention_backward(const DenseMatrix& q, const DenseMatrix& k,
                                    const DenseMatrix& v, const DenseMatrix& upstream) {
  check_upstream("exact_attention_backward", q, v, upstream);
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  const DenseMatrix p = rowwise_softmax(scale(matmul(q, transpose(k)), inv_sqrt_d));
  GradBundle g;
  g.dv = matmul_tn(p, upstream);
  const DenseMatrix dp = matmul(upstream, transpose(v));
  const DenseMatrix ds = softmax_rows_backward(p, dp);
  g.dq = scale(matmul(ds, k), inv_sqrt_d);
  g.dk = scale(matmul_tn(ds, q), inv_sqrt_d);
  return g;
}

GradBundle attention_backward(const AttentionSpec& spec, const DenseMatrix& q,
                              const DenseMatrix& k, const DenseMatrix& v,
                              const DenseMatrix& upstream) {
  spec.validate();
  switch (spec.variant) {
    case Variant::Exact: return exact_attention_backward(q, k, v, upstream);
    case Variant::LinearKernel: return linear_attention_backward(spec, q, k, v, upstream);
    case Variant::Xnor:
    case Variant::WXnor: return xnor_attention_backward(spec, q, k, v, upstream);
  }
  throw Error(ErrorKind::InvalidArgument, "unknown variant");
}

MultiHeadGrads multi_head_backward(const DenseMatrix& x, const MultiHeadParams& params,
                                   const AttentionSpec& spec, const DenseMatrix& upstream) {
  params.validate();
  if (x.cols() != params.model_dim()) {
    throw_shape_mismatch("multi_head_backward", "X " + x.shape_string(),
                         "model_dim " + std::to_string(params.model_dim()));
  }
  if (upstream.rows() != x.rows() || upstream.cols() != params.model_dim()) {
    throw_shape_mismatch("multi_head_backward", "upstream " + upstream.shape_string(),
                         "X " + x.shape_string());
  }
  const std::size_t d = params.head_dim();

  struct HeadInputs {
    DenseMatrix q, k, v;
  };
  std::vector<HeadInputs> inputs;
  std::vector<DenseMatrix> outputs;
  for (const auto& head : params.heads) {
    HeadInputs in{matmul(x, head.w_q), matmul(x, head.w_k), matmul(x, head.w_v)};
    outputs.push_back(attention_forward(head_spec(spec, head), in.q, in.k, in.v));
    inputs.push_back(std::move(in));
  }
  const DenseMatrix concat = hconcat(outputs);

  MultiHeadGrads grads;
  grads.dw_o = matmul_tn(concat, upstream);
  const DenseMatrix d_concat = matmul(upstream, transpose(params.w_o));
  for (std::size_t h = 0; h < params.heads.size(); ++h) {
    const DenseMatrix d_out = column_block(d_concat, h * d, d);
    const auto& in = inputs[h];
    const GradBundle g = attention_backward(head_spec(spec, params.heads[h]), in.q, in.k, in.v, d_out);
    HeadGrads hg;
    hg.dw_q = matmul_tn(x, g.dq);
    hg.dw_k = matmul_tn(x, g.dk);
    hg.dw_v = matmul_tn(x, g.dv);
    hg.dw1 = g.dw1;
    hg.dw2 = g.dw2;
    grads.heads.push_back(std::move(hg));
  }
  return grads;
}

// ---------------------------------------------------------------------------

FdReport finite_difference_check(const ScalarFunction& f, std::span<const double> point,
                                 std::span<const double> analytic, double h, double abs_floor) {
  if (point.size() != analytic.size()) {
    throw Error(ErrorKind::ShapeMismatch, "finite_difference_check: point has " +
                                              std::to_string(point.size()) + " entries, gradient " +
                                              std::to_string(analytic.size()));
  }
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidArgument, "finite difference step must be > 0");
  std::vector<double> x(point.begin(), point.end());
  FdReport report;
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double orig = x[k];
    x[k] = orig + h;
    const double fp = f(x);
    x[k] = orig - h;
    const double fm = f(x);
    x[k] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw Error(ErrorKind::NonFinite, "finite difference evaluation at index " + std::to_string(k));
    }
    const double numeric = (fp - fm) / (2.0 * h);
    const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), abs_floor});
    const double rel = std::abs(analytic[k] - numeric) / denom;
    if (k == 0 || rel > report.max_rel_error) {
      report = {rel, k, analytic[k], numeric};
    }
  }
  return report;
}

std::vector<double> flatten(const DenseMatrix& m) { return {m.data().begin(), m.data().end()}; }

std::vector<double> flatten(const MultiHeadParams& p) {
  std::vector<double> out;
  for (const auto& h : p.heads) {
    for (const DenseMatrix* w : {&h.w_q, &h.w_k, &h.w_v}) out.insert(out.end(), w->data().begin(), w->data().end());
    out.push_back(h.w1);
    out.push_back(h.w2);
  }
  out.insert(out.end(), p.w_o.data().begin(), p.w_o.data().end());
  return out;
}

std::vector<double> flatten(const MultiHeadGrads& g) {
  std::vector<double> out;
  for (const auto& h : g.heads) {
    for (const DenseMatrix* w : {&h.dw_q, &h.dw_k, &h.dw_v}) out.insert(out.end(), w->data().begin(), w->data().end());
    out.push_back(h.dw1);
    out.push_back(h.dw2);
  }
  out.insert(out.end(), g.dw_o.data().begin(), g.dw_o.data().end());
  return out;
}

MultiHeadParams unflatten(std::span<const double> values, const MultiHeadParams& shape) {
  MultiHeadParams p = shape;
  std::size_t at = 0;
  auto take = [&](DenseMatrix& m) {
    if (at + m.size() > values.size()) throw Error(ErrorKind::ShapeMismatch, "unflatten: too few values");
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(at), m.size(), m.data().begin());
    at += m.size();
  };
  for (auto& h : p.heads) {
    take(h.w_q);
    take(h.w_k);
    take(h.w_v);
    if (at + 2 > values.size()) throw Error(ErrorKind::ShapeMismatch, "unflatten: too few values");
    h.w1 = values[at++];
    h.w2 = values[at++];
  }
  take(p.w_o);
  if (at != values.size()) throw Error(ErrorKind::ShapeMismatch, "unflatten: too many values");
  return p;
}

}  // namespace xnorattn
