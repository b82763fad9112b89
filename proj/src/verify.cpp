#include "xnorattn/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include "xnorattn/approx.hpp"
#include "xnorattn/gradients.hpp"
#include "xnorattn/oracle.hpp"
#include "xnorattn/rng.hpp"

namespace xnorattn {

namespace {

constexpr double kOracleRelTol = 1e-8;
constexpr double kConvexityTol = 1e-9;
constexpr double kExplicitWeightsTol = 1e-9;
constexpr double kFactorizationTol = 1e-10;
constexpr double kEquivarianceTol = 1e-10;
constexpr double kSensitivityMin = 1e-6;
constexpr double kDegeneracyTol = 1e-10;
constexpr double kGradientRelTol = 1e-4;
constexpr double kFdStep = 1e-5;
constexpr double kAblationTol = 1e-8;
constexpr double kAxisErrorTol = 1e-15;
constexpr double kCornerErrorTol = 1e-8;
constexpr double kSignedRowMargin = 1e-3;

constexpr std::size_t kOracleInstances = 100;
constexpr std::size_t kGradientInstances = 20;

constexpr std::size_t kHeadDims[] = {2, 4, 8};

// Tracks the worst residual of one property.
class Tracker {
 public:
  Tracker(std::string name, double tolerance, std::string comparison = "<=")
      : result_{std::move(name), true, 0.0, tolerance, std::move(comparison), 0} {
    if (result_.comparison == ">") result_.worst = std::numeric_limits<double>::infinity();
  }

  void observe(double residual) {
    ++result_.instances;
    if (result_.comparison == ">") {
      result_.worst = std::min(result_.worst, residual);
    } else {
      result_.worst = std::max(result_.worst, residual);
    }
  }

  void fail() { failed_ = true; }

  PropertyResult finish() {
    PropertyResult r = result_;
    if (r.instances == 0) r.worst = 0.0;
    const bool ok = std::isfinite(r.worst) &&
                    (r.comparison == "<=" ? r.worst <= r.tolerance
                     : r.comparison == "<" ? r.worst < r.tolerance
                                           : r.worst > r.tolerance);
    r.passed = !failed_ && r.instances > 0 && ok;
    return r;
  }

 private:
  PropertyResult result_;
  bool failed_ = false;
};

std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng.next_u64() % (hi - lo + 1));
}

std::size_t pick_dim(Rng& rng) { return kHeadDims[rng.next_u64() % std::size(kHeadDims)]; }

std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.next_u64() % i]);
  return p;
}

// Nontrivial: at least one element moves.
// Neither the identity nor the reversal: those two keep every |i - j|, which
// leaves distance-only position weights unchanged.
std::vector<std::size_t> nontrivial_permutation(std::size_t n, Rng& rng) {
  for (;;) {
    auto p = random_permutation(n, rng);
    bool identity = true;
    bool reversal = true;
    for (std::size_t i = 0; i < n; ++i) {
      identity = identity && p[i] == i;
      reversal = reversal && p[i] == n - 1 - i;
    }
    if (n < 3 || (!identity && !reversal)) return p;
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t r = 0; r < a.size(); ++r) acc += a[r] * b[r];
  return acc;
}

bool nonnegative_similarities(const AttentionSpec& spec) {
  return !std::holds_alternative<RotaryPos>(spec.pos);
}

}  // namespace

bool SuiteResult::passed() const {
  return std::all_of(properties.begin(), properties.end(), [](const auto& p) { return p.passed; });
}

bool VerifyReport::passed() const {
  return std::all_of(suites.begin(), suites.end(), [](const auto& s) { return s.passed(); });
}

const PropertyResult* VerifyReport::find(const std::string& suite, const std::string& property) const {
  for (const auto& s : suites) {
    if (s.name != suite) continue;
    for (const auto& p : s.properties) {
      if (p.name == property) return &p;
    }
  }
  return nullptr;
}

nlohmann::json VerifyReport::to_json() const {
  nlohmann::json suites_json = nlohmann::json::array();
  for (const auto& s : suites) {
    nlohmann::json props = nlohmann::json::array();
    for (const auto& p : s.properties) {
      props.push_back({{"name", p.name},
                       {"passed", p.passed},
                       {"worst", p.worst},
                       {"comparison", p.comparison},
                       {"tolerance", p.tolerance},
                       {"instances", p.instances}});
    }
    suites_json.push_back({{"suite", s.name}, {"passed", s.passed()}, {"properties", props}});
  }
  return {{"seed", seed}, {"passed", passed()}, {"suites", suites_json}};
}

const std::vector<std::string>& verify_suite_names() {
  static const std::vector<std::string> names = {"oracle",     "factorization", "permutation",
                                                 "degeneracy", "gradient",      "approximation"};
  return names;
}

std::vector<AttentionSpec> linear_configurations() {
  const PosEncoding encodings[] = {NoPos{}, CosinePos{}, RotaryPos{}};
  std::vector<AttentionSpec> specs;
  for (const auto& pos : encodings) {
    for (FeatureMap map : {FeatureMap::SoftmaxKernel, FeatureMap::EluPlusOne, FeatureMap::ReLU}) {
      specs.push_back(AttentionSpec::linear(map, pos).with_eps(0.0));
    }
    specs.push_back(AttentionSpec::xnor(pos).with_eps(0.0));
    specs.push_back(AttentionSpec::wxnor(0.7, 0.3, pos).with_eps(0.0));
  }
  return specs;
}

AttentionInstance random_instance(std::size_t n, std::size_t d, Rng& rng) {
  AttentionInstance inst;
  inst.q = random_normal(n, d, rng);
  inst.k = random_normal(n, d, rng);
  inst.v = random_normal(n, d, rng);
  return inst;
}

AttentionInstance random_valid_instance(const AttentionSpec& spec, std::size_t n, std::size_t d,
                                        Rng& rng) {
  AttentionInstance inst = random_instance(n, d, rng);
  const bool relu = spec.variant == Variant::LinearKernel && spec.kernel == FeatureMap::ReLU;
  const bool rotary = std::holds_alternative<RotaryPos>(spec.pos);
  if (!relu && !rotary) return inst;
  for (int attempt = 0; attempt < 256; ++attempt) {
    const Similarity s = spec_similarity(spec, inst.q, inst.k);
    std::vector<std::size_t> bad;
    for (std::size_t i = 0; i < n; ++i) {
      double row = 0.0;
      double mass = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        row += s(i, j);
        mass += std::abs(s(i, j));
      }
      const bool ok = rotary ? std::abs(row) > kSignedRowMargin * mass : row > 0.0;
      if (!ok) bad.push_back(i);
    }
    if (bad.empty()) return inst;
    // Redraw only the offending query rows; every few rounds redraw keys too.
    for (const std::size_t i : bad) {
      for (std::size_t c = 0; c < d; ++c) inst.q(i, c) = rng.normal();
    }
    if (attempt % 8 == 7) inst.k = random_normal(n, d, rng);
  }
  throw Error(ErrorKind::InvalidArgument, "could not draw a valid instance for " + spec.name());
}

// ---------------------------------------------------------------------------

SuiteResult verify_oracle(std::uint64_t seed) {
  SuiteResult suite{"oracle", {}};
  Rng rng(seed ^ 0x6f7261636c65ULL);

  for (const auto& spec : linear_configurations()) {
    Tracker equiv("equivalence/" + spec.name(), kOracleRelTol);
    Tracker convex("convexity/" + spec.name(), kConvexityTol);
    for (std::size_t t = 0; t < kOracleInstances; ++t) {
      const std::size_t n = pick(rng, 1, 32);
      const std::size_t d = pick_dim(rng);
      const auto inst = random_valid_instance(spec, n, d, rng);
      try {
        const DenseMatrix fast = attention_forward(spec, inst.q, inst.k, inst.v);
        const DenseMatrix slow = oracle_attention(spec, inst.q, inst.k, inst.v);
        equiv.observe(max_rel_diff(fast, slow));
        if (nonnegative_similarities(spec)) {
          double excess = 0.0;
          for (std::size_t c = 0; c < inst.v.cols(); ++c) {
            double lo = inst.v(0, c);
            double hi = inst.v(0, c);
            for (std::size_t j = 0; j < n; ++j) {
              lo = std::min(lo, inst.v(j, c));
              hi = std::max(hi, inst.v(j, c));
            }
            for (std::size_t i = 0; i < n; ++i) {
              excess = std::max({excess, fast(i, c) - hi, lo - fast(i, c)});
            }
          }
          convex.observe(excess);
        }
      } catch (const Error&) {
        equiv.fail();
      }
    }
    suite.properties.push_back(equiv.finish());
    if (nonnegative_similarities(spec)) suite.properties.push_back(convex.finish());
  }

  // Per-term normalized XNOR against the weighted sum of per-term oracles.
  {
    Tracker per_term("equivalence/xnor-per-term", kOracleRelTol);
    for (std::size_t t = 0; t < kOracleInstances; ++t) {
      AttentionSpec spec = AttentionSpec::wxnor(0.6, 0.4, t % 2 ? PosEncoding{CosinePos{}} : PosEncoding{NoPos{}});
      spec.eps = 0.0;
      spec.normalization = Normalization::PerTerm;
      const auto inst = random_instance(pick(rng, 1, 32), pick_dim(rng), rng);
      per_term.observe(max_rel_diff(xnor_attention(spec, inst.q, inst.k, inst.v),
                                    oracle_attention(spec, inst.q, inst.k, inst.v)));
    }
    suite.properties.push_back(per_term.finish());
  }

  // Explicit weights reproduce the engine.
  {
    Tracker weights("explicit-weights", kExplicitWeightsTol);
    for (std::size_t t = 0; t < kOracleInstances; ++t) {
      const AttentionSpec spec = AttentionSpec::xnor(t % 2 ? PosEncoding{CosinePos{}} : PosEncoding{NoPos{}});
      const auto inst = random_instance(pick(rng, 1, 16), pick_dim(rng), rng);
      const DenseMatrix w = explicit_attention_weights(spec, inst.q, inst.k);
      weights.observe(max_rel_diff(matmul(w, inst.v), xnor_attention(spec, inst.q, inst.k, inst.v)));
    }
    suite.properties.push_back(weights.finish());
  }

  // Multi-head layer with the oracle swapped in for every head.
  {
    Tracker mh("multi-head-oracle-swap", kOracleRelTol);
    const HeadEngine oracle_engine = [](const AttentionSpec& s, const DenseMatrix& q,
                                        const DenseMatrix& k, const DenseMatrix& v) {
      return oracle_attention(s, q, k, v);
    };
    for (std::size_t t = 0; t < 10; ++t) {
      const AttentionSpec spec = AttentionSpec::wxnor(0.8, 0.4, t % 2 ? PosEncoding{CosinePos{}} : PosEncoding{RotaryPos{}}).with_eps(0.0);
      MultiHeadParams params = MultiHeadParams::random(32, 4, 8, rng);
      for (auto& h : params.heads) {
        h.w1 = rng.uniform(0.2, 1.5);
        h.w2 = rng.uniform(0.2, 1.5);
      }
      const DenseMatrix x = random_normal(pick(rng, 1, 32), 32, rng);
      mh.observe(max_rel_diff(multi_head_attention(x, params, spec),
                              multi_head_attention(x, params, spec, oracle_engine)));
    }
    suite.properties.push_back(mh.finish());
  }
  return suite;
}

SuiteResult verify_factorization(std::uint64_t seed) {
  SuiteResult suite{"factorization", {}};
  Rng rng(seed ^ 0x666163746f72ULL);

  Tracker cosine("cosine-inner-product", kFactorizationTol);
  Tracker cosine_shift("cosine-shift-invariance", kFactorizationTol);
  Tracker rotary_shift("rotary-shift-invariance", kFactorizationTol);
  Tracker nonneg("cosine-nonnegative", 0.0);
  Tracker complement("complement-sums-to-one", 0.0);

  for (std::size_t t = 0; t < kOracleInstances; ++t) {
    const std::size_t n = pick(rng, 1, 32);
    const std::size_t d = pick_dim(rng);
    const DenseMatrix q = random_uniform(n, d, rng, 0.0, 1.0);
    const DenseMatrix k = random_uniform(n, d, rng, 0.0, 1.0);
    const auto pos = sequence_positions(n);

    const DenseMatrix eq = cosine_expand(q, std::span<const std::size_t>(pos), n);
    const DenseMatrix ek = cosine_expand(k, std::span<const std::size_t>(pos), n);
    double worst = 0.0;
    double most_negative = 0.0;
    for (double v : eq.data()) most_negative = std::max(most_negative, -v);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double expected = dot(q.row(i), k.row(j)) * direct_pos_weight(CosinePos{n}, i, j);
        worst = std::max(worst, std::abs(dot(eq.row(i), ek.row(j)) - expected));
      }
    }
    cosine.observe(worst);
    nonneg.observe(most_negative);

    // Shifting every position by s leaves the pairwise products unchanged.
    const std::size_t shift = pick(rng, 1, 16);
    std::vector<std::size_t> shifted(n);
    for (std::size_t i = 0; i < n; ++i) shifted[i] = pos[i] + shift;
    const std::size_t m = n + shift;
    const DenseMatrix aq = cosine_expand(q, std::span<const std::size_t>(pos), m);
    const DenseMatrix ak = cosine_expand(k, std::span<const std::size_t>(pos), m);
    const DenseMatrix bq = cosine_expand(q, std::span<const std::size_t>(shifted), m);
    const DenseMatrix bk = cosine_expand(k, std::span<const std::size_t>(shifted), m);
    worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        worst = std::max(worst, std::abs(dot(aq.row(i), ak.row(j)) - dot(bq.row(i), bk.row(j))));
      }
    }
    cosine_shift.observe(worst);

    const DenseMatrix sq = random_normal(n, d, rng);
    const DenseMatrix sk = random_normal(n, d, rng);
    const DenseMatrix rq = rotary_rotate(sq, std::span<const std::size_t>(pos), 10000.0);
    const DenseMatrix rk = rotary_rotate(sk, std::span<const std::size_t>(pos), 10000.0);
    const DenseMatrix sq2 = rotary_rotate(sq, std::span<const std::size_t>(shifted), 10000.0);
    const DenseMatrix sk2 = rotary_rotate(sk, std::span<const std::size_t>(shifted), 10000.0);
    worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        worst = std::max(worst, std::abs(dot(rq.row(i), rk.row(j)) - dot(sq2.row(i), sk2.row(j))));
      }
    }
    rotary_shift.observe(worst);

    const auto pair = apply_feature_map(FeatureMap::SoftmaxComplementPair, sq);
    double off = 0.0;
    for (std::size_t e = 0; e < sq.size(); ++e) {
      off = std::max(off, std::abs(pair.primary.data()[e] + pair.complement->data()[e] - 1.0));
    }
    complement.observe(off);
  }
  for (Tracker* tr : {&cosine, &cosine_shift, &rotary_shift, &nonneg, &complement}) {
    suite.properties.push_back(tr->finish());
  }
  return suite;
}

SuiteResult verify_permutation(std::uint64_t seed) {
  SuiteResult suite{"permutation", {}};
  Rng rng(seed ^ 0x7065726d7574ULL);

  const AttentionSpec specs[] = {
      AttentionSpec::exact(),
      AttentionSpec::linear(FeatureMap::SoftmaxKernel),
      AttentionSpec::linear(FeatureMap::EluPlusOne),
      AttentionSpec::linear(FeatureMap::ReLU),
      AttentionSpec::xnor(),
      AttentionSpec::wxnor(0.7, 0.3),
      AttentionSpec::linear(FeatureMap::SoftmaxKernel, CosinePos{}),
      AttentionSpec::linear(FeatureMap::EluPlusOne, RotaryPos{}),
      AttentionSpec::linear(FeatureMap::ReLU, CosinePos{}),
      AttentionSpec::xnor(CosinePos{}),
      AttentionSpec::xnor(RotaryPos{}),
      AttentionSpec::wxnor(0.7, 0.3, CosinePos{}),
      AttentionSpec::wxnor(0.7, 0.3, RotaryPos{}),
  };
  for (const auto& spec : specs) {
    const bool positional = is_positional(spec.pos);
    Tracker tr(positional ? "sensitivity/" + spec.name() : "equivariance/" + spec.name(),
               positional ? kSensitivityMin : kEquivarianceTol, positional ? ">" : "<=");
    for (std::size_t t = 0; t < 20; ++t) {
      const std::size_t n = pick(rng, 4, 32);
      const MultiHeadParams params = MultiHeadParams::random(8, 2, 4, rng);
      const DenseMatrix x = random_normal(n, 8, rng);
      const auto perm = nontrivial_permutation(n, rng);
      const DenseMatrix y = multi_head_attention(x, params, spec);
      const DenseMatrix y_perm = multi_head_attention(permute_rows(x, std::span<const std::size_t>(perm)), params, spec);
      tr.observe(max_abs_diff(y_perm, permute_rows(y, std::span<const std::size_t>(perm))));
    }
    suite.properties.push_back(tr.finish());
  }
  return suite;
}

SuiteResult verify_degeneracy(std::uint64_t seed) {
  SuiteResult suite{"degeneracy", {}};
  Rng rng(seed ^ 0x646567656eULL);

  const PosEncoding encodings[] = {NoPos{}, CosinePos{}, RotaryPos{}};
  for (const auto& pos : encodings) {
    const AttentionSpec w = AttentionSpec::wxnor(1.0, 0.0, pos);
    const AttentionSpec sm = AttentionSpec::linear(FeatureMap::SoftmaxKernel, pos);
    Tracker tr("wxnor-1-0-equals-softmax-kernel/" + to_string(pos), kDegeneracyTol);
    for (std::size_t t = 0; t < kOracleInstances; ++t) {
      const auto inst = random_instance(pick(rng, 1, 32), pick_dim(rng), rng);
      tr.observe(max_rel_diff(xnor_attention(w, inst.q, inst.k, inst.v),
                              linear_kernel_attention(sm, inst.q, inst.k, inst.v)));
    }
    suite.properties.push_back(tr.finish());
  }

  // A single key absorbs all the weight.
  Tracker single("single-key-returns-value", kDegeneracyTol);
  for (const auto& spec : linear_configurations()) {
    const auto inst = random_valid_instance(spec, 1, pick_dim(rng), rng);
    single.observe(max_abs_diff(attention_forward(spec, inst.q, inst.k, inst.v), inst.v));
  }
  suite.properties.push_back(single.finish());
  return suite;
}

SuiteResult verify_gradient(std::uint64_t seed) {
  SuiteResult suite{"gradient", {}};
  Rng rng(seed ^ 0x6772616469ULL);

  const AttentionSpec specs[] = {
      AttentionSpec::xnor(),
      AttentionSpec::wxnor(0.7, 0.3),
      AttentionSpec::wxnor(0.7, 0.3, CosinePos{}),
      AttentionSpec::wxnor(0.7, 0.3, RotaryPos{}),
      AttentionSpec::linear(FeatureMap::SoftmaxKernel),
      AttentionSpec::linear(FeatureMap::EluPlusOne),
      AttentionSpec::linear(FeatureMap::ReLU, CosinePos{}),
      AttentionSpec::exact(),
  };
  for (const auto& base : specs) {
    Tracker tr("fd/" + base.name(), kGradientRelTol);
    for (std::size_t t = 0; t < kGradientInstances; ++t) {
      const std::size_t n = pick(rng, 1, 8);
      const std::size_t d = pick(rng, 1, 2) * 2;
      const auto inst = random_valid_instance(base, n, d, rng);
      const DenseMatrix proj = random_normal(n, d, rng);
      const std::size_t qn = inst.q.size();

      // Flattened point [Q, K, V, w1, w2].
      std::vector<double> point;
      for (const DenseMatrix* m : {&inst.q, &inst.k, &inst.v}) point.insert(point.end(), m->data().begin(), m->data().end());
      point.push_back(base.w1);
      point.push_back(base.w2);

      const auto loss = [&](std::span<const double> x) {
        AttentionSpec s = base;
        s.w1 = x[3 * qn];
        s.w2 = x[3 * qn + 1];
        const DenseMatrix q = DenseMatrix::from_data(n, d, x.subspan(0, qn));
        const DenseMatrix k = DenseMatrix::from_data(n, d, x.subspan(qn, qn));
        const DenseMatrix v = DenseMatrix::from_data(n, d, x.subspan(2 * qn, qn));
        return dot(attention_forward(s, q, k, v).data(), proj.data());
      };
      const GradBundle g = attention_backward(base, inst.q, inst.k, inst.v, proj);
      std::vector<double> analytic;
      for (const DenseMatrix* m : {&g.dq, &g.dk, &g.dv}) analytic.insert(analytic.end(), m->data().begin(), m->data().end());
      // Xnor pins the weights, so they carry no gradient through the forward.
      const bool learnable = base.variant == Variant::WXnor;
      analytic.push_back(learnable ? g.dw1 : 0.0);
      analytic.push_back(learnable ? g.dw2 : 0.0);
      tr.observe(finite_difference_check(loss, point, analytic, kFdStep).max_rel_error);
    }
    suite.properties.push_back(tr.finish());
  }

  // Projection gradients through the multi-head layer.
  const AttentionSpec mh_specs[] = {AttentionSpec::wxnor(1.0, 1.0),
                                    AttentionSpec::wxnor(1.0, 1.0, CosinePos{}),
                                    AttentionSpec::wxnor(1.0, 1.0, RotaryPos{})};
  for (const auto& spec : mh_specs) {
    Tracker tr("fd-projections/" + spec.name(), kGradientRelTol);
    for (std::size_t t = 0; t < kGradientInstances; ++t) {
      const std::size_t n = pick(rng, 1, 8);
      MultiHeadParams params = MultiHeadParams::random(8, 2, 4, rng);
      for (auto& h : params.heads) {
        h.w1 = rng.uniform(0.5, 1.5);
        h.w2 = rng.uniform(0.5, 1.5);
      }
      const DenseMatrix x = random_normal(n, 8, rng);
      const DenseMatrix proj = random_normal(n, 8, rng);
      const auto loss = [&](std::span<const double> flat) {
        return dot(multi_head_attention(x, unflatten(flat, params), spec).data(), proj.data());
      };
      const auto analytic = flatten(multi_head_backward(x, params, spec, proj));
      tr.observe(finite_difference_check(loss, flatten(params), analytic, kFdStep).max_rel_error);
    }
    suite.properties.push_back(tr.finish());
  }

  // With w2 = 0 the XNOR gradients reduce to the softmax-kernel engine's.
  {
    Tracker tr("w2-ablation-matches-softmax-kernel", kAblationTol);
    for (std::size_t t = 0; t < kGradientInstances; ++t) {
      const PosEncoding pos = t % 3 == 0 ? PosEncoding{NoPos{}} : t % 3 == 1 ? PosEncoding{CosinePos{}} : PosEncoding{RotaryPos{}};
      const std::size_t n = pick(rng, 1, 8);
      const std::size_t d = pick(rng, 1, 2) * 2;
      const auto inst = random_instance(n, d, rng);
      const DenseMatrix up = random_normal(n, d, rng);
      const GradBundle a = xnor_attention_backward(AttentionSpec::wxnor(1.0, 0.0, pos), inst.q, inst.k, inst.v, up);
      const GradBundle b = linear_attention_backward(AttentionSpec::linear(FeatureMap::SoftmaxKernel, pos), inst.q, inst.k, inst.v, up);
      tr.observe(std::max({max_rel_diff(a.dq, b.dq), max_rel_diff(a.dk, b.dk), max_rel_diff(a.dv, b.dv)}));
    }
    suite.properties.push_back(tr.finish());
  }
  return suite;
}

SuiteResult verify_approximation(std::uint64_t seed) {
  (void)seed;  // deterministic grid; no randomness
  SuiteResult suite{"approximation", {}};
  const AxisRange range{-100.0, 100.0, 0.5};
  const ErrorSurface surf = error_surface(range, range);
  const DenseMatrix& e = surf.grid.values;
  const std::size_t count = range.count();

  Tracker axes("zero-error-on-axes", kAxisErrorTol);
  for (std::size_t r = 0; r < count; ++r) {
    for (std::size_t c = 0; c < count; ++c) {
      if (range.at(r) == 0.0 || range.at(c) == 0.0) axes.observe(e(r, c));
    }
  }
  Tracker near_axis("argmax-min-abs-coordinate", 2.0, "<");
  near_axis.observe(std::min(std::abs(surf.argmax_x), std::abs(surf.argmax_y)));
  Tracker far_out("argmax-max-abs-coordinate", 10.0, ">");
  far_out.observe(std::max(std::abs(surf.argmax_x), std::abs(surf.argmax_y)));

  Tracker corners("corner-error", kCornerErrorTol);
  for (std::size_t r : {std::size_t{0}, count - 1}) {
    for (std::size_t c : {std::size_t{0}, count - 1}) corners.observe(e(r, c));
  }

  Tracker symmetric("approx-symmetry", 0.0);
  Tracker bounded("approx-in-unit-interval", 0.0);
  for (std::size_t r = 0; r < count; r += 3) {
    for (std::size_t c = 0; c < count; c += 3) {
      const double x = range.at(r);
      const double y = range.at(c);
      const double a = xnor_approx(x, y);
      symmetric.observe(std::max(std::abs(a - xnor_approx(y, x)), std::abs(a - xnor_approx(-x, -y))));
      bounded.observe(std::max({0.0, -a, a - 1.0}));
    }
  }
  for (Tracker* tr : {&axes, &near_axis, &far_out, &corners, &symmetric, &bounded}) {
    suite.properties.push_back(tr->finish());
  }
  return suite;
}

VerifyReport run_verification(std::uint64_t seed, const std::vector<std::string>& suites) {
  using Runner = std::function<SuiteResult(std::uint64_t)>;
  const std::vector<std::pair<std::string, Runner>> runners = {
      {"oracle", verify_oracle},         {"factorization", verify_factorization},
      {"permutation", verify_permutation}, {"degeneracy", verify_degeneracy},
      {"gradient", verify_gradient},     {"approximation", verify_approximation},
  };
  for (const auto& name : suites) {
    if (std::none_of(runners.begin(), runners.end(), [&](const auto& r) { return r.first == name; })) {
      throw Error(ErrorKind::InvalidArgument, "unknown verify suite '" + name + "'");
    }
  }
  VerifyReport report;
  report.seed = seed;
  for (const auto& [name, run] : runners) {
    if (suites.empty() || std::find(suites.begin(), suites.end(), name) != suites.end()) {
      report.suites.push_back(run(seed));
    }
  }
  return report;
}

}  // namespace xnorattn
