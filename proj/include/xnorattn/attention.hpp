#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "xnorattn/feature_maps.hpp"
#include "xnorattn/matrix.hpp"

namespace xnorattn {

class Rng;

enum class Variant { Exact, LinearKernel, Xnor, WXnor };

/// How the XNOR terms are normalized. Joint divides the weighted sum of
/// both numerators by the weighted sum of both denominators; PerTerm
/// normalizes each term on its own and then takes the weighted sum.
enum class Normalization { Joint, PerTerm };

struct AttentionSpec {
  Variant variant = Variant::Xnor;
  /// Only read for Variant::LinearKernel.
  FeatureMap kernel = FeatureMap::SoftmaxKernel;
  PosEncoding pos = NoPos{};
  /// Term weights; Xnor always uses 1, 1.
  double w1 = 1.0;
  double w2 = 1.0;
  /// Denominator guard. 0 selects the unregularized math (verification).
  double eps = 1e-6;
  Normalization normalization = Normalization::Joint;
  Execution exec = Execution::Serial;

  static AttentionSpec exact();
  static AttentionSpec linear(FeatureMap kernel, PosEncoding pos = NoPos{});
  static AttentionSpec xnor(PosEncoding pos = NoPos{});
  static AttentionSpec wxnor(double w1, double w2, PosEncoding pos = NoPos{});

  AttentionSpec with_eps(double e) const {
    AttentionSpec s = *this;
    s.eps = e;
    return s;
  }

  /// Term weights actually used by the engine.
  double effective_w1() const noexcept { return variant == Variant::Xnor ? 1.0 : w1; }
  double effective_w2() const noexcept { return variant == Variant::Xnor ? 1.0 : w2; }

  /// Throws InvalidArgument on an inconsistent combination.
  void validate() const;

  /// Short name: "exact", "elu", "relu-cosine", "xnor-rotary", "wxnor", ...
  std::string name() const;
};

/// Inverse of AttentionSpec::name(): "<variant>[-<pos>]" with variant in
/// {exact, softmax, elu, relu, xnor, wxnor} and pos in {cosine, rotary}.
AttentionSpec parse_variant(const std::string& name);

struct EngineDiagnostics {
  /// Rows whose |denominator| fell below eps and were clamped to ±eps.
  std::size_t clamped_denominators = 0;
};

// ---------------------------------------------------------------------------
// Engines. Inputs are Q, K (N×d) and V (N×dv); outputs are N×dv.

/// Sm(QKᵀ/√d)V through the full N×N score matrix.
template <typename T>
Matrix<T> exact_softmax_attention(const Matrix<T>& q, const Matrix<T>& k, const Matrix<T>& v,
                                  Execution exec = Execution::Serial);

/// φ(Q)(φ(K)ᵀV) / (φ(Q)φ(K)ᵀ1 + ε); never forms an N×N matrix.
template <typename T>
Matrix<T> linear_kernel_attention(const AttentionSpec& spec, const Matrix<T>& q,
                                  const Matrix<T>& k, const Matrix<T>& v,
                                  EngineDiagnostics* diag = nullptr);

/// XNOR / W-XNOR attention with similarity
/// w1·Sm(Qi)·Sm(Kj) + w2·Sm'(Qi)·Sm'(Kj), Sm' = 1 - Sm.
template <typename T>
Matrix<T> xnor_attention(const AttentionSpec& spec, const Matrix<T>& q, const Matrix<T>& k,
                         const Matrix<T>& v, EngineDiagnostics* diag = nullptr);

/// Dispatches on spec.variant.
template <typename T>
Matrix<T> attention_forward(const AttentionSpec& spec, const Matrix<T>& q, const Matrix<T>& k,
                            const Matrix<T>& v, EngineDiagnostics* diag = nullptr);

// Building blocks shared by the linear engines and their backward passes.

template <typename T>
struct FactoredTerm {
  double weight = 1.0;
  Matrix<T> query;  // φ̂(Q), positions applied
  Matrix<T> key;    // φ̂(K), positions applied
};

/// Feature blocks for a linear or XNOR spec (one term for LinearKernel, two
/// for Xnor/WXnor), with positions 0..N-1 encoded into every block.
template <typename T>
std::vector<FactoredTerm<T>> build_factored_terms(const AttentionSpec& spec, const Matrix<T>& q,
                                                  const Matrix<T>& k);

template <typename T>
Matrix<T> factored_attention(const std::vector<FactoredTerm<T>>& terms, const Matrix<T>& v,
                             double eps, Normalization normalization, Execution exec,
                             EngineDiagnostics* diag = nullptr);

inline constexpr std::size_t kExplicitWeightsMaxN = 4096;

/// Row-normalized N×N weights implied by `spec` (including ε), so that
/// weights·V reproduces the engine output. Diagnostic only.
DenseMatrix explicit_attention_weights(const AttentionSpec& spec, const DenseMatrix& q,
                                       const DenseMatrix& k);

// ---------------------------------------------------------------------------
// Multi-head composition

struct HeadParams {
  DenseMatrix w_q;  // model_dim × d
  DenseMatrix w_k;  // model_dim × d
  DenseMatrix w_v;  // model_dim × d
  /// Per-head term weights, used for Variant::WXnor.
  double w1 = 1.0;
  double w2 = 1.0;
};

struct MultiHeadParams {
  std::vector<HeadParams> heads;
  DenseMatrix w_o;  // heads·d × model_dim

  std::size_t model_dim() const noexcept { return w_o.cols(); }
  std::size_t head_dim() const noexcept { return heads.empty() ? 0 : heads.front().w_q.cols(); }

  void validate() const;

  /// Gaussian init with stddev 1/sqrt(fan_in), w1 = w2 = 1.
  static MultiHeadParams random(std::size_t model_dim, std::size_t num_heads,
                                std::size_t head_dim, Rng& rng);
};

using HeadEngine = std::function<DenseMatrix(const AttentionSpec&, const DenseMatrix& q,
                                             const DenseMatrix& k, const DenseMatrix& v)>;

/// The spec's per-head copy: w1/w2 taken from the head.
AttentionSpec head_spec(const AttentionSpec& spec, const HeadParams& head);

/// concat_h(engine(X W_Q^h, X W_K^h, X W_V^h)) · W_O. `engine` defaults to
/// attention_forward; tests swap in the quadratic oracle.
DenseMatrix multi_head_attention(const DenseMatrix& x, const MultiHeadParams& params,
                                 const AttentionSpec& spec, const HeadEngine& engine = {});

}  // namespace xnorattn
