#pragma once

#include <cstddef>
#include <functional>

#include "xnorattn/attention.hpp"
#include "xnorattn/matrix.hpp"

namespace xnorattn {

/// S(i, j): similarity of query i to key j.
using Similarity = std::function<double(std::size_t i, std::size_t j)>;

/// O_i = Σ_j S(i,j) V_j / Σ_j S(i,j), evaluated pair by pair in O(N²).
///
/// By default every S(i, j) must be >= 0 and every row sum > 0. With
/// `allow_signed` (rotary encodings produce signed similarities) only a
/// nonzero row sum is required. Violations throw ZeroDenominator or
/// InvalidArgument naming the offending row.
DenseMatrix similarity_attention_oracle(const Similarity& s, std::size_t num_queries,
                                        const DenseMatrix& v, bool allow_signed = false);

/// The pairwise similarity a spec defines, computed directly for each pair:
/// features are recomputed per row, cosine weights use cos(π(i-j)/2M) and
/// rotary weights rotate the key by the relative offset j - i. Independent
/// of the factored engines. PerTerm specs are rejected (no single S).
Similarity spec_similarity(const AttentionSpec& spec, const DenseMatrix& q, const DenseMatrix& k);

/// Quadratic reference for any spec (ε ignored). PerTerm normalization is
/// evaluated as the weighted sum of per-term oracles.
DenseMatrix oracle_attention(const AttentionSpec& spec, const DenseMatrix& q, const DenseMatrix& k,
                             const DenseMatrix& v);

}  // namespace xnorattn
