#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "xnorattn/attention.hpp"
#include "xnorattn/matrix.hpp"

namespace xnorattn {

/// Gradients of a scalar loss w.r.t. one attention head's inputs. dw1/dw2
/// are reported for every linear engine (zero for single-term kernels).
struct GradBundle {
  DenseMatrix dq;
  DenseMatrix dk;
  DenseMatrix dv;
  double dw1 = 0.0;
  double dw2 = 0.0;
};

/// Backward of the joint-denominator XNOR / W-XNOR forward, ε held constant.
/// O(N·d·d') time and memory; no N×N intermediate. Clamped denominators
/// are constants, so they contribute no gradient through the denominator.
GradBundle xnor_attention_backward(const AttentionSpec& spec, const DenseMatrix& q,
                                   const DenseMatrix& k, const DenseMatrix& v,
                                   const DenseMatrix& upstream);

/// Backward of linear_kernel_attention.
GradBundle linear_attention_backward(const AttentionSpec& spec, const DenseMatrix& q,
                                     const DenseMatrix& k, const DenseMatrix& v,
                                     const DenseMatrix& upstream);

/// Backward of exact_softmax_attention (quadratic, like its forward).
GradBundle exact_attention_backward(const DenseMatrix& q, const DenseMatrix& k,
                                    const DenseMatrix& v, const DenseMatrix& upstream);

/// Dispatches on spec.variant.
GradBundle attention_backward(const AttentionSpec& spec, const DenseMatrix& q,
                              const DenseMatrix& k, const DenseMatrix& v,
                              const DenseMatrix& upstream);

struct HeadGrads {
  DenseMatrix dw_q;
  DenseMatrix dw_k;
  DenseMatrix dw_v;
  double dw1 = 0.0;
  double dw2 = 0.0;
};

struct MultiHeadGrads {
  std::vector<HeadGrads> heads;
  DenseMatrix dw_o;
};

/// Gradients of Σ upstream ⊙ multi_head_attention(x, params, spec) w.r.t.
/// every projection and per-head term weight.
MultiHeadGrads multi_head_backward(const DenseMatrix& x, const MultiHeadParams& params,
                                   const AttentionSpec& spec, const DenseMatrix& upstream);

// ---------------------------------------------------------------------------
// Finite differences

using ScalarFunction = std::function<double(std::span<const double>)>;

struct FdReport {
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Central differences (f(x+h e_k) - f(x-h e_k)) / 2h against `analytic`.
/// Relative error per entry is |a - n| / max(|a|, |n|, abs_floor); the floor
/// keeps entries that are zero up to roundoff from dominating.
FdReport finite_difference_check(const ScalarFunction& f, std::span<const double> point,
                                 std::span<const double> analytic, double h = 1e-5,
                                 double abs_floor = 1e-5);

// Flattening helpers for FD over matrices and parameter sets.
std::vector<double> flatten(const DenseMatrix& m);
std::vector<double> flatten(const MultiHeadParams& p);
std::vector<double> flatten(const MultiHeadGrads& g);
/// Inverse of flatten(MultiHeadParams), with `shape` supplying dimensions.
MultiHeadParams unflatten(std::span<const double> values, const MultiHeadParams& shape);

// ---------------------------------------------------------------------------
// Toy training

struct ToyTaskInstance {
  DenseMatrix x;
  DenseMatrix target;
  std::uint64_t seed = 0;
  std::size_t heads = 1;
  std::size_t head_dim = 1;
};

/// X ~ N(0, 3²) of shape N × (heads·head_dim); the target is the output of a
/// randomly initialized teacher W-XNOR layer with (w1, w2) = (2, 0.5).
ToyTaskInstance make_toy_task(std::uint64_t seed, std::size_t n, std::size_t heads,
                              std::size_t head_dim);

struct ToyStep {
  std::size_t step = 0;
  double loss = 0.0;
  double w1 = 1.0;
  double w2 = 1.0;
};

struct ToyFitResult {
  std::vector<ToyStep> trajectory;  // steps + 1 entries, loss before each update
  double w1 = 1.0;
  double w2 = 1.0;
  MultiHeadParams params;
};

/// Plain gradient descent on mean squared error through one multi-head
/// W-XNOR layer. Projections start from a seed-derived random init and
/// (w1, w2) from (1, 1), shared by all heads. Throws Divergence naming the
/// step if the loss becomes non-finite.
ToyFitResult toy_fit(const ToyTaskInstance& task, const AttentionSpec& spec, std::size_t steps,
                     double lr);

/// CSV "step,loss,w1,w2", one line per trajectory entry.
void write_loss_csv(std::ostream& out, const ToyFitResult& result);

}  // namespace xnorattn
