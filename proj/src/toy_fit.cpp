#include <cmath>
#include <ostream>

#include "xnorattn/gradients.hpp"
#include "xnorattn/io.hpp"
#include "xnorattn/rng.hpp"

namespace xnorattn {

namespace {

// Independent streams for the data, the teacher and the student init.
constexpr std::uint64_t kTeacherStream = 0x7465616368657200ULL;
constexpr std::uint64_t kStudentStream = 0x73747564656e7400ULL;

// Synthetic inputs are N(0, 3²); sharper feature maps give w1/w2 a usable signal.
constexpr double kInputScale = 3.0;

double mse(const DenseMatrix& y, const DenseMatrix& target) {
  double acc = 0.0;
  auto a = y.data();
  auto b = target.data();
  for (std::size_t k = 0; k < a.size(); ++k) acc += (a[k] - b[k]) * (a[k] - b[k]);
  return acc / static_cast<double>(a.size());
}

void descend(DenseMatrix& w, const DenseMatrix& g, double lr) {
  auto ws = w.data();
  auto gs = g.data();
  for (std::size_t k = 0; k < ws.size(); ++k) ws[k] -= lr * gs[k];
}

}  // namespace

ToyTaskInstance make_toy_task(std::uint64_t seed, std::size_t n, std::size_t heads,
                              std::size_t head_dim) {
  if (n == 0 || heads == 0 || head_dim == 0) {
    throw Error(ErrorKind::InvalidArgument, "toy task needs N, heads, head_dim >= 1");
  }
  const std::size_t model_dim = heads * head_dim;
  Rng data_rng(seed);
  Rng teacher_rng(seed ^ kTeacherStream);
  ToyTaskInstance task;
  task.seed = seed;
  task.heads = heads;
  task.head_dim = head_dim;
  task.x = random_normal(n, model_dim, data_rng, kInputScale);
  MultiHeadParams teacher = MultiHeadParams::random(model_dim, heads, head_dim, teacher_rng);
  for (auto& h : teacher.heads) {
    h.w1 = 2.0;
    h.w2 = 0.5;
  }
  task.target = multi_head_attention(task.x, teacher, AttentionSpec::wxnor(2.0, 0.5));
  return task;
}

ToyFitResult toy_fit(const ToyTaskInstance& task, const AttentionSpec& spec, std::size_t steps,
                     double lr) {
  if (spec.variant != Variant::WXnor) {
    throw Error(ErrorKind::InvalidArgument, "toy_fit trains a W-XNOR layer; got " + spec.name());
  }
  if (task.target.rows() != task.x.rows() || task.target.cols() != task.x.cols()) {
    throw_shape_mismatch("toy_fit", "target " + task.target.shape_string(), "X " + task.x.shape_string());
  }
  if (!std::isfinite(lr)) throw Error(ErrorKind::InvalidArgument, "learning rate must be finite");

  Rng init_rng(task.seed ^ kStudentStream);
  ToyFitResult result;
  result.params = MultiHeadParams::random(task.x.cols(), task.heads, task.head_dim, init_rng);
  double w1 = 1.0;
  double w2 = 1.0;

  AttentionSpec layer = spec;
  layer.exec = Execution::Serial;
  const double count = static_cast<double>(task.target.size());

  for (std::size_t step = 0;; ++step) {
    for (auto& h : result.params.heads) {
      h.w1 = w1;
      h.w2 = w2;
    }
    DenseMatrix y;
    try {
      y = multi_head_attention(task.x, result.params, layer);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::NonFinite) throw;
      throw Error(ErrorKind::Divergence, "forward pass non-finite at step " + std::to_string(step));
    }
    const double loss = mse(y, task.target);
    if (!std::isfinite(loss)) {
      throw Error(ErrorKind::Divergence, "loss is non-finite at step " + std::to_string(step));
    }
    result.trajectory.push_back({step, loss, w1, w2});
    if (step == steps) break;

    DenseMatrix upstream = subtract(y, task.target);
    for (auto& g : upstream.data()) g *= 2.0 / count;
    const MultiHeadGrads grads = multi_head_backward(task.x, result.params, layer, upstream);

    double dw1 = 0.0;
    double dw2 = 0.0;
    for (std::size_t h = 0; h < grads.heads.size(); ++h) {
      auto& p = result.params.heads[h];
      descend(p.w_q, grads.heads[h].dw_q, lr);
      descend(p.w_k, grads.heads[h].dw_k, lr);
      descend(p.w_v, grads.heads[h].dw_v, lr);
      dw1 += grads.heads[h].dw1;
      dw2 += grads.heads[h].dw2;
    }
    descend(result.params.w_o, grads.dw_o, lr);
    w1 -= lr * dw1;
    w2 -= lr * dw2;
  }
  result.w1 = w1;
  result.w2 = w2;
  return result;
}

void write_loss_csv(std::ostream& out, const ToyFitResult& result) {
  out << "step,loss,w1,w2\n";
  for (const auto& s : result.trajectory) {
    out << s.step << ',' << io::format_double(s.loss) << ',' << io::format_double(s.w1) << ','
        << io::format_double(s.w2) << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "failed writing loss log");
}

}  // namespace xnorattn
