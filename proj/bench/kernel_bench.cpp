// Serial reference vs OpenMP kernels: timing and a bitwise agreement check.
//
//   kernel_bench [--n 4096] [--d 64] [--reps 5]

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "xnorattn/attention.hpp"
#include "xnorattn/bench.hpp"
#include "xnorattn/rng.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace xnorattn;

namespace {

double seconds(const std::function<DenseMatrix()>& f, std::size_t reps, DenseMatrix& out) {
  std::vector<double> t;
  out = f();  // warmup
  for (std::size_t r = 0; r < reps; ++r) {
    const auto start = std::chrono::steady_clock::now();
    out = f();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
  return median(t);
}

void row(const std::string& name, const std::function<DenseMatrix(Execution)>& f, std::size_t reps) {
  DenseMatrix serial, parallel;
  const double ts = seconds([&] { return f(Execution::Serial); }, reps, serial);
  const double tp = seconds([&] { return f(Execution::Parallel); }, reps, parallel);
  std::printf("%-14s %12.6f %12.6f %8.2f %s\n", name.c_str(), ts, tp, ts / tp,
              max_abs_diff(serial, parallel) == 0.0 ? "yes" : "NO");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP kernels"};
  std::size_t n = 4096;
  std::size_t d = 64;
  std::size_t reps = 5;
  app.add_option("--n", n, "sequence length")->check(CLI::PositiveNumber);
  app.add_option("--d", d, "head dimension")->check(CLI::PositiveNumber);
  app.add_option("--reps", reps, "timed reps")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  int threads = 1;
#ifdef _OPENMP
  threads = omp_get_max_threads();
#endif
  std::printf("N=%zu d=%zu reps=%zu threads=%d\n", n, d, reps, threads);
  std::printf("%-14s %12s %12s %8s %s\n", "kernel", "serial_s", "openmp_s", "speedup", "identical");

  Rng rng(1);
  const DenseMatrix q = random_normal(n, d, rng);
  const DenseMatrix k = random_normal(n, d, rng);
  const DenseMatrix v = random_normal(n, d, rng);
  const DenseMatrix w = random_normal(d, d, rng);

  row("matmul", [&](Execution e) { return matmul(q, w, e); }, reps);
  row("matmul_tn", [&](Execution e) { return matmul_tn(k, v, e); }, reps);

  const std::vector<AttentionSpec> specs{
      AttentionSpec::exact(),
      AttentionSpec::linear(FeatureMap::EluPlusOne),
      AttentionSpec::linear(FeatureMap::ReLU, CosinePos{}),
      AttentionSpec::xnor(),
      AttentionSpec::wxnor(1.0, 1.0, RotaryPos{}),
  };
  for (AttentionSpec spec : specs) {
    row(spec.name(), [&](Execution e) {
      spec.exec = e;
      return attention_forward(spec, q, k, v);
    }, reps);
  }
}
