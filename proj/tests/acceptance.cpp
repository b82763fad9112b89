// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "xnorattn/approx.hpp"
#include "xnorattn/bench.hpp"
#include "xnorattn/gradients.hpp"
#include "xnorattn/io.hpp"
#include "xnorattn/verify.hpp"

using namespace xnorattn;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 42;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

bool starts_with(const std::string& s, const std::string& prefix) { return s.rfind(prefix, 0) == 0; }

// Every property of `suite` whose name starts with `prefix` must have run on
// at least `min_instances` instances and have worst <= tol.
void require_below(Outcome& o, const SuiteResult& suite, const std::string& prefix, double tol,
                   std::size_t min_instances = 1) {
  std::size_t matched = 0;
  for (const auto& p : suite.properties) {
    if (!starts_with(p.name, prefix)) continue;
    ++matched;
    o.require(p.worst <= tol, p.name + " worst " + fmt(p.worst) + " > " + fmt(tol));
    o.require(p.instances >= min_instances, p.name + " ran " + std::to_string(p.instances) + " instances");
  }
  o.require(matched > 0, "no property " + prefix);
}

void require_above(Outcome& o, const SuiteResult& suite, const std::string& prefix, double floor) {
  std::size_t matched = 0;
  for (const auto& p : suite.properties) {
    if (!starts_with(p.name, prefix)) continue;
    ++matched;
    o.require(p.worst > floor, p.name + " min diff " + fmt(p.worst) + " <= " + fmt(floor));
  }
  o.require(matched > 0, "no property " + prefix);
}

Outcome oracle_equivalence() {
  Outcome o;
  const SuiteResult s = verify_oracle(kSeed);
  require_below(o, s, "equivalence/", 1e-8, 100);
  return o;
}

Outcome approximation() {
  Outcome o;
  const AxisRange r{-100.0, 100.0, 0.5};
  const ErrorSurface s = error_surface(r, r);
  const std::size_t n = r.count();
  double axes = 0.0;
  std::size_t zx = n, zy = n;
  for (std::size_t k = 0; k < n; ++k) {
    if (r.at(k) == 0.0) zx = zy = k;
  }
  o.require(zx < n, "grid has no zero coordinate");
  if (zx < n) {
    for (std::size_t k = 0; k < n; ++k) axes = std::max({axes, s.grid.values(zx, k), s.grid.values(k, zy)});
  }
  o.require(axes <= 1e-15, "axis error " + fmt(axes));
  const double lo = std::min(std::abs(s.argmax_x), std::abs(s.argmax_y));
  const double hi = std::max(std::abs(s.argmax_x), std::abs(s.argmax_y));
  o.require(lo < 2.0 && hi > 10.0, "argmax at (" + fmt(s.argmax_x) + ", " + fmt(s.argmax_y) + ")");
  double corners = 0.0;
  for (std::size_t a : {std::size_t{0}, n - 1}) {
    for (std::size_t b : {std::size_t{0}, n - 1}) corners = std::max(corners, s.grid.values(a, b));
  }
  o.require(corners < 1e-8, "corner error " + fmt(corners));
  o.detail = o.pass ? "max " + fmt(s.max_error) + " at (" + fmt(s.argmax_x) + ", " + fmt(s.argmax_y) +
                          "), axes " + fmt(axes) + ", corners " + fmt(corners)
                    : o.detail;
  return o;
}

Outcome factorization() {
  Outcome o;
  const SuiteResult s = verify_factorization(kSeed);
  require_below(o, s, "cosine-inner-product", 1e-10);
  require_below(o, s, "rotary-shift-invariance", 1e-10);
  return o;
}

Outcome gradients() {
  Outcome o;
  const SuiteResult s = verify_gradient(kSeed);
  require_below(o, s, "fd/", 1e-4, 20);
  require_below(o, s, "fd-projections/", 1e-4, 20);
  return o;
}

Outcome learnability() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  const ToyTaskInstance task = make_toy_task(42, 32, 2, 8);
  const ToyFitResult fit = toy_fit(task, AttentionSpec::wxnor(1.0, 1.0), 200, 0.05);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double first = fit.trajectory.front().loss;
  const double last = fit.trajectory.back().loss;
  const double moved = std::max(std::abs(fit.w1 - 1.0), std::abs(fit.w2 - 1.0));
  o.require(last < 0.5 * first, "loss " + fmt(first) + " -> " + fmt(last));
  o.require(moved > 1e-3, "w moved " + fmt(moved));
  o.require(secs < 30.0, "took " + fmt(secs) + " s");
  if (o.pass) {
    o.detail = "loss " + fmt(first) + " -> " + fmt(last) + ", w = (" + fmt(fit.w1) + ", " + fmt(fit.w2) +
               "), " + fmt(secs) + " s";
  }
  return o;
}

// Largest |y - fit| / y of the least-squares line through (x, y).
double affine_residual(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double icpt = (sy - slope * sx) / n;
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) worst = std::max(worst, std::abs(y[i] - (icpt + slope * x[i])) / y[i]);
  return worst;
}

Outcome scaling() {
  Outcome o;
  constexpr std::size_t d = 64;
  constexpr std::size_t heads = 1;
  const std::vector<AttentionSpec> variants{
      AttentionSpec::exact(),
      AttentionSpec::linear(FeatureMap::EluPlusOne),
      AttentionSpec::linear(FeatureMap::ReLU, CosinePos{}),
      AttentionSpec::linear(FeatureMap::SoftmaxKernel),
      AttentionSpec::xnor(),
      AttentionSpec::wxnor(1.0, 1.0),
  };
  BenchOptions opts;
  opts.warmups = 1;
  std::string summary;
  for (const auto& spec : variants) {
    const bool exact = spec.variant == Variant::Exact;
    const DoublingResult dbl = time_doubling(spec, 8192, d, heads, exact ? 3 : 9, kSeed, opts);
    std::vector<double> xs, ys;
    for (std::size_t n : {1024, 2048, 4096}) {
      const BenchRecord r = time_variant(spec, n, d, heads, 3, kSeed, opts);
      if (r.skipped()) continue;
      xs.push_back(static_cast<double>(n));
      ys.push_back(static_cast<double>(r.peak_bytes));
    }
    for (const BenchRecord* r : {&dbl.base, &dbl.doubled}) {
      if (r->skipped()) continue;
      xs.push_back(static_cast<double>(r->n));
      ys.push_back(static_cast<double>(r->peak_bytes));
    }
    const std::string name = spec.name();
    if (dbl.ratio == 0.0) {
      // Measured only where memory allows.
      summary += " " + name + " skipped;";
      continue;
    }
    const double resid = affine_residual(xs, ys);
    if (exact) {
      o.require(dbl.ratio > 3.0, name + " ratio " + fmt(dbl.ratio));
      o.require(resid >= 0.1, name + " memory is affine (residual " + fmt(resid) + ")");
    } else {
      o.require(dbl.ratio < 3.0, name + " ratio " + fmt(dbl.ratio));
      o.require(resid < 0.1, name + " memory residual " + fmt(resid));
    }
    summary += " " + name + " " + fmt(dbl.ratio) + "x/mem " + fmt(resid) + ";";
  }
  if (o.pass) o.detail = "time ratio / affine residual:" + summary;
  return o;
}

Outcome degeneracy() {
  Outcome o;
  const SuiteResult deg = verify_degeneracy(kSeed);
  require_below(o, deg, "wxnor-1-0-equals-softmax-kernel/", 1e-10);
  const SuiteResult perm = verify_permutation(kSeed);
  require_below(o, perm, "equivariance/", 1e-10);
  require_above(o, perm, "sensitivity/", 1e-6);
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Runs the CLI, returns stdout; empty on a nonzero exit.
std::string cli(const std::string& args, const fs::path& out) {
  const std::string cmd = std::string(XNORATTN_CLI_PATH) + " " + args + " >" + out.string() + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) return {};
  return slurp(out);
}

Outcome determinism() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / ("xnorattn_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string a = cli("verify --seed 7", dir / "a");
  const std::string b = cli("verify --seed 7", dir / "b");
  o.require(!a.empty(), "verify --seed 7 failed");
  o.require(a == b, "verify reports differ");
  const fs::path fixtures(XNORATTN_FIXTURE_DIR);
  o.require(cli("fit-toy --seed 42", dir / "fit") == slurp(fixtures / "fit_toy_seed42.csv"),
            "fit_toy_seed42.csv differs");
  o.require(cli("surface --report", dir / "rep") == slurp(fixtures / "error_surface_report.csv"),
            "error_surface_report.csv differs");
  fs::remove_all(dir);
  if (o.pass) o.detail = "verify report " + std::to_string(a.size()) + " bytes twice, 2 fixtures";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"oracle equivalence", oracle_equivalence},
      {"approximation surface", approximation},
      {"positional factorization", factorization},
      {"gradient correctness", gradients},
      {"learnability", learnability},
      {"scaling", scaling},
      {"degeneracy", degeneracy},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw: ") + e.what();
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " " << i + 1 << " " << criteria[i].first
              << (o.detail.empty() ? "" : ": " + o.detail) << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
