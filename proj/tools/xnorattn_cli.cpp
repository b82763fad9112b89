// xnorattn: verification, benchmarking, approximation-surface export and toy
// training for XNOR / W-XNOR linear attention.
//
// Exit codes: 0 success, 1 verification or runtime failure, 2 usage error.
// Every run echoes its resolved configuration as one JSON line on stderr;
// feeding that line back through `--config <file>` reproduces the run.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "xnorattn/approx.hpp"
#include "xnorattn/bench.hpp"
#include "xnorattn/gradients.hpp"
#include "xnorattn/io.hpp"
#include "xnorattn/verify.hpp"

namespace {

using nlohmann::json;
using namespace xnorattn;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Config {
  std::string command;
  std::uint64_t seed = 0;
  std::string out = "-";
  std::string format = "csv";

  // verify
  std::vector<std::string> suites;

  // bench
  std::vector<std::size_t> lengths;
  std::vector<std::string> variants;
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t reps = 5;
  std::size_t warmups = 2;
  bool float32 = false;
  bool parallel = false;
  std::size_t memory_budget = 0;

  // surface
  double lo = -100.0;
  double hi = 100.0;
  double step = 0.5;
  std::string kind = "sigmoid";
  bool report = false;

  // fit-toy
  std::size_t steps = 200;
  double lr = 0.05;
  std::size_t n = 32;
  std::size_t head_dim = 8;
  std::size_t toy_heads = 2;
};

json to_json(const Config& c) {
  json j = {{"command", c.command}, {"seed", c.seed}, {"out", c.out}, {"format", c.format}};
  if (c.command == "verify") {
    j["suites"] = c.suites;
  } else if (c.command == "bench") {
    j["lengths"] = c.lengths;
    j["variants"] = c.variants;
    j["d"] = c.d;
    j["heads"] = c.heads;
    j["reps"] = c.reps;
    j["warmups"] = c.warmups;
    j["float32"] = c.float32;
    j["parallel"] = c.parallel;
    j["memory_budget_bytes"] = c.memory_budget;
  } else if (c.command == "surface") {
    j["range"] = {c.lo, c.hi};
    j["step"] = c.step;
    j["kind"] = c.kind;
    j["report"] = c.report;
  } else if (c.command == "fit-toy") {
    j["steps"] = c.steps;
    j["lr"] = c.lr;
    j["n"] = c.n;
    j["d"] = c.head_dim;
    j["heads"] = c.toy_heads;
  }
  return j;
}

Config config_from_json(const json& j) {
  Config c;
  try {
    c.command = j.at("command").get<std::string>();
    c.seed = j.value("seed", c.seed);
    c.out = j.value("out", c.out);
    c.format = j.value("format", c.format);
    if (c.command == "verify") {
      c.suites = j.value("suites", c.suites);
    } else if (c.command == "bench") {
      c.lengths = j.at("lengths").get<std::vector<std::size_t>>();
      c.variants = j.at("variants").get<std::vector<std::string>>();
      c.d = j.value("d", c.d);
      c.heads = j.value("heads", c.heads);
      c.reps = j.value("reps", c.reps);
      c.warmups = j.value("warmups", c.warmups);
      c.float32 = j.value("float32", c.float32);
      c.parallel = j.value("parallel", c.parallel);
      c.memory_budget = j.value("memory_budget_bytes", c.memory_budget);
    } else if (c.command == "surface") {
      const auto range = j.at("range").get<std::vector<double>>();
      if (range.size() != 2) throw UsageError("config: range needs [lo, hi]");
      c.lo = range[0];
      c.hi = range[1];
      c.step = j.value("step", c.step);
      c.kind = j.value("kind", c.kind);
      c.report = j.value("report", c.report);
    } else if (c.command == "fit-toy") {
      c.steps = j.value("steps", c.steps);
      c.lr = j.value("lr", c.lr);
      c.n = j.value("n", c.n);
      c.head_dim = j.value("d", c.head_dim);
      c.toy_heads = j.value("heads", c.toy_heads);
    } else {
      throw UsageError("config: unknown command '" + c.command + "'");
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  return c;
}

// Output sink: stdout for "-", else a file.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path != "-") {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw Error(ErrorKind::Io, "cannot open " + path);
    }
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

void check_format(const Config& c) {
  if (c.format != "csv" && c.format != "json") throw UsageError("--format must be csv or json");
}

int run_verify(const Config& c) {
  const auto& known = verify_suite_names();
  for (const auto& name : c.suites) {
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      throw UsageError("unknown suite '" + name + "'");
    }
  }
  const VerifyReport report = run_verification(c.seed, c.suites);
  Output out(c.out);
  out.stream() << report.to_json().dump(2) << '\n';
  return report.passed() ? kExitOk : kExitFailure;
}

BenchPlan plan_from_config(const Config& c) {
  BenchPlan plan;
  plan.lengths = c.lengths;
  for (const auto& name : c.variants) plan.variants.push_back(parse_variant(name));
  plan.d = c.d;
  plan.heads = c.heads;
  plan.reps = c.reps;
  plan.seed = c.seed;
  plan.options.warmups = c.warmups;
  plan.options.float32 = c.float32;
  plan.options.parallel = c.parallel;
  plan.options.memory_budget_bytes = c.memory_budget;
  plan.validate();
  return plan;
}

int run_bench(const Config& c) {
  check_format(c);
  BenchPlan plan;
  try {
    plan = plan_from_config(c);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  Output out(c.out);
  if (c.format == "csv") {
    run_sweep(plan, &out.stream());
  } else {
    json rows = json::array();
    for (const auto& r : run_sweep(plan)) rows.push_back(to_json(r));
    out.stream() << rows.dump(2) << '\n';
  }
  return kExitOk;
}

int run_surface(const Config& c) {
  check_format(c);
  const AxisRange range{c.lo, c.hi, c.step};
  try {
    (void)range.count();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  Output out(c.out);
  if (c.report) {
    const ErrorSurface s = error_surface(range, range);
    if (c.format == "json") {
      out.stream() << json{{"max_error", s.max_error},
                           {"argmax_x", s.argmax_x},
                           {"argmax_y", s.argmax_y},
                           {"fraction_above_0.1", s.fraction_above}}
                          .dump(2)
                   << '\n';
    } else {
      out.stream() << "max_error,argmax_x,argmax_y,fraction_above_0.1\n"
                   << io::format_double(s.max_error) << ',' << io::format_double(s.argmax_x) << ','
                   << io::format_double(s.argmax_y) << ',' << io::format_double(s.fraction_above)
                   << '\n';
    }
    return kExitOk;
  }
  SurfaceKind kind = SurfaceKind::Sigmoid;
  if (c.kind == "error") {
    kind = SurfaceKind::Error;
  } else if (c.kind == "approx") {
    kind = SurfaceKind::Approx;
  } else if (c.kind != "sigmoid") {
    throw UsageError("surface kind must be sigmoid, approx or error");
  }
  const SurfaceGrid grid = compute_surface(kind, range, range);
  if (c.format == "json") {
    json points = json::array();
    for (std::size_t r = 0; r < grid.values.rows(); ++r) {
      for (std::size_t col = 0; col < grid.values.cols(); ++col) {
        points.push_back({{"x", range.at(r)}, {"y", range.at(col)}, {"value", grid.values(r, col)}});
      }
    }
    out.stream() << points.dump() << '\n';
  } else {
    export_surface(out.stream(), grid);
  }
  return kExitOk;
}

int run_fit_toy(const Config& c) {
  check_format(c);
  if (c.n == 0 || c.head_dim == 0 || c.toy_heads == 0) throw UsageError("fit-toy needs n, d, heads >= 1");
  const ToyTaskInstance task = make_toy_task(c.seed, c.n, c.toy_heads, c.head_dim);
  const ToyFitResult result = toy_fit(task, AttentionSpec::wxnor(1.0, 1.0), c.steps, c.lr);
  Output out(c.out);
  if (c.format == "json") {
    json rows = json::array();
    for (const auto& s : result.trajectory) {
      rows.push_back({{"step", s.step}, {"loss", s.loss}, {"w1", s.w1}, {"w2", s.w2}});
    }
    out.stream() << rows.dump(2) << '\n';
  } else {
    write_loss_csv(out.stream(), result);
  }
  return kExitOk;
}

int dispatch(const Config& c) {
  std::cerr << to_json(c).dump() << std::endl;
  if (c.command == "verify") return run_verify(c);
  if (c.command == "bench") return run_bench(c);
  if (c.command == "surface") return run_surface(c);
  if (c.command == "fit-toy") return run_fit_toy(c);
  throw UsageError("no subcommand given");
}

std::pair<double, double> parse_range(const std::string& text) {
  const auto colon = text.find(':', 1);
  if (colon == std::string::npos) throw UsageError("--range expects lo:hi, got '" + text + "'");
  try {
    std::size_t used_lo = 0;
    std::size_t used_hi = 0;
    const std::string lo_text = text.substr(0, colon);
    const std::string hi_text = text.substr(colon + 1);
    const double lo = std::stod(lo_text, &used_lo);
    const double hi = std::stod(hi_text, &used_hi);
    if (used_lo != lo_text.size() || used_hi != hi_text.size()) throw std::invalid_argument("trailing");
    return {lo, hi};
  } catch (const std::exception&) {
    throw UsageError("--range expects lo:hi, got '" + text + "'");
  }
}

int run(int argc, char** argv) {
  CLI::App app{"XNOR / W-XNOR linear attention: verification, benchmarks, surfaces, toy training"};
  app.require_subcommand(0, 1);
  app.fallthrough();

  Config c;
  std::string config_path;
  app.add_option("--seed", c.seed, "Seed for every random draw")->capture_default_str();
  app.add_option("--out", c.out, "Output path, - for stdout")->capture_default_str();
  app.add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  app.add_option("--config", config_path, "Replay a configuration echoed on stderr by an earlier run");

  auto* verify = app.add_subcommand("verify", "Run oracle, factorization, permutation, degeneracy, gradient and approximation suites");
  verify->add_option("--suite", c.suites, "Suite(s) to run (repeatable or comma separated)")
      ->delimiter(',')
      ->check(CLI::IsMember(verify_suite_names()));

  auto* bench = app.add_subcommand("bench", "Sequence-length scaling sweep (CSV)");
  const BenchPlan defaults = BenchPlan::default_plan();
  std::vector<std::string> default_variants;
  for (const auto& v : defaults.variants) default_variants.push_back(v.name());
  c.lengths = defaults.lengths;
  c.variants = default_variants;
  std::string plan_path;
  bool default_plan = false;
  bench->add_option("--lengths", c.lengths, "Sequence lengths, ascending")->delimiter(',');
  bench->add_option("--variants", c.variants, "Variants, e.g. exact,elu,relu-cosine,softmax,xnor,wxnor")->delimiter(',');
  bench->add_option("--d", c.d, "Head dimension")->capture_default_str();
  bench->add_option("--heads", c.heads, "Heads per forward pass")->capture_default_str();
  bench->add_option("--reps", c.reps, "Timed repetitions (>= 3)")->capture_default_str();
  bench->add_option("--warmups", c.warmups, "Untimed warmup repetitions")->capture_default_str();
  bench->add_flag("--float32", c.float32, "Run engines in 32-bit floats");
  bench->add_flag("--parallel", c.parallel, "Enable OpenMP inside the engines");
  bench->add_option("--memory-budget", c.memory_budget, "Skip cells estimated above this many bytes (0: 60% of RAM)");
  bench->add_option("--plan", plan_path, "Bench plan JSON");
  bench->add_flag("--default-plan", default_plan, "Full default sweep (N = 1k .. 30k)");

  auto* surface = app.add_subcommand("surface", "Sigmoid-of-product surface and its XNOR approximation error (CSV x,y,value)");
  std::string range_text = "-100:100";
  bool error_flag = false;
  bool approx_flag = false;
  surface->add_option("--range", range_text, "Grid range lo:hi for both axes")->capture_default_str();
  surface->add_option("--step", c.step, "Grid step")->capture_default_str();
  surface->add_flag("--error", error_flag, "Emit |sigmoid(xy) - approximation|");
  surface->add_flag("--approx", approx_flag, "Emit the approximation itself");
  surface->add_flag("--report", c.report, "Print max error and its location only");

  auto* fit = app.add_subcommand("fit-toy", "Gradient descent on a synthetic W-XNOR task (CSV step,loss,w1,w2)");
  fit->add_option("--steps", c.steps, "Gradient steps")->capture_default_str();
  fit->add_option("--lr", c.lr, "Learning rate")->capture_default_str();
  fit->add_option("--n", c.n, "Sequence length")->capture_default_str();
  fit->add_option("--d", c.head_dim, "Head dimension")->capture_default_str();
  fit->add_option("--heads", c.toy_heads, "Heads")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw UsageError("cannot open config " + config_path);
      json j;
      try {
        in >> j;
      } catch (const json::exception& e) {
        throw UsageError(std::string("config: ") + e.what());
      }
      return dispatch(config_from_json(j));
    }

    if (verify->parsed()) {
      c.command = "verify";
    } else if (bench->parsed()) {
      c.command = "bench";
      if (!plan_path.empty() || default_plan) {
        BenchPlan plan = BenchPlan::default_plan();
        if (!plan_path.empty()) {
          std::ifstream in(plan_path);
          if (!in) throw UsageError("cannot open plan " + plan_path);
          json j;
          try {
            in >> j;
          } catch (const json::exception& e) {
            throw UsageError(std::string("plan: ") + e.what());
          }
          try {
            plan = BenchPlan::from_json(j);
          } catch (const Error& e) {
            throw UsageError(e.what());
          }
        }
        c.lengths = plan.lengths;
        c.variants.clear();
        for (const auto& v : plan.variants) c.variants.push_back(v.name());
        c.d = plan.d;
        c.heads = plan.heads;
        c.reps = plan.reps;
        c.warmups = plan.options.warmups;
        c.float32 = c.float32 || plan.options.float32;
        c.parallel = c.parallel || plan.options.parallel;
        if (c.memory_budget == 0) c.memory_budget = plan.options.memory_budget_bytes;
      }
    } else if (surface->parsed()) {
      c.command = "surface";
      std::tie(c.lo, c.hi) = parse_range(range_text);
      if (error_flag && approx_flag) throw UsageError("--error and --approx are exclusive");
      c.kind = error_flag ? "error" : approx_flag ? "approx" : "sigmoid";
    } else if (fit->parsed()) {
      c.command = "fit-toy";
    } else {
      std::cerr << app.help() << std::endl;
      return kExitUsage;
    }
    return dispatch(c);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << std::endl;
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
