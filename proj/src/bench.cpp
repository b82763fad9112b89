#include "xnorattn/bench.hpp"

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <new>
#include <numeric>
#include <ostream>

#include "xnorattn/io.hpp"
#include "xnorattn/rng.hpp"

namespace xnorattn {

BenchPlan BenchPlan::default_plan() {
  BenchPlan plan;
  plan.lengths = {1024, 2048, 4096, 8192, 16384, 30000};
  plan.variants = {
      AttentionSpec::exact(),
      AttentionSpec::linear(FeatureMap::EluPlusOne),
      AttentionSpec::linear(FeatureMap::ReLU, CosinePos{}),
      AttentionSpec::linear(FeatureMap::SoftmaxKernel),
      AttentionSpec::xnor(),
      AttentionSpec::wxnor(1.0, 1.0),
  };
  return plan;
}

void BenchPlan::validate() const {
  if (lengths.empty()) throw Error(ErrorKind::InvalidArgument, "bench plan has no lengths");
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    if (lengths[i] == 0) throw Error(ErrorKind::InvalidArgument, "sequence length must be >= 1");
    if (i > 0 && lengths[i] <= lengths[i - 1]) {
      throw Error(ErrorKind::InvalidArgument, "bench lengths must be strictly ascending");
    }
  }
  if (variants.empty()) throw Error(ErrorKind::InvalidArgument, "bench plan has no variants");
  if (reps < 3) throw Error(ErrorKind::InvalidArgument, "bench needs reps >= 3");
  if (d == 0 || heads == 0) throw Error(ErrorKind::InvalidArgument, "bench needs d, heads >= 1");
  for (const auto& v : variants) {
    v.validate();
    if (std::holds_alternative<RotaryPos>(v.pos) && d % 2 != 0) {
      throw Error(ErrorKind::InvalidArgument, "rotary variants need an even d");
    }
  }
}

nlohmann::json BenchPlan::to_json() const {
  nlohmann::json variant_names = nlohmann::json::array();
  for (const auto& v : variants) variant_names.push_back(v.name());
  return {
      {"lengths", lengths},
      {"variants", variant_names},
      {"d", d},
      {"heads", heads},
      {"reps", reps},
      {"warmups", options.warmups},
      {"seed", seed},
      {"float32", options.float32},
      {"parallel", options.parallel},
      {"memory_budget_bytes", options.memory_budget_bytes},
  };
}

BenchPlan BenchPlan::from_json(const nlohmann::json& j) {
  BenchPlan plan = default_plan();
  try {
    if (j.contains("lengths")) plan.lengths = j.at("lengths").get<std::vector<std::size_t>>();
    if (j.contains("variants")) {
      plan.variants.clear();
      for (const auto& name : j.at("variants")) plan.variants.push_back(parse_variant(name.get<std::string>()));
    }
    if (j.contains("d")) plan.d = j.at("d").get<std::size_t>();
    if (j.contains("heads")) plan.heads = j.at("heads").get<std::size_t>();
    if (j.contains("reps")) plan.reps = j.at("reps").get<std::size_t>();
    if (j.contains("warmups")) plan.options.warmups = j.at("warmups").get<std::size_t>();
    if (j.contains("seed")) plan.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("float32")) plan.options.float32 = j.at("float32").get<bool>();
    if (j.contains("parallel")) plan.options.parallel = j.at("parallel").get<bool>();
    if (j.contains("memory_budget_bytes")) {
      plan.options.memory_budget_bytes = j.at("memory_budget_bytes").get<std::size_t>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("bench plan JSON: ") + e.what());
  }
  plan.validate();
  return plan;
}

std::size_t default_memory_budget() {
  const long pages = sysconf(_SC_PHYS_PAGES);
  const long page_size = sysconf(_SC_PAGE_SIZE);
  if (pages <= 0 || page_size <= 0) return std::size_t{4} << 30;
  return static_cast<std::size_t>(static_cast<double>(pages) * static_cast<double>(page_size) * 0.6);
}

std::size_t estimate_peak_bytes(const AttentionSpec& spec, std::size_t n, std::size_t d,
                                std::size_t scalar_bytes) {
  const std::size_t width = std::holds_alternative<CosinePos>(spec.pos) ? 2 * d : d;
  switch (spec.variant) {
    case Variant::Exact:
      // scores N×N, Kᵀ, output
      return scalar_bytes * (n * n + 2 * n * d);
    case Variant::LinearKernel:
      return scalar_bytes * (2 * n * d + 2 * n * width + n * d + 2 * width * d);
    case Variant::Xnor:
    case Variant::WXnor:
      return scalar_bytes * (4 * n * d + 4 * n * width + n * d + 4 * width * d);
  }
  return 0;
}

double median(std::vector<double> values) {
  if (values.empty()) throw Error(ErrorKind::InvalidArgument, "median of an empty sample");
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

namespace {

template <typename T>
struct HeadInputs {
  Matrix<T> q, k, v;
};

template <typename T>
std::vector<HeadInputs<T>> draw_inputs(std::size_t n, std::size_t d, std::size_t heads, Rng& rng) {
  std::vector<HeadInputs<T>> inputs;
  inputs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    inputs.push_back({cast_matrix<T>(random_normal(n, d, rng)), cast_matrix<T>(random_normal(n, d, rng)),
                      cast_matrix<T>(random_normal(n, d, rng))});
  }
  return inputs;
}

template <typename T>
void time_reps(const AttentionSpec& spec, std::size_t n, std::size_t d, std::size_t heads,
               std::size_t reps, std::uint64_t seed, const BenchOptions& options,
               BenchRecord& record) {
  using Clock = std::chrono::steady_clock;
  const std::size_t total = options.warmups + reps;
  for (std::size_t rep = 0; rep < total; ++rep) {
    Rng rng(seed + rep);
    const auto inputs = draw_inputs<T>(n, d, heads, rng);

    MemoryScope scope;
    const auto start = Clock::now();
    for (const auto& in : inputs) {
      const Matrix<T> out = attention_forward(spec, in.q, in.k, in.v);
      if (out.rows() != n) throw Error(ErrorKind::ShapeMismatch, "bench: unexpected output shape");
    }
    const auto stop = Clock::now();

    if (rep >= options.warmups) {
      record.times_s.push_back(std::chrono::duration<double>(stop - start).count());
      record.peak_bytes = std::max(record.peak_bytes, scope.peak_delta());
    }
  }
}

}  // namespace

BenchRecord time_variant(const AttentionSpec& spec, std::size_t n, std::size_t d,
                         std::size_t heads, std::size_t reps, std::uint64_t seed,
                         const BenchOptions& options) {
  if (reps < 3) throw Error(ErrorKind::InvalidArgument, "bench needs reps >= 3");
  AttentionSpec run_spec = spec;
  run_spec.exec = options.parallel ? Execution::Parallel : Execution::Serial;
  run_spec.validate();

  BenchRecord record;
  record.variant = spec.name();
  record.n = n;
  record.d = d;
  record.heads = heads;
  record.reps = reps;
  record.mode = options.float32 ? "f32" : "f64";
  record.parallel = options.parallel;

  const std::size_t scalar_bytes = options.float32 ? sizeof(float) : sizeof(double);
  const std::size_t budget = options.memory_budget_bytes ? options.memory_budget_bytes : default_memory_budget();
  if (estimate_peak_bytes(run_spec, n, d, scalar_bytes) > budget) {
    record.status = "skipped: memory";
    return record;
  }

  try {
    if (options.float32) {
      time_reps<float>(run_spec, n, d, heads, reps, seed, options, record);
    } else {
      time_reps<double>(run_spec, n, d, heads, reps, seed, options, record);
    }
  } catch (const std::bad_alloc&) {
    record.times_s.clear();
    record.peak_bytes = 0;
    record.status = "skipped: memory";
    return record;
  }
  record.median_s = median(record.times_s);
  record.mean_s = std::accumulate(record.times_s.begin(), record.times_s.end(), 0.0) /
                  static_cast<double>(record.times_s.size());
  return record;
}

DoublingResult time_doubling(const AttentionSpec& spec, std::size_t n, std::size_t d,
                             std::size_t heads, std::size_t rounds, std::uint64_t seed,
                             const BenchOptions& options) {
  if (rounds < 3) throw Error(ErrorKind::InvalidArgument, "time_doubling needs rounds >= 3");
  AttentionSpec run_spec = spec;
  run_spec.exec = options.parallel ? Execution::Parallel : Execution::Serial;
  run_spec.validate();

  DoublingResult out;
  out.base.variant = spec.name();
  out.base.n = n;
  out.base.d = d;
  out.base.heads = heads;
  out.base.mode = options.float32 ? "f32" : "f64";
  out.base.parallel = options.parallel;
  out.doubled = out.base;
  out.doubled.n = 2 * n;
  const std::size_t scalar_bytes = options.float32 ? sizeof(float) : sizeof(double);
  const std::size_t budget = options.memory_budget_bytes ? options.memory_budget_bytes : default_memory_budget();
  for (BenchRecord* rec : {&out.base, &out.doubled}) {
    rec->status = estimate_peak_bytes(run_spec, rec->n, d, scalar_bytes) > budget ? "skipped: memory" : "ok";
    rec->reps = rounds;
  }
  if (out.base.skipped() || out.doubled.skipped()) return out;

  try {
    for (std::size_t r = 0; r < rounds; ++r) {
      BenchOptions once = options;
      once.warmups = r == 0 ? options.warmups : 0;
      for (BenchRecord* rec : {&out.base, &out.doubled}) {
        if (options.float32) {
          time_reps<float>(run_spec, rec->n, d, heads, 1, seed + r, once, *rec);
        } else {
          time_reps<double>(run_spec, rec->n, d, heads, 1, seed + r, once, *rec);
        }
      }
    }
  } catch (const std::bad_alloc&) {
    for (BenchRecord* rec : {&out.base, &out.doubled}) {
      rec->status = "skipped: memory";
      rec->times_s.clear();
    }
    return out;
  }
  for (BenchRecord* rec : {&out.base, &out.doubled}) {
    rec->median_s = median(rec->times_s);
    rec->mean_s = std::accumulate(rec->times_s.begin(), rec->times_s.end(), 0.0) /
                  static_cast<double>(rec->times_s.size());
  }
  out.ratio = out.doubled.median_s / out.base.median_s;
  return out;
}

std::vector<BenchRecord> run_sweep(const BenchPlan& plan, std::ostream* csv) {
  plan.validate();
  if (csv) {
    write_bench_csv_header(*csv);
    csv->flush();
  }
  std::vector<BenchRecord> records;
  for (const auto& spec : plan.variants) {
    for (const std::size_t n : plan.lengths) {
      records.push_back(time_variant(spec, n, plan.d, plan.heads, plan.reps, plan.seed, plan.options));
      if (csv) {
        write_bench_csv_row(*csv, records.back());
        csv->flush();
        if (!*csv) throw Error(ErrorKind::Io, "failed writing bench CSV");
      }
    }
  }
  return records;
}

void write_bench_csv_header(std::ostream& out) {
  out << "variant,N,d,heads,reps,median_s,mean_s,peak_bytes,mode,parallel,status\n";
}

void write_bench_csv_row(std::ostream& out, const BenchRecord& r) {
  out << r.variant << ',' << r.n << ',' << r.d << ',' << r.heads << ',' << r.reps << ',';
  if (r.skipped()) {
    out << ",,";
  } else {
    out << io::format_double(r.median_s) << ',' << io::format_double(r.mean_s) << ',' << r.peak_bytes;
  }
  out << ',' << r.mode << ',' << (r.parallel ? 1 : 0) << ',' << r.status << '\n';
}

nlohmann::json to_json(const BenchRecord& r) {
  nlohmann::json j = {{"variant", r.variant}, {"N", r.n},       {"d", r.d},
                      {"heads", r.heads},     {"reps", r.reps}, {"mode", r.mode},
                      {"parallel", r.parallel}, {"status", r.status}};
  if (r.skipped()) {
    j["median_s"] = nullptr;
    j["mean_s"] = nullptr;
    j["peak_bytes"] = nullptr;
  } else {
    j["median_s"] = r.median_s;
    j["mean_s"] = r.mean_s;
    j["peak_bytes"] = r.peak_bytes;
  }
  return j;
}

}  // namespace xnorattn
