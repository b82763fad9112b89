#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "xnorattn/attention.hpp"

namespace xnorattn {

struct BenchRecord {
  std::string variant;
  std::size_t n = 0;
  std::size_t d = 0;
  std::size_t heads = 0;
  std::size_t reps = 0;
  double median_s = 0.0;
  double mean_s = 0.0;
  /// High-water mark of matrix bytes allocated inside the timed region.
  std::size_t peak_bytes = 0;
  std::string mode = "f64";
  bool parallel = false;
  /// "ok" or "skipped: memory".
  std::string status = "ok";
  std::vector<double> times_s;

  bool skipped() const noexcept { return status != "ok"; }
};

struct BenchOptions {
  std::size_t warmups = 2;
  bool float32 = false;
  bool parallel = false;
  /// Cells whose estimated footprint exceeds this are skipped, not run.
  std::size_t memory_budget_bytes = 0;  // 0: 60% of physical memory
};

struct BenchPlan {
  std::vector<std::size_t> lengths;
  std::vector<AttentionSpec> variants;
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t reps = 5;
  std::uint64_t seed = 0;
  BenchOptions options;

  /// Exact, ELU+1, ReLU+cosine, softmax kernel, XNOR and W-XNOR over
  /// N = 1k .. 30k, d = 64, 4 heads, median of 5 reps after 2 warmups.
  static BenchPlan default_plan();

  /// Lengths non-empty and strictly ascending, reps >= 3, d and heads >= 1.
  void validate() const;

  nlohmann::json to_json() const;
  static BenchPlan from_json(const nlohmann::json& j);
};

std::size_t default_memory_budget();

/// Footprint estimate used for the skip decision (bytes, per head).
std::size_t estimate_peak_bytes(const AttentionSpec& spec, std::size_t n, std::size_t d,
                                std::size_t scalar_bytes);

/// Times `reps` forward passes (each over `heads` heads of N×d inputs)
/// after `options.warmups` untimed ones. Inputs for every rep are drawn
/// from `seed` before the clock starts.
BenchRecord time_variant(const AttentionSpec& spec, std::size_t n, std::size_t d,
                         std::size_t heads, std::size_t reps, std::uint64_t seed,
                         const BenchOptions& options = {});

struct DoublingResult {
  BenchRecord base;     // N
  BenchRecord doubled;  // 2N
  /// doubled.median_s / base.median_s; 0 when either cell was skipped.
  double ratio = 0.0;
};

/// Times N and 2N alternately, one rep each per round (warmups before the
/// first round only), so drift in machine load hits both sides alike.
/// rounds >= 3; each record's median is over its `rounds` samples.
DoublingResult time_doubling(const AttentionSpec& spec, std::size_t n, std::size_t d,
                             std::size_t heads, std::size_t rounds, std::uint64_t seed,
                             const BenchOptions& options = {});

/// Variants outer, lengths inner. When `csv` is given the header and each
/// row are written and flushed as soon as the cell finishes.
std::vector<BenchRecord> run_sweep(const BenchPlan& plan, std::ostream* csv = nullptr);

void write_bench_csv_header(std::ostream& out);
void write_bench_csv_row(std::ostream& out, const BenchRecord& record);
nlohmann::json to_json(const BenchRecord& record);

/// Median of a non-empty sample.
double median(std::vector<double> values);

}  // namespace xnorattn
