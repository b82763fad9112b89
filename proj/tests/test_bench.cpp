#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sstream>

#include "xnorattn/bench.hpp"

using namespace xnorattn;

TEST_CASE("median") {
  CHECK(median({3.0, 1.0, 2.0}) == 2.0);
  CHECK(median({4.0, 1.0, 2.0, 3.0}) == 2.5);
  CHECK_THROWS_AS(median({}), Error);
}

TEST_CASE("default plan") {
  const BenchPlan plan = BenchPlan::default_plan();
  CHECK(plan.lengths == std::vector<std::size_t>{1024, 2048, 4096, 8192, 16384, 30000});
  std::vector<std::string> names;
  for (const auto& v : plan.variants) names.push_back(v.name());
  CHECK(names == std::vector<std::string>{"exact", "elu", "relu-cosine", "softmax", "xnor", "wxnor"});
  CHECK(plan.d == 64);
  CHECK(plan.heads == 4);
  CHECK(plan.reps == 5);
  CHECK(plan.options.warmups == 2);
  plan.validate();
}

TEST_CASE("plan validation") {
  BenchPlan plan = BenchPlan::default_plan();
  plan.lengths = {2048, 1024};
  CHECK_THROWS_AS(plan.validate(), Error);
  plan.lengths = {};
  CHECK_THROWS_AS(plan.validate(), Error);
  plan = BenchPlan::default_plan();
  plan.reps = 2;
  CHECK_THROWS_AS(plan.validate(), Error);
  plan = BenchPlan::default_plan();
  plan.variants = {AttentionSpec::xnor(RotaryPos{})};
  plan.d = 7;
  CHECK_THROWS_AS(plan.validate(), Error);
}

TEST_CASE("plan json round trip") {
  BenchPlan plan = BenchPlan::default_plan();
  plan.lengths = {16, 32};
  plan.variants = {AttentionSpec::xnor(CosinePos{}), AttentionSpec::exact()};
  plan.seed = 9;
  plan.options.float32 = true;
  const BenchPlan back = BenchPlan::from_json(plan.to_json());
  CHECK(back.to_json() == plan.to_json());
  CHECK_THROWS_AS(BenchPlan::from_json(nlohmann::json{{"lengths", "nope"}}), Error);
}

TEST_CASE("time_variant record contract") {
  const BenchRecord r = time_variant(AttentionSpec::xnor(), 64, 8, 2, 3, 1);
  CHECK(r.times_s.size() == 3);
  CHECK(r.median_s > 0.0);
  CHECK(r.median_s == median(r.times_s));
  CHECK(r.peak_bytes > 0);
  CHECK(r.status == "ok");
  CHECK(r.mode == "f64");
  CHECK_THROWS_AS(time_variant(AttentionSpec::xnor(), 64, 8, 1, 2, 1), Error);

  BenchOptions f32;
  f32.float32 = true;
  CHECK(time_variant(AttentionSpec::exact(), 64, 8, 1, 3, 1, f32).mode == "f32");
}

TEST_CASE("memory budget skips instead of crashing") {
  BenchOptions tight;
  tight.memory_budget_bytes = 1024;
  const BenchRecord r = time_variant(AttentionSpec::exact(), 4096, 64, 1, 3, 1, tight);
  CHECK(r.status == "skipped: memory");
  CHECK(r.times_s.empty());
  std::stringstream ss;
  write_bench_csv_row(ss, r);
  CHECK(ss.str() == "exact,4096,64,1,3,,,,f64,0,skipped: memory\n");
  CHECK(to_json(r)["median_s"].is_null());
}

TEST_CASE("exact memory estimate is quadratic, linear variants linear") {
  const auto exact = [](std::size_t n) { return estimate_peak_bytes(AttentionSpec::exact(), n, 64, 8); };
  const auto xnor = [](std::size_t n) { return estimate_peak_bytes(AttentionSpec::xnor(), n, 64, 8); };
  CHECK(exact(30000) > 7000000000u);
  CHECK(static_cast<double>(xnor(16384)) / static_cast<double>(xnor(8192)) < 2.01);
}

TEST_CASE("sweep ordering and csv") {
  BenchPlan plan;
  plan.lengths = {16, 32};
  plan.variants = {AttentionSpec::xnor(), AttentionSpec::linear(FeatureMap::EluPlusOne)};
  plan.d = 4;
  plan.heads = 1;
  plan.reps = 3;
  plan.options.warmups = 1;
  std::stringstream ss;
  const auto records = run_sweep(plan, &ss);
  REQUIRE(records.size() == 4);
  CHECK(records[0].variant == "xnor");
  CHECK(records[1].n == 32);
  CHECK(records[2].variant == "elu");
  std::string header;
  std::getline(ss, header);
  CHECK(header == "variant,N,d,heads,reps,median_s,mean_s,peak_bytes,mode,parallel,status");
  std::string line;
  int rows = 0;
  while (std::getline(ss, line)) ++rows;
  CHECK(rows == 4);

  plan.lengths = {16};
  plan.variants = {AttentionSpec::xnor()};
  CHECK(run_sweep(plan).size() == 1);
}

TEST_CASE("scaling ratio examples") {
  BenchOptions opts;
  opts.warmups = 1;
  const DoublingResult exact = time_doubling(AttentionSpec::exact(), 1024, 64, 1, 9, 3, opts);
  CHECK(exact.base.times_s.size() == 9);
  CHECK(exact.ratio >= 3.0);
  CHECK(exact.ratio <= 5.5);
  const DoublingResult xnor = time_doubling(AttentionSpec::xnor(), 8192, 64, 1, 9, 3, opts);
  CHECK(xnor.doubled.n == 16384);
  CHECK(xnor.ratio >= 1.6);
  CHECK(xnor.ratio <= 2.6);
}
