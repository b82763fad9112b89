#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("xnorattn_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

Run run(const std::string& args) {
  const fs::path out = scratch() / "stdout";
  const fs::path err = scratch() / "stderr";
  const std::string cmd =
      std::string(XNORATTN_CLI_PATH) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

std::size_t lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

std::string first_line(const std::string& s) { return s.substr(0, s.find('\n')); }

}  // namespace

TEST_CASE("verify filter and report") {
  const Run r = run("verify --suite oracle");
  CHECK(r.code == 0);
  const auto j = nlohmann::json::parse(r.out);
  REQUIRE(j["suites"].size() == 1);
  CHECK(j["suites"][0]["suite"] == "oracle");
  CHECK(j["passed"] == true);
}

TEST_CASE("verify output is byte-identical across runs") {
  const Run a = run("verify --seed 7 --suite factorization,degeneracy");
  const Run b = run("--seed 7 verify --suite factorization --suite degeneracy");
  CHECK(a.code == 0);
  CHECK(a.out == b.out);
}

TEST_CASE("bench rows and modes") {
  const Run r = run("bench --lengths 1024,2048 --variants xnor");
  CHECK(r.code == 0);
  CHECK(lines(r.out) == 3);
  CHECK(first_line(r.out) == "variant,N,d,heads,reps,median_s,mean_s,peak_bytes,mode,parallel,status");

  const Run f = run("bench --lengths 64 --variants exact --float32 --parallel --reps 3");
  CHECK(f.code == 0);
  CHECK(f.out.find(",f32,1,ok") != std::string::npos);

  const fs::path plan = scratch() / "plan.json";
  std::ofstream(plan) << R"({"lengths": [32, 64], "variants": ["elu", "wxnor-cosine"], "d": 8, "heads": 1, "reps": 3})";
  const Run p = run("bench --plan " + plan.string() + " --format json");
  CHECK(p.code == 0);
  const auto j = nlohmann::json::parse(p.out);
  REQUIRE(j.size() == 4);
  CHECK(j[3]["variant"] == "wxnor-cosine");
  CHECK(j[3]["N"] == 64);

  CHECK(run("bench --lengths 2048,1024 --variants xnor").code == 2);
  CHECK(run("bench --lengths 64 --variants nope").code == 2);
}

TEST_CASE("surface exports") {
  const Run r = run("surface --range -100:100 --step 1");
  CHECK(r.code == 0);
  CHECK(lines(r.out) == 40402);
  CHECK(first_line(r.out) == "x,y,value");

  // |σ(±1) - approx| = 0.12428244511296858433 (40-digit reference), 0 on the axes.
  const Run e = run("surface --range=-1:1 --step 1 --error");
  std::istringstream grid(e.out);
  std::string row;
  std::getline(grid, row);
  std::size_t count = 0;
  while (std::getline(grid, row)) {
    double x = 0.0, y = 0.0, v = 0.0;
    REQUIRE(std::sscanf(row.c_str(), "%lf,%lf,%lf", &x, &y, &v) == 3);
    const double expected = (x == 0.0 || y == 0.0) ? 0.0 : 0.12428244511296858433;
    CHECK(std::abs(v - expected) <= 1e-16);
    ++count;
  }
  CHECK(count == 9);

  const Run rep = run("surface --report");
  CHECK(rep.code == 0);
  CHECK(lines(rep.out) == 2);
  CHECK(rep.out.find("0.37754066879814") != std::string::npos);

  CHECK(run("surface --range 1:0").code == 2);
  CHECK(run("surface --range abc").code == 2);
  CHECK(run("surface --error --approx").code == 2);
}

TEST_CASE("fit-toy") {
  const Run zero = run("fit-toy --steps 0");
  CHECK(zero.code == 0);
  CHECK(lines(zero.out) == 2);

  const Run flat = run("fit-toy --lr 0 --steps 4");
  std::istringstream in(flat.out);
  std::string line;
  std::getline(in, line);
  std::string loss;
  while (std::getline(in, line)) {
    const auto a = line.find(',');
    const std::string l = line.substr(a + 1, line.find(',', a + 1) - a - 1);
    if (loss.empty()) loss = l;
    CHECK(l == loss);
  }

  const Run fixed = run("fit-toy --seed 42 --steps 200");
  CHECK(fixed.code == 0);
  CHECK(fixed.out == slurp(fs::path(XNORATTN_FIXTURE_DIR) / "fit_toy_seed42.csv"));
}

TEST_CASE("config echo replays the run") {
  const Run first = run("fit-toy --seed 5 --steps 3 --lr 0.1 --heads 1 --d 4 --n 6");
  const auto config = nlohmann::json::parse(first_line(first.err));
  CHECK(config["command"] == "fit-toy");
  CHECK(config["lr"] == 0.1);
  const fs::path path = scratch() / "config.json";
  std::ofstream(path) << config.dump();
  const Run replay = run("--config " + path.string());
  CHECK(replay.code == 0);
  CHECK(replay.out == first.out);
  CHECK(first_line(replay.err) == first_line(first.err));

  const Run s = run("surface --range=-2:2 --step 0.5 --approx --format json");
  std::ofstream(path) << first_line(s.err);
  CHECK(run("--config " + path.string()).out == s.out);
}

TEST_CASE("output file and usage errors") {
  const fs::path out = scratch() / "loss.csv";
  const Run r = run("fit-toy --steps 1 --out " + out.string());
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  CHECK(lines(slurp(out)) == 3);

  CHECK(run("").code == 2);
  CHECK(run("frobnicate").code == 2);
  CHECK(run("fit-toy --wat").code == 2);
  CHECK(run("verify --suite nope").code == 2);
  CHECK(run("--format xml fit-toy").code == 2);
  CHECK(run("--help").code == 0);
}
