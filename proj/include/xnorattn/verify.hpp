#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "xnorattn/attention.hpp"

namespace xnorattn {

class Rng;

// Property suites behind `xnorattn verify`. Every suite is seeded from the
// run seed alone, so a report is a pure function of (seed, suites).

struct PropertyResult {
  std::string name;
  bool passed = false;
  /// Worst observed residual; compared against `tolerance` with `comparison`.
  double worst = 0.0;
  double tolerance = 0.0;
  /// "<=" when worst must stay under tolerance, ">" when it must exceed it.
  std::string comparison = "<=";
  std::size_t instances = 0;
};

struct SuiteResult {
  std::string name;
  std::vector<PropertyResult> properties;
  bool passed() const;
};

struct VerifyReport {
  std::uint64_t seed = 0;
  std::vector<SuiteResult> suites;

  bool passed() const;
  const PropertyResult* find(const std::string& suite, const std::string& property) const;
  nlohmann::json to_json() const;
};

/// oracle, factorization, permutation, degeneracy, gradient, approximation.
const std::vector<std::string>& verify_suite_names();

/// Runs the named suites (all when empty). Unknown names throw InvalidArgument.
VerifyReport run_verification(std::uint64_t seed, const std::vector<std::string>& suites = {});

/// Individual suites, exposed for the test binaries.
SuiteResult verify_oracle(std::uint64_t seed);
SuiteResult verify_factorization(std::uint64_t seed);
SuiteResult verify_permutation(std::uint64_t seed);
SuiteResult verify_degeneracy(std::uint64_t seed);
SuiteResult verify_gradient(std::uint64_t seed);
SuiteResult verify_approximation(std::uint64_t seed);

/// Every linear configuration covered by the oracle suite: softmax, elu and
/// relu kernels, xnor and wxnor, each with none / cosine / rotary positions.
std::vector<AttentionSpec> linear_configurations();

/// Random attention inputs for property tests.
struct AttentionInstance {
  DenseMatrix q, k, v;
};
AttentionInstance random_instance(std::size_t n, std::size_t d, Rng& rng);

/// Redraws bad query rows (and periodically the keys) until every similarity
/// row sum of `spec` is safely nonzero, at most 256 attempts.
AttentionInstance random_valid_instance(const AttentionSpec& spec, std::size_t n, std::size_t d,
                                        Rng& rng);

}  // namespace xnorattn
