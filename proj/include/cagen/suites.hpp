#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cagen/estimators.hpp"
#include "cagen/experiment.hpp"
#include "cagen/noise.hpp"

namespace cagen::suites {

struct SuiteOptions {
  std::uint64_t seed = 20240901;
  /// Replicates per Monte Carlo run; 0 selects the suite default (10^5).
  std::size_t replicates = 0;
  unsigned threads = 1;
};

struct InstanceResult {
  std::string name;
  bool pass = false;
  nlohmann::json stats;
};

struct SuiteReport {
  std::string suite;
  bool pass = false;
  std::vector<InstanceResult> instances;
  nlohmann::json summary;

  std::size_t passed() const noexcept;
  nlohmann::json to_json() const;
};

/// Variance identity on multi-step Markov pairs, |V| <= 4: the residual must
/// be within 5 jackknife standard errors in every instance.
SuiteReport verify_prop1(const SuiteOptions& opts);

/// Two-token variance ordering from the exact coupling, 100 instances, plus
/// the 0.6 / 0.7 reference values.
SuiteReport verify_prop2(const SuiteOptions& opts);

/// Closed-form win rates against Monte Carlo, 25 instances, 4 standard errors.
SuiteReport verify_prop4(const SuiteOptions& opts);

/// Tie inflation for 20 eps-perturbed pairs (eps <= 0.05, |V| <= 5); passes
/// when at least 18 instances show a gap above 3 combined standard errors.
SuiteReport verify_prop5(const SuiteOptions& opts);

/// Counterfactual stability: no violations for Gumbel-Max under shared
/// noise; the grid search must find one for inverse-transform sampling.
SuiteReport verify_stability(const SuiteOptions& opts);

/// Per-model output distributions agree within TV 0.02 between coupled and
/// independent keying, vocabularies up to 8 tokens.
SuiteReport verify_marginals(const SuiteOptions& opts);

std::optional<SuiteReport> run_suite(std::string_view name, const SuiteOptions& opts);
const std::vector<std::string>& suite_names();

// Instance generators shared with the tests.

/// Dirichlet(1) draw over `support` (other entries zero).
std::vector<double> random_simplex(KeyedStream& rng, std::size_t size, const std::vector<std::size_t>& support);

/// Markov model over `vocab` for prompts 0..n_prompts-1. Every row gives eos
/// probability at least `min_eos` so sequences terminate in a few steps.
ModelSpec random_markov_model(KeyedStream& rng, const Vocabulary& vocab, std::size_t n_prompts, double min_eos);

/// Single-step categorical model with strictly positive content rows.
ModelSpec random_categorical_model(KeyedStream& rng, const Vocabulary& vocab, std::size_t n_prompts, double floor);

/// Counterfactual-stability condition check for a pair of rows: returns true
/// when t1 sampled under d and t2 under d_prime contradict stability.
bool violates_stability(const NextTokenDistribution& d, const NextTokenDistribution& d_prime, TokenId t1, TokenId t2);

struct StabilityViolation {
  std::vector<double> d;
  std::vector<double> d_prime;
  double u = 0.0;
  TokenId t1{};
  TokenId t2{};
};

/// Enumerates 3-token distributions on a 0.1 grid and uniforms on a 0.01
/// grid, returning the first inverse-transform stability violation.
std::optional<StabilityViolation> search_inverse_transform_violation();

/// Error curves of both regimes for one pair on a shared size grid.
struct ErrorCurvePair {
  ErrorCurve coupled;
  ErrorCurve independent;
};

ErrorCurvePair run_error_curves(const NamedModel& a, const NamedModel& b, const ExperimentSetup& setup,
                                std::size_t pool_size, std::span<const std::size_t> sizes, std::size_t n_subsamples,
                                std::uint64_t seed, unsigned threads);

}  // namespace cagen::suites
