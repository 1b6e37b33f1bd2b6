#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "cagen/experiment.hpp"

namespace cagen::oracle {

/// Two models over a favored token t+ and an alternative t-.
/// Probabilities may be 0 or 1 (the closed forms stay valid there).
struct TwoTokenInstance {
  double p_m = 0.5;        // P[m emits t+]
  double p_m_prime = 0.5;  // P[m' emits t+]
  double favored_reward = 1.0;
  double other_reward = 0.0;

  void validate() const;
};

struct WinPair {
  double win_m = 0.0;        // P[R_m > R_m']
  double win_m_prime = 0.0;  // P[R_m' > R_m]
};

struct ClosedFormWinRates {
  WinPair coupled;
  WinPair independent;
};

/// Coupled: (p_m - p_m')_+ and (p_m' - p_m)_+; independent: p_m (1 - p_m')
/// and p_m' (1 - p_m). Either model may be the stronger one.
ClosedFormWinRates closed_form_win_rates(const TwoTokenInstance& inst);

/// joint[i][j] = P[m emits token i, m' emits token j] with token 0 = t+.
using TwoTokenJoint = std::array<std::array<double, 2>, 2>;

/// Exact Gumbel-Max coupling of (p, 1-p) and (p', 1-p'). The argmax picks t+
/// iff U_+ - U_- >= log((1-p)/p), and U_+ - U_- is Logistic(0,1).
TwoTokenJoint two_token_coupled_joint(double p, double p_prime);

/// Product coupling of the two marginals.
TwoTokenJoint two_token_independent_joint(double p, double p_prime);

struct ClosedFormVariances {
  double var_coupled = 0.0;
  double var_independent = 0.0;
  double covariance = 0.0;  // Cov(R_m, R_m') under the coupled joint
};

ClosedFormVariances closed_form_variances(const TwoTokenInstance& inst);

/// Three models, two equally likely prompts, binary preference per prompt.
struct ExampleTable {
  static constexpr std::size_t kModels = 3;
  static constexpr std::size_t kPrompts = 2;

  /// probs[q][k]: probability model k answers prompt q correctly.
  std::array<std::array<double, kModels>, kPrompts> probs{};
  std::array<double, kModels> independent{};
  std::array<double, kModels> coupled{};
  /// Model indices from best to worst.
  std::array<std::size_t, kModels> independent_order{};
  std::array<std::size_t, kModels> coupled_order{};

  bool rankings_differ() const noexcept { return independent_order != coupled_order; }
};

/// Average win rates of each model against the others, prompts uniform:
/// (1/2) sum_{j != k} E_q[win_kj], from the two-token closed forms.
ExampleTable example_table(const std::array<std::array<double, 3>, 2>& probs);

/// The three-model ranking-flip example: probs {0.4, 0.48, 0.5} and {1, 0.9, 0.89}.
ExampleTable appendix_example();

struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

struct McReference {
  std::size_t n = 0;
  Estimate mean_a;
  Estimate mean_b;
  Estimate mean_difference;
  Estimate win_rate;
  Estimate loss_rate;
  Estimate tie_rate;
  double var_difference = 0.0;  // plug-in
  double covariance = 0.0;      // plug-in Cov(score_a, score_b)
  /// Cell frequencies of (score_a, score_b) when both scores are 0/1,
  /// indexed [1 - score_a][1 - score_b] so that [0][0] is "both score 1".
  std::array<std::array<Estimate, 2>, 2> binary_joint{};
  bool binary = false;
};

/// Brute-force reference for one ordered pair: N replicates through the
/// generation pipeline on the oracle noise namespace.
McReference mc_reference(const NamedModel& a, const NamedModel& b, const ExperimentSetup& setup, Coupling coupling,
                         std::size_t n, std::uint64_t seed, unsigned threads = 1);

/// Minimum replicate count accepted by mc_reference.
inline constexpr std::size_t kMinReferenceReplicates = 10'000;

/// Vocabulary {t+ = 0, t- = 1, eos = 2} with single-step categorical models
/// emitting t+ with probability p, a correctness scorer accepting [t+], and
/// K = 2 (content token, then eos).
struct TwoTokenSetup {
  NamedModel m;
  NamedModel m_prime;
  ExperimentSetup setup;
};

TwoTokenSetup make_two_token_setup(const TwoTokenInstance& inst, Sampler sampler = Sampler::GumbelMax);

}  // namespace cagen::oracle
