#include "cagen/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cagen/errors.hpp"
#include "cagen/parallel.hpp"

namespace cagen::oracle {

void TwoTokenInstance::validate() const {
  if (!(p_m >= 0.0 && p_m <= 1.0) || !(p_m_prime >= 0.0 && p_m_prime <= 1.0)) {
    throw DomainError("two-token probabilities must lie in [0,1]");
  }
  if (!(favored_reward > other_reward)) throw DomainError("favored reward must exceed the other reward");
}

ClosedFormWinRates closed_form_win_rates(const TwoTokenInstance& inst) {
  inst.validate();
  const double p = inst.p_m;
  const double q = inst.p_m_prime;
  ClosedFormWinRates out;
  out.coupled = {std::max(0.0, p - q), std::max(0.0, q - p)};
  out.independent = {p * (1.0 - q), q * (1.0 - p)};
  return out;
}

namespace {

double logistic_cdf(double x) noexcept {
  if (x == -INFINITY) return 0.0;
  if (x == INFINITY) return 1.0;
  return 1.0 / (1.0 + std::exp(-x));
}

double threshold(double p) noexcept { return std::log((1.0 - p) / p); }

}  // namespace

TwoTokenJoint two_token_coupled_joint(double p, double p_prime) {
  if (!(p > 0.0 && p < 1.0) || !(p_prime > 0.0 && p_prime < 1.0)) {
    throw DomainError("coupled joint needs probabilities in (0,1)");
  }
  const double fa = logistic_cdf(threshold(p));
  const double fb = logistic_cdf(threshold(p_prime));
  TwoTokenJoint joint{};
  joint[0][0] = 1.0 - std::max(fa, fb);
  joint[1][1] = std::min(fa, fb);
  // The model with the lower threshold picks t+ on the extra stretch alone.
  if (fa < fb) {
    joint[0][1] = fb - fa;
  } else {
    joint[1][0] = fa - fb;
  }
  return joint;
}

TwoTokenJoint two_token_independent_joint(double p, double p_prime) {
  if (!(p >= 0.0 && p <= 1.0) || !(p_prime >= 0.0 && p_prime <= 1.0)) {
    throw DomainError("probabilities must lie in [0,1]");
  }
  return {{{p * p_prime, p * (1.0 - p_prime)}, {(1.0 - p) * p_prime, (1.0 - p) * (1.0 - p_prime)}}};
}

namespace {

struct Moments {
  double mean_a = 0.0, mean_b = 0.0, e_ab = 0.0, e_aa = 0.0, e_bb = 0.0;

  double var_difference() const noexcept {
    const double var_a = e_aa - mean_a * mean_a;
    const double var_b = e_bb - mean_b * mean_b;
    return var_a + var_b - 2.0 * covariance();
  }
  double covariance() const noexcept { return e_ab - mean_a * mean_b; }
};

Moments moments(const TwoTokenJoint& joint, double r_plus, double r_minus) {
  const double reward[2] = {r_plus, r_minus};
  Moments m;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double w = joint[i][j];
      m.mean_a += w * reward[i];
      m.mean_b += w * reward[j];
      m.e_ab += w * reward[i] * reward[j];
      m.e_aa += w * reward[i] * reward[i];
      m.e_bb += w * reward[j] * reward[j];
    }
  }
  return m;
}

}  // namespace

ClosedFormVariances closed_form_variances(const TwoTokenInstance& inst) {
  inst.validate();
  const auto coupled = moments(two_token_coupled_joint(inst.p_m, inst.p_m_prime), inst.favored_reward,
                               inst.other_reward);
  const auto independent = moments(two_token_independent_joint(inst.p_m, inst.p_m_prime), inst.favored_reward,
                                   inst.other_reward);
  return {coupled.var_difference(), independent.var_difference(), coupled.covariance()};
}

ExampleTable example_table(const std::array<std::array<double, 3>, 2>& probs) {
  ExampleTable table;
  table.probs = probs;
  constexpr std::size_t M = ExampleTable::kModels;
  for (std::size_t k = 0; k < M; ++k) {
    double independent = 0.0;
    double coupled = 0.0;
    for (std::size_t j = 0; j < M; ++j) {
      if (j == k) continue;
      for (std::size_t q = 0; q < ExampleTable::kPrompts; ++q) {
        const auto rates = closed_form_win_rates({probs[q][k], probs[q][j]});
        independent += rates.independent.win_m;
        coupled += rates.coupled.win_m;
      }
    }
    // Half over opponents, half over the two uniform prompts.
    table.independent[k] = independent / 4.0;
    table.coupled[k] = coupled / 4.0;
  }
  auto order = [](const std::array<double, M>& scores) {
    std::array<std::size_t, M> idx{};
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return scores[x] > scores[y]; });
    return idx;
  };
  table.independent_order = order(table.independent);
  table.coupled_order = order(table.coupled);
  return table;
}

ExampleTable appendix_example() { return example_table({{{0.4, 0.48, 0.5}, {1.0, 0.9, 0.89}}}); }

McReference mc_reference(const NamedModel& a, const NamedModel& b, const ExperimentSetup& setup, Coupling coupling,
                         std::size_t n, std::uint64_t seed, unsigned threads) {
  if (n < kMinReferenceReplicates) throw DomainError("reference runs need at least 10^4 replicates");
  const PairedSampleSet pairs = collect_pairs(a, b, setup, coupling, n, NoiseSource(seed, NoiseDomain::Oracle), threads);
  const double dn = static_cast<double>(n);

  McReference out;
  out.n = n;
  auto mean_and_se = [&](auto get) {
    double mean = 0.0;
    for (const auto& r : pairs.records) mean += get(r);
    mean /= dn;
    double ss = 0.0;
    for (const auto& r : pairs.records) ss += (get(r) - mean) * (get(r) - mean);
    return std::pair{Estimate{mean, std::sqrt(ss / (dn - 1.0) / dn)}, ss / dn};
  };
  auto proportion = [&](std::uint64_t count) {
    const double p = static_cast<double>(count) / dn;
    return Estimate{p, std::sqrt(p * (1.0 - p) / dn)};
  };

  const auto [mean_a, var_a] = mean_and_se([](const PairedRecord& r) { return r.score_a; });
  const auto [mean_b, var_b] = mean_and_se([](const PairedRecord& r) { return r.score_b; });
  const auto [mean_d, var_d] = mean_and_se([](const PairedRecord& r) { return r.difference(); });
  out.mean_a = mean_a;
  out.mean_b = mean_b;
  out.mean_difference = mean_d;
  out.var_difference = var_d;
  out.covariance = 0.5 * (var_a + var_b - var_d);

  OutcomeTally tally;
  const double tol = setup.scorer.default_tolerance();
  for (const auto& r : pairs.records) tally.add(compare(r.score_a, r.score_b, tol));
  out.win_rate = proportion(tally.wins);
  out.loss_rate = proportion(tally.losses);
  out.tie_rate = proportion(tally.ties);

  out.binary = std::all_of(pairs.records.begin(), pairs.records.end(), [](const PairedRecord& r) {
    return (r.score_a == 0.0 || r.score_a == 1.0) && (r.score_b == 0.0 || r.score_b == 1.0);
  });
  if (out.binary) {
    std::array<std::array<std::uint64_t, 2>, 2> counts{};
    for (const auto& r : pairs.records) ++counts[r.score_a == 1.0 ? 0 : 1][r.score_b == 1.0 ? 0 : 1];
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) out.binary_joint[i][j] = proportion(counts[i][j]);
    }
  }
  return out;
}

TwoTokenSetup make_two_token_setup(const TwoTokenInstance& inst, Sampler sampler) {
  inst.validate();
  const Vocabulary vocab(3, TokenId{2});
  const PromptId prompt{0};
  auto model = [&](double p) {
    return ModelSpec::categorical(vocab, {{prompt, NextTokenDistribution({p, 1.0 - p, 0.0})}});
  };
  Scorer scorer = Scorer::reward_table({{{prompt, {TokenId{0}}}, inst.favored_reward},
                                        {{prompt, {TokenId{1}}}, inst.other_reward}});
  return {NamedModel{"m", model(inst.p_m)},
          NamedModel{"m_prime", model(inst.p_m_prime)},
          ExperimentSetup{PromptSet::uniform({prompt}), std::move(scorer), GenerationConfig{2, 1.0, sampler}}};
}

}  // namespace cagen::oracle
