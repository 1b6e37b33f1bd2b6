#include "cagen/suites.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "cagen/errors.hpp"
#include "cagen/oracle.hpp"
#include "cagen/parallel.hpp"

namespace cagen::suites {

using nlohmann::json;

std::size_t SuiteReport::passed() const noexcept {
  return static_cast<std::size_t>(std::count_if(instances.begin(), instances.end(), [](const auto& i) { return i.pass; }));
}

json SuiteReport::to_json() const {
  json out;
  out["suite"] = suite;
  out["pass"] = pass;
  out["instances_passed"] = passed();
  out["instances_total"] = instances.size();
  out["summary"] = summary;
  json list = json::array();
  for (const auto& inst : instances) list.push_back({{"name", inst.name}, {"pass", inst.pass}, {"stats", inst.stats}});
  out["instances"] = std::move(list);
  return out;
}

namespace {

constexpr std::size_t kDefaultReplicates = 100'000;

std::size_t replicates_or_default(const SuiteOptions& opts) {
  return opts.replicates ? opts.replicates : kDefaultReplicates;
}

// Instance draws for suite `tag`, instance `index`: separate from every
// generation and oracle stream.
KeyedStream instance_stream(const SuiteOptions& opts, std::uint32_t tag, std::uint32_t index) {
  return KeyedStream(NoiseSource(opts.seed, NoiseDomain::Instances), NoiseKey{tag, {index, 0}, 0});
}

std::vector<std::size_t> content_tokens(const Vocabulary& vocab) {
  std::vector<std::size_t> out;
  for (std::size_t t = 0; t < vocab.size(); ++t) {
    if (t != index_of(vocab.eos())) out.push_back(t);
  }
  return out;
}

bool all_pass(const std::vector<InstanceResult>& instances) {
  return std::all_of(instances.begin(), instances.end(), [](const auto& i) { return i.pass; });
}

}  // namespace

std::vector<double> random_simplex(KeyedStream& rng, std::size_t size, const std::vector<std::size_t>& support) {
  std::vector<double> out(size, 0.0);
  double total = 0.0;
  for (std::size_t t : support) {
    out[t] = rng.next_exponential();
    total += out[t];
  }
  for (double& p : out) p /= total;
  return out;
}

ModelSpec random_markov_model(KeyedStream& rng, const Vocabulary& vocab, std::size_t n_prompts, double min_eos) {
  std::vector<std::size_t> all(vocab.size());
  std::iota(all.begin(), all.end(), 0);
  const std::size_t eos = index_of(vocab.eos());
  auto row = [&] {
    auto probs = random_simplex(rng, vocab.size(), all);
    for (double& p : probs) p *= 1.0 - min_eos;
    probs[eos] += min_eos;
    return NextTokenDistribution(std::move(probs));
  };
  std::map<PromptId, NextTokenDistribution> initial;
  for (std::size_t q = 0; q < n_prompts; ++q) initial.emplace(PromptId{static_cast<std::uint32_t>(q)}, row());
  std::map<TokenId, NextTokenDistribution> transitions;
  for (std::size_t t : content_tokens(vocab)) transitions.emplace(TokenId{static_cast<std::uint32_t>(t)}, row());
  return ModelSpec::markov(vocab, std::move(initial), std::move(transitions));
}

ModelSpec random_categorical_model(KeyedStream& rng, const Vocabulary& vocab, std::size_t n_prompts, double floor) {
  const auto content = content_tokens(vocab);
  std::map<PromptId, NextTokenDistribution> rows;
  for (std::size_t q = 0; q < n_prompts; ++q) {
    auto probs = random_simplex(rng, vocab.size(), content);
    const double scale = 1.0 - floor * static_cast<double>(content.size());
    for (std::size_t t : content) probs[t] = floor + scale * probs[t];
    rows.emplace(PromptId{static_cast<std::uint32_t>(q)}, NextTokenDistribution(std::move(probs)));
  }
  return ModelSpec::categorical(vocab, std::move(rows));
}

bool violates_stability(const NextTokenDistribution& d, const NextTokenDistribution& d_prime, TokenId t1, TokenId t2) {
  if (t1 == t2) return false;
  // d'_{t1} / d_{t1} >= d'_{t2} / d_{t2}, cross-multiplied so zero entries are handled.
  return d_prime[t1] * d[t2] >= d_prime[t2] * d[t1];
}

std::optional<StabilityViolation> search_inverse_transform_violation() {
  std::vector<std::vector<double>> grid;
  for (int a = 1; a <= 8; ++a) {
    for (int b = 1; a + b <= 9; ++b) grid.push_back({a / 10.0, b / 10.0, (10 - a - b) / 10.0});
  }
  for (const auto& p : grid) {
    const NextTokenDistribution d(p);
    for (const auto& q : grid) {
      const NextTokenDistribution d_prime(q);
      for (int k = 1; k < 100; ++k) {
        const double u = (k - 0.5) / 99.0;
        const TokenId t1 = inverse_transform_sample(d, u);
        const TokenId t2 = inverse_transform_sample(d_prime, u);
        if (violates_stability(d, d_prime, t1, t2)) return StabilityViolation{p, q, u, t1, t2};
      }
    }
  }
  return std::nullopt;
}

ErrorCurvePair run_error_curves(const NamedModel& a, const NamedModel& b, const ExperimentSetup& setup,
                                std::size_t pool_size, std::span<const std::size_t> sizes, std::size_t n_subsamples,
                                std::uint64_t seed, unsigned threads) {
  const NoiseSource noise(seed);
  const auto coupled = collect_pairs(a, b, setup, Coupling::Coupled, pool_size, noise, threads);
  const auto independent = collect_pairs(a, b, setup, Coupling::Independent, pool_size, noise, threads);
  return {error_curve(coupled, sizes, n_subsamples, seed, threads),
          error_curve(independent, sizes, n_subsamples, seed, threads)};
}

SuiteReport verify_prop1(const SuiteOptions& opts) {
  const std::size_t n = replicates_or_default(opts);
  SuiteReport report{"prop1", false, {}, {}};
  for (std::uint32_t i = 0; i < 10; ++i) {
    KeyedStream rng = instance_stream(opts, 1, i);
    const std::size_t size = 3 + i % 2;  // 3 or 4 tokens including eos
    const Vocabulary vocab(size, TokenId{static_cast<std::uint32_t>(size - 1)});
    const std::size_t max_steps = 4;
    const NamedModel a{"a", random_markov_model(rng, vocab, 2, 0.15)};
    const NamedModel b{"b", i % 2 == 0 ? perturb(a.spec, rng.next_uniform(0.1, 0.5), 1000 + i)
                                       : random_markov_model(rng, vocab, 2, 0.15)};

    // Random rewards on every content sequence of length 1..K.
    std::map<std::pair<PromptId, std::vector<TokenId>>, double> rewards;
    std::vector<std::vector<TokenId>> frontier{{}};
    for (std::size_t len = 1; len <= max_steps; ++len) {
      std::vector<std::vector<TokenId>> next;
      for (const auto& prefix : frontier) {
        for (std::size_t t = 0; t + 1 < size; ++t) {
          auto seq = prefix;
          seq.push_back(TokenId{static_cast<std::uint32_t>(t)});
          next.push_back(std::move(seq));
        }
      }
      for (const auto& seq : next) {
        for (std::uint32_t q = 0; q < 2; ++q) rewards[{PromptId{q}, seq}] = rng.next_uniform();
      }
      frontier = std::move(next);
    }

    const ExperimentSetup setup{PromptSet::uniform({PromptId{0}, PromptId{1}}), Scorer::reward_table(rewards),
                                GenerationConfig{max_steps, 1.0, Sampler::GumbelMax}};
    const NoiseSource noise(opts.seed + i);
    const auto coupled = collect_pairs(a, b, setup, Coupling::Coupled, n, noise, opts.threads);
    const auto independent = collect_pairs(a, b, setup, Coupling::Independent, n, noise, opts.threads);
    // The identity holds conditional on the prompt; a shared random prompt adds
    // -2 Cov_q(E[a|q], E[b|q]) to the pooled residual. Check each stratum.
    for (std::uint32_t q = 0; q < 2; ++q) {
      const auto v = variance_decomposition(prompt_stratum(coupled, PromptId{q}), prompt_stratum(independent, PromptId{q}));
      const bool pass = std::abs(v.identity_residual) < 5.0 * v.residual_se;
      report.instances.push_back({"instance_" + std::to_string(i) + "_prompt_" + std::to_string(q),
                                  pass,
                                  {{"vocabulary_size", size},
                                   {"var_diff_coupled", v.var_diff_coupled},
                                   {"var_diff_independent", v.var_diff_independent},
                                   {"covariance", v.covariance},
                                   {"identity_residual", v.identity_residual},
                                   {"residual_se", v.residual_se},
                                   {"replicates", n}}});
    }
  }
  report.pass = all_pass(report.instances);
  report.summary = {{"criterion", "|residual| < 5 jackknife SE in every instance and prompt"}};
  return report;
}

SuiteReport verify_prop2(const SuiteOptions& opts) {
  SuiteReport report{"prop2", false, {}, {}};
  {
    const auto v = oracle::closed_form_variances({0.6, 0.7});
    const bool pass = std::abs(v.var_coupled - 0.09) < 1e-12 && std::abs(v.var_independent - 0.45) < 1e-12 &&
                      std::abs(v.covariance - 0.18) < 1e-12;
    report.instances.push_back({"reference_0.6_0.7",
                                pass,
                                {{"var_coupled", v.var_coupled},
                                 {"var_independent", v.var_independent},
                                 {"covariance", v.covariance}}});
  }
  for (std::uint32_t i = 0; i < 100; ++i) {
    KeyedStream rng = instance_stream(opts, 2, i);
    const double p = rng.next_uniform(0.02, 0.98);
    double q = rng.next_uniform(0.02, 0.98);
    if (q == p) q = 0.5 * (p + 0.5);
    const auto v = oracle::closed_form_variances({p, q});
    const double identity = v.var_independent - v.var_coupled - 2.0 * v.covariance;
    const bool pass = v.var_coupled < v.var_independent && std::abs(identity) < 1e-12;
    report.instances.push_back({"instance_" + std::to_string(i),
                                pass,
                                {{"p_m", p},
                                 {"p_m_prime", q},
                                 {"var_coupled", v.var_coupled},
                                 {"var_independent", v.var_independent},
                                 {"covariance", v.covariance},
                                 {"identity_residual", identity}}});
  }
  report.pass = all_pass(report.instances);
  report.summary = {{"criterion", "exact var_coupled < var_independent for p != p'"}};
  return report;
}

SuiteReport verify_prop4(const SuiteOptions& opts) {
  const std::size_t n = replicates_or_default(opts);
  SuiteReport report{"prop4", false, {}, {}};
  for (std::uint32_t i = 0; i < 25; ++i) {
    KeyedStream rng = instance_stream(opts, 4, i);
    const oracle::TwoTokenInstance inst{rng.next_uniform(0.05, 0.95), rng.next_uniform(0.05, 0.95)};
    const auto closed = oracle::closed_form_win_rates(inst);
    const auto two = oracle::make_two_token_setup(inst);
    const auto coupled = oracle::mc_reference(two.m, two.m_prime, two.setup, Coupling::Coupled, n, opts.seed + i,
                                              opts.threads);
    const auto independent = oracle::mc_reference(two.m, two.m_prime, two.setup, Coupling::Independent, n,
                                                  opts.seed + i, opts.threads);
    bool pass = true;
    json stats = {{"p_m", inst.p_m}, {"p_m_prime", inst.p_m_prime}, {"replicates", n}};
    auto check = [&](const char* name, double expected, double observed) {
      const double se = std::sqrt(expected * (1.0 - expected) / static_cast<double>(n));
      const double z = se > 0.0 ? (observed - expected) / se : (observed == expected ? 0.0 : INFINITY);
      const bool ok = std::abs(z) <= 4.0;
      pass = pass && ok;
      stats[name] = {{"closed_form", expected}, {"monte_carlo", observed}, {"z", ok ? json(z) : json(nullptr)}};
    };
    check("coupled_win_m", closed.coupled.win_m, coupled.win_rate.value);
    check("coupled_win_m_prime", closed.coupled.win_m_prime, coupled.loss_rate.value);
    check("independent_win_m", closed.independent.win_m, independent.win_rate.value);
    check("independent_win_m_prime", closed.independent.win_m_prime, independent.loss_rate.value);
    report.instances.push_back({"instance_" + std::to_string(i), pass, std::move(stats)});
  }
  report.pass = all_pass(report.instances);
  report.summary = {{"criterion", "Monte Carlo within 4 SE of closed forms for every statistic"}};
  return report;
}

SuiteReport verify_prop5(const SuiteOptions& opts) {
  const std::size_t n = replicates_or_default(opts);
  SuiteReport report{"prop5", false, {}, {}};
  for (std::uint32_t i = 0; i < 20; ++i) {
    KeyedStream rng = instance_stream(opts, 5, i);
    const std::size_t size = 3 + i % 3;  // 3..5 tokens including eos
    const Vocabulary vocab(size, TokenId{static_cast<std::uint32_t>(size - 1)});
    const NamedModel base{"m", random_categorical_model(rng, vocab, 1, 0.05)};
    const double eps = rng.next_uniform(0.01, 0.05);
    const NamedModel near{"m_prime", perturb(base.spec, eps, 5000 + i)};

    // Distinct rewards per content token.
    std::map<std::pair<PromptId, std::vector<TokenId>>, double> rewards;
    for (std::size_t t = 0; t + 1 < size; ++t) {
      rewards[{PromptId{0}, {TokenId{static_cast<std::uint32_t>(t)}}}] =
          static_cast<double>(t) + rng.next_uniform(0.1, 0.9);
    }
    const ExperimentSetup setup{PromptSet::uniform({PromptId{0}}), Scorer::reward_table(rewards),
                                GenerationConfig{2, 1.0, Sampler::GumbelMax}};
    const NoiseSource noise(opts.seed + i);
    const double tol = setup.scorer.default_tolerance();
    const auto tie_c = win_tie_rates(collect_pairs(base, near, setup, Coupling::Coupled, n, noise, opts.threads), tol);
    const auto tie_i =
        win_tie_rates(collect_pairs(base, near, setup, Coupling::Independent, n, noise, opts.threads), tol);
    const double dn = static_cast<double>(n);
    const double se = std::sqrt(tie_c.tie_rate * (1.0 - tie_c.tie_rate) / dn +
                                tie_i.tie_rate * (1.0 - tie_i.tie_rate) / dn);
    const double gap = tie_c.tie_rate - tie_i.tie_rate;
    const bool pass = gap > 3.0 * se;
    report.instances.push_back({"instance_" + std::to_string(i),
                                pass,
                                {{"vocabulary_size", size},
                                 {"epsilon", eps},
                                 {"distance", model_distance(base.spec, near.spec, setup.prompts)},
                                 {"tie_coupled", tie_c.tie_rate},
                                 {"tie_independent", tie_i.tie_rate},
                                 {"combined_se", se},
                                 {"replicates", n}}});
  }
  report.pass = report.passed() >= 18;
  report.summary = {{"criterion", "coupled tie rate exceeds independent by > 3 SE in >= 18 of 20 instances"},
                    {"required", 18}};
  return report;
}

SuiteReport verify_stability(const SuiteOptions& opts) {
  const std::size_t n = replicates_or_default(opts);
  SuiteReport report{"stability", false, {}, {}};
  std::uint64_t gumbel_violations = 0;

  // Two-token pairs, p_m <= p_m': m must never get t+ while m' gets t-.
  for (std::uint32_t i = 0; i < 20; ++i) {
    KeyedStream rng = instance_stream(opts, 6, i);
    const double p = rng.next_uniform(0.05, 0.95);
    const double q = rng.next_uniform(p, 0.95);
    const auto two = oracle::make_two_token_setup({p, q});
    const auto pairs =
        collect_pairs(two.m, two.m_prime, two.setup, Coupling::Coupled, n, NoiseSource(opts.seed + i), opts.threads);
    std::uint64_t events = 0;
    for (const auto& r : pairs.records) events += (r.score_a == 1.0 && r.score_b == 0.0) ? 1 : 0;
    gumbel_violations += events;
    report.instances.push_back({"gumbel_two_token_" + std::to_string(i),
                                events == 0,
                                {{"p_m", p}, {"p_m_prime", q}, {"trials", n}, {"violations", events}}});
  }

  // Larger vocabularies: check the stability implication draw by draw.
  for (std::uint32_t i = 0; i < 10; ++i) {
    KeyedStream rng = instance_stream(opts, 7, i);
    const std::size_t size = 3 + i % 3;
    std::vector<std::size_t> all(size);
    std::iota(all.begin(), all.end(), 0);
    const NextTokenDistribution d(random_simplex(rng, size, all));
    const NextTokenDistribution d_prime(random_simplex(rng, size, all));
    const NoiseSource noise(opts.seed + 100 + i);
    const std::size_t trials = std::max<std::size_t>(n / 10, 1000);
    std::uint64_t events = 0;
    for (std::size_t r = 0; r < trials; ++r) {
      const auto block = noise.block({0, ReplicateStream::coupled(static_cast<std::uint32_t>(r)), 1}, size);
      if (violates_stability(d, d_prime, gumbel_max_sample(d, block), gumbel_max_sample(d_prime, block))) ++events;
    }
    gumbel_violations += events;
    report.instances.push_back(
        {"gumbel_general_" + std::to_string(i), events == 0, {{"vocabulary_size", size}, {"trials", trials}, {"violations", events}}});
  }

  const auto violation = search_inverse_transform_violation();
  json found = nullptr;
  if (violation) {
    found = {{"d", violation->d},
             {"d_prime", violation->d_prime},
             {"u", violation->u},
             {"t1", index_of(violation->t1)},
             {"t2", index_of(violation->t2)}};
  }
  report.instances.push_back({"inverse_transform_search", violation.has_value(), {{"violation", found}}});

  report.pass = all_pass(report.instances);
  report.summary = {{"gumbel_max_violations", gumbel_violations},
                    {"inverse_transform_violation_found", violation.has_value()}};
  return report;
}

SuiteReport verify_marginals(const SuiteOptions& opts) {
  const std::size_t n = replicates_or_default(opts);
  SuiteReport report{"marginals", false, {}, {}};
  std::uint32_t index = 0;
  for (std::size_t size = 3; size <= 8; ++size) {
    for (Sampler sampler : {Sampler::GumbelMax, Sampler::InverseTransform}) {
      KeyedStream rng = instance_stream(opts, 8, index);
      const Vocabulary vocab(size, TokenId{static_cast<std::uint32_t>(size - 1)});
      const std::vector<ModelSpec> models{random_categorical_model(rng, vocab, 1, 0.0),
                                          random_categorical_model(rng, vocab, 1, 0.0)};
      const GenerationConfig cfg{2, 1.0, sampler};
      const NoiseSource noise(opts.seed + index);

      // counts[regime][model][token]
      std::vector<std::vector<std::vector<std::uint64_t>>> counts(
          2, std::vector<std::vector<std::uint64_t>>(2, std::vector<std::uint64_t>(size, 0)));
      for (int regime = 0; regime < 2; ++regime) {
        const Coupling coupling = regime == 0 ? Coupling::Coupled : Coupling::Independent;
        for (std::size_t r = 0; r < n; ++r) {
          const auto seqs = generate_all(coupling, models, PromptId{0}, static_cast<std::uint32_t>(r), noise, cfg);
          for (std::size_t j = 0; j < 2; ++j) ++counts[regime][j][index_of(seqs[j].tokens.front())];
        }
      }
      json tv = json::array();
      bool pass = true;
      for (std::size_t j = 0; j < 2; ++j) {
        double distance = 0.0;
        for (std::size_t t = 0; t < size; ++t) {
          distance += std::abs(static_cast<double>(counts[0][j][t]) - static_cast<double>(counts[1][j][t]));
        }
        distance *= 0.5 / static_cast<double>(n);
        tv.push_back(distance);
        pass = pass && distance < 0.02;
      }
      report.instances.push_back({"size_" + std::to_string(size) + "_" + std::string(to_string(sampler)),
                                  pass,
                                  {{"vocabulary_size", size}, {"tv_distance", tv}, {"replicates", n}}});
      ++index;
    }
  }
  report.pass = all_pass(report.instances);
  report.summary = {{"criterion", "TV distance < 0.02 for every model"}};
  return report;
}

const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names{"prop1", "prop2", "prop4", "prop5", "stability", "marginals"};
  return names;
}

std::optional<SuiteReport> run_suite(std::string_view name, const SuiteOptions& opts) {
  if (name == "prop1") return verify_prop1(opts);
  if (name == "prop2") return verify_prop2(opts);
  if (name == "prop4") return verify_prop4(opts);
  if (name == "prop5") return verify_prop5(opts);
  if (name == "stability") return verify_stability(opts);
  if (name == "marginals") return verify_marginals(opts);
  return std::nullopt;
}

}  // namespace cagen::suites
