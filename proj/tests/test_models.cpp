#include <doctest.h>

#include <cmath>

#include "cagen/errors.hpp"
#include "cagen/models.hpp"
#include "cagen/noise.hpp"
#include "cagen/suites.hpp"

using namespace cagen;

namespace {

const Vocabulary kVocab(3, TokenId{2});

NextTokenDistribution dist(std::vector<double> p) { return NextTokenDistribution(std::move(p)); }

TokenSequence partial(std::vector<std::uint32_t> ids) {
  TokenSequence s;
  for (auto i : ids) s.tokens.push_back(TokenId{i});
  return s;
}

}  // namespace

TEST_CASE("prompt set") {
  const PromptSet p({{PromptId{3}, 1.0}, {PromptId{5}, 3.0}});
  CHECK(p.weight(PromptId{5}) == doctest::Approx(0.75));
  CHECK(p.draw(0.2) == PromptId{3});
  CHECK(p.draw(0.25) == PromptId{3});
  CHECK(p.draw(0.26) == PromptId{5});
  CHECK_THROWS_AS(p.weight(PromptId{4}), LookupError);
  CHECK_THROWS(PromptSet({{PromptId{1}, 1.0}, {PromptId{1}, 1.0}}));
  CHECK_THROWS(PromptSet({{PromptId{1}, -1.0}, {PromptId{2}, 2.0}}));
  CHECK_THROWS(PromptSet({{PromptId{1}, 0.0}}));
}

TEST_CASE("point mass rows") {
  const auto m = ModelSpec::point_mass(kVocab, {{PromptId{0}, TokenId{1}}});
  const auto d = m.next_token_distribution(PromptId{0}, partial({}));
  CHECK(d[TokenId{1}] == 1.0);
  CHECK_THROWS_AS(m.next_token_distribution(PromptId{9}, partial({})), LookupError);
}

TEST_CASE("categorical rows are single-step") {
  const auto m = ModelSpec::categorical(kVocab, {{PromptId{0}, dist({0.4, 0.6, 0.0})}});
  CHECK(m.next_token_distribution(PromptId{0}, partial({})) == dist({0.4, 0.6, 0.0}));
  CHECK(m.next_token_distribution(PromptId{0}, partial({1}))[TokenId{2}] == 1.0);
  CHECK_THROWS_AS(ModelSpec::categorical(kVocab, {{PromptId{0}, dist({0.4, 0.4, 0.2})}}), ConfigError);
}

TEST_CASE("markov rows follow the last token") {
  const auto m = ModelSpec::markov(kVocab, {{PromptId{0}, dist({0.5, 0.5, 0.0})}},
                                   {{TokenId{0}, dist({0.2, 0.8, 0.0})}, {TokenId{1}, dist({0.0, 0.0, 1.0})}});
  CHECK(m.next_token_distribution(PromptId{0}, partial({1, 0})) == dist({0.2, 0.8, 0.0}));
  CHECK(m.next_token_distribution(PromptId{0}, partial({})) == dist({0.5, 0.5, 0.0}));
  TokenSequence done = partial({1, 2});
  done.terminated = true;
  CHECK_THROWS_AS(m.next_token_distribution(PromptId{0}, done), DomainError);
  CHECK_THROWS_AS(ModelSpec::markov(kVocab, {{PromptId{0}, dist({0.5, 0.5, 0.0})}},
                                    {{TokenId{0}, dist({0.2, 0.8, 0.0})}}),
                  ConfigError);
}

TEST_CASE("sequence table with fallback") {
  const auto m = ModelSpec::sequence_table(kVocab, {{{PromptId{0}, {TokenId{0}}}, dist({0.0, 0.0, 1.0})}});
  CHECK(m.next_token_distribution(PromptId{0}, partial({0}))[TokenId{2}] == 1.0);
  CHECK(m.next_token_distribution(PromptId{0}, partial({1}))[TokenId{0}] == doctest::Approx(0.5));
}

TEST_CASE("perturb examples") {
  const PromptSet prompts = PromptSet::uniform({PromptId{0}});
  const auto m = ModelSpec::categorical(kVocab, {{PromptId{0}, dist({0.6, 0.4, 0.0})}});
  CHECK(model_distance(m, perturb(m, 0.0, 3), prompts) == 0.0);
  CHECK_THROWS_AS(perturb(m, -0.1, 0), DomainError);
  CHECK_THROWS_AS(perturb(m, 1.1, 0), DomainError);

  // eps = 1 replaces the row by the direction r; mixing at 0.1 with the same r
  // lands on (1 - 0.1) d + 0.1 r.
  const auto full = perturb(m, 1.0, 5).next_token_distribution(PromptId{0}, partial({}));
  const auto tenth = perturb(m, 0.1, 5).next_token_distribution(PromptId{0}, partial({}));
  CHECK(full[TokenId{2}] == 0.0);
  CHECK(tenth[TokenId{0}] == doctest::Approx(0.9 * 0.6 + 0.1 * full[TokenId{0}]).epsilon(1e-12));

  const auto half = ModelSpec::categorical(kVocab, {{PromptId{0}, dist({0.5, 0.5, 0.0})}});
  const double mixed = 0.9 * 0.6 + 0.1 * 0.5;
  CHECK(mixed == doctest::Approx(0.59));
  CHECK(model_distance(m, ModelSpec::categorical(kVocab, {{PromptId{0}, dist({mixed, 1 - mixed, 0.0})}}), prompts) ==
        doctest::Approx(0.01));
  CHECK(model_distance(m, half, prompts) == doctest::Approx(0.1));
}

TEST_CASE("model distance") {
  const PromptSet prompts = PromptSet::uniform({PromptId{0}});
  const auto a = ModelSpec::categorical(kVocab, {{PromptId{0}, dist({0.6, 0.4, 0.0})}});
  const auto b = ModelSpec::categorical(kVocab, {{PromptId{0}, dist({0.7, 0.3, 0.0})}});
  CHECK(model_distance(a, a, prompts) == 0.0);
  CHECK(model_distance(a, b, prompts) == doctest::Approx(0.1));
  const auto other = ModelSpec::categorical(Vocabulary(4, TokenId{3}), {{PromptId{0}, dist({0.6, 0.4, 0.0, 0.0})}});
  CHECK_THROWS_AS(model_distance(a, other, prompts), ConfigError);
}

// Property: the mixture bound holds for every seed and every row.
TEST_CASE("perturbation stays within eps") {
  const Vocabulary vocab(4, TokenId{3});
  const PromptSet prompts = PromptSet::uniform({PromptId{0}, PromptId{1}});
  KeyedStream rng(NoiseSource(5, NoiseDomain::Instances), NoiseKey{});
  for (std::uint64_t trial = 0; trial < 1000; ++trial) {
    const auto base = suites::random_markov_model(rng, vocab, 2, 0.2);
    const double eps = rng.next_uniform(0.0, 0.2);
    const auto p = perturb(base, eps, trial);
    REQUIRE(model_distance(base, p, prompts) <= eps + 1e-12);
  }
}

TEST_CASE("random instance generators") {
  KeyedStream rng(NoiseSource(11, NoiseDomain::Instances), NoiseKey{});
  const auto s = suites::random_simplex(rng, 5, {0, 2, 3});
  CHECK(s[1] == 0.0);
  CHECK(s[4] == 0.0);
  CHECK(s[0] + s[2] + s[3] == doctest::Approx(1.0));
  const Vocabulary vocab(5, TokenId{4});
  const auto m = suites::random_categorical_model(rng, vocab, 3, 0.05);
  for (std::uint32_t q = 0; q < 3; ++q) {
    const auto d = m.next_token_distribution(PromptId{q}, TokenSequence{});
    for (std::uint32_t t = 0; t < 4; ++t) CHECK(d[TokenId{t}] >= 0.05 - 1e-12);
  }
}
