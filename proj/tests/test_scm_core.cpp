#include <doctest.h>

#include <cmath>
#include <set>

#include "cagen/errors.hpp"
#include "cagen/generation.hpp"
#include "cagen/models.hpp"
#include "cagen/noise.hpp"
#include "cagen/sampler.hpp"
#include "cagen/types.hpp"

using namespace cagen;

namespace {

NoiseBlock with_gumbels(std::vector<double> g) { return NoiseBlock{std::move(g), 0.5}; }

NextTokenDistribution dist(std::vector<double> p) { return NextTokenDistribution(std::move(p)); }

}  // namespace

TEST_SUITE("types") {
  TEST_CASE("vocabulary validation") {
    CHECK_THROWS_AS(Vocabulary(1, TokenId{0}), ConfigError);
    CHECK_THROWS_AS(Vocabulary(3, TokenId{3}), ConfigError);
    const Vocabulary v(3, TokenId{2});
    CHECK(v.contains(TokenId{2}));
    CHECK_FALSE(v.contains(TokenId{3}));
  }

  TEST_CASE("distribution validation and renormalization") {
    CHECK_THROWS_AS(dist({0.0, 0.0}), InvalidDistribution);
    CHECK_THROWS_AS(dist({-0.1, 1.1}), InvalidDistribution);
    CHECK_THROWS_AS(dist({0.5, NAN}), InvalidDistribution);
    CHECK_THROWS_AS(dist({0.5, 0.4}), InvalidDistribution);
    const auto d = dist({0.5, 0.5 + 5e-7});
    double sum = 0.0;
    for (double p : d.probs()) sum += p;
    CHECK(std::abs(sum - 1.0) <= NextTokenDistribution::kSumTolerance);
    CHECK(NextTokenDistribution::point_mass(3, TokenId{1})[TokenId{1}] == 1.0);
    CHECK(NextTokenDistribution::uniform(4)[TokenId{3}] == doctest::Approx(0.25));
  }

  TEST_CASE("sequence content strips eos") {
    TokenSequence s{{TokenId{1}, TokenId{2}}, true};
    CHECK(s.length() == 2);
    CHECK(s.content().size() == 1);
    CHECK(to_string(s.tokens) == "[1,2]");
  }
}

TEST_SUITE("noise") {
  // Known-answer vectors of the Random123 reference implementation.
  TEST_CASE("philox4x32-10 known answers") {
    CHECK(philox4x32_10({0, 0, 0, 0}, {0, 0}) == PhiloxCounter{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
          PhiloxCounter{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
          PhiloxCounter{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
  }

  TEST_CASE("open unit mapping stays inside (0,1)") {
    CHECK(to_open_unit(0) > 0.0);
    CHECK(to_open_unit(~std::uint64_t{0}) < 1.0);
    CHECK(1.0 - to_open_unit(~std::uint64_t{0}) == 0x1.0p-53);
  }

  TEST_CASE("noise is a pure function of its key") {
    const NoiseSource a(42), b(42), c(43);
    const NoiseKey key{3, ReplicateStream::coupled(17), 2};
    CHECK(a.uniform(key, 5) == b.uniform(key, 5));
    CHECK(a.uniform(key, 5) != c.uniform(key, 5));
    CHECK(a.uniform(key, 5) != a.with_domain(NoiseDomain::Oracle).uniform(key, 5));
    const auto blk = a.block(key, 4);
    CHECK(blk.gumbels.size() == 4);
    CHECK(blk.gumbels[2] == a.gumbel(key, 2));
    CHECK(blk.uniform == a.uniform(key, 4));
  }

  TEST_CASE("coupled and independent lanes are disjoint") {
    const NoiseSource s(1);
    std::set<double> seen;
    for (std::uint32_t r = 0; r < 50; ++r) {
      for (auto stream : {ReplicateStream::coupled(r), ReplicateStream::independent(r, 0),
                          ReplicateStream::independent(r, 1)}) {
        CHECK(seen.insert(s.uniform({0, stream, 1}, 0)).second);
      }
    }
    CHECK(ReplicateStream::independent(5, 0) != ReplicateStream::coupled(5));
  }

  TEST_CASE("uniform and gumbel moments") {
    const NoiseSource s(2024);
    const int n = 200000;
    double su = 0.0, sg = 0.0, sn = 0.0, sn2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const NoiseKey key{0, {static_cast<std::uint32_t>(i), 0}, 1};
      su += s.uniform(key, 0);
      sg += s.gumbel(key, 1);
      const double z = s.normal(key, 2);
      sn += z;
      sn2 += z * z;
    }
    CHECK(su / n == doctest::Approx(0.5).epsilon(0.005));
    CHECK(sg / n == doctest::Approx(0.5772156649).epsilon(0.01));
    CHECK(std::abs(sn / n) < 0.01);
    CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.01));
  }

  TEST_CASE("keyed stream integers stay in range") {
    KeyedStream rng(NoiseSource(9), NoiseKey{});
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) {
      const auto k = rng.next_below(7);
      REQUIRE(k < 7);
      ++counts[k];
    }
    for (int c : counts) CHECK(std::abs(c - 10000) < 500);
  }
}

TEST_SUITE("sampler") {
  TEST_CASE("gumbel-max examples") {
    CHECK(gumbel_max_sample(dist({1.0, 0.0}), with_gumbels({-5.0, 50.0})) == TokenId{0});
    CHECK(gumbel_max_sample(dist({0.5, 0.5}), with_gumbels({0.9, 0.1})) == TokenId{0});
    CHECK(gumbel_max_sample(dist({0.1, 0.9}), with_gumbels({2.302585, 0.0})) == TokenId{0});
    CHECK(gumbel_max_sample(dist({0.1, 0.9}), with_gumbels({2.1, 0.0})) == TokenId{1});
  }

  TEST_CASE("gumbel-max ties go to the lowest index") {
    CHECK(gumbel_max_sample(dist({0.5, 0.5}), with_gumbels({0.3, 0.3})) == TokenId{0});
  }

  TEST_CASE("gumbel-max errors") {
    CHECK_THROWS_AS(gumbel_max_sample(dist({0.5, 0.5}), with_gumbels({0.1})), DomainError);
  }

  TEST_CASE("inverse transform examples") {
    const auto d = dist({0.3, 0.7});
    CHECK(inverse_transform_sample(d, 0.2) == TokenId{0});
    CHECK(inverse_transform_sample(d, 0.3) == TokenId{0});
    CHECK(inverse_transform_sample(d, 0.31) == TokenId{1});
    CHECK(inverse_transform_sample(dist({0.5, 0.5, 0.0}), 1.0 - 1e-16) == TokenId{1});
    CHECK_THROWS_AS(inverse_transform_sample(d, 0.0), DomainError);
    CHECK_THROWS_AS(inverse_transform_sample(d, 1.0), DomainError);
  }

  TEST_CASE("temperature examples") {
    const auto d = dist({0.9, 0.1});
    CHECK(temperature_scale(d, 1.0) == d);
    const auto sym = temperature_scale(dist({0.5, 0.5}), 0.3);
    CHECK(sym[TokenId{0}] == doctest::Approx(0.5));
    const auto sharp = temperature_scale(d, 0.5);
    CHECK(sharp[TokenId{0}] == doctest::Approx(0.9878048780487806).epsilon(1e-12));
    CHECK(sharp[TokenId{1}] == doctest::Approx(0.012195121951219513).epsilon(1e-12));
    CHECK(temperature_scale(dist({0.7, 0.0, 0.3}), 2.0)[TokenId{1}] == 0.0);
    CHECK_THROWS_AS(temperature_scale(d, 0.0), DomainError);
  }

  TEST_CASE("sampler names round-trip") {
    for (Sampler s : {Sampler::GumbelMax, Sampler::InverseTransform}) CHECK(parse_sampler(to_string(s)) == s);
    CHECK_FALSE(parse_sampler("greedy").has_value());
  }

  // Property: both samplers draw from d (4-sigma per-token bands).
  TEST_CASE("sampler marginals match the distribution") {
    const NoiseSource noise(77);
    const auto d = dist({0.05, 0.2, 0.0, 0.45, 0.3});
    const int n = 100000;
    for (Sampler sampler : {Sampler::GumbelMax, Sampler::InverseTransform}) {
      std::vector<int> counts(5, 0);
      for (int i = 0; i < n; ++i) {
        ++counts[index_of(sample(sampler, d, noise.block({0, {static_cast<std::uint32_t>(i), 0}, 1}, 5)))];
      }
      CHECK(counts[2] == 0);
      for (std::uint32_t t = 0; t < 5; ++t) {
        const double p = d[TokenId{t}];
        CHECK(std::abs(counts[t] / double(n) - p) <= 4.0 * std::sqrt(p * (1 - p) / n) + 1e-12);
      }
    }
  }
}

TEST_SUITE("generation") {
  const Vocabulary vocab(3, TokenId{2});

  ModelSpec never_stops() {
    return ModelSpec::markov(vocab, {{PromptId{0}, dist({0.5, 0.5, 0.0})}},
                             {{TokenId{0}, dist({0.5, 0.5, 0.0})}, {TokenId{1}, dist({0.5, 0.5, 0.0})}});
  }

  TEST_CASE("deterministic model emits token then eos") {
    const auto m = ModelSpec::point_mass(vocab, {{PromptId{0}, TokenId{1}}});
    const auto seq = generate(m, PromptId{0}, ReplicateStream::coupled(0), NoiseSource(1), {5, 1.0, Sampler::GumbelMax});
    CHECK(seq.tokens.size() >= 1);
    const auto cat = ModelSpec::categorical(vocab, {{PromptId{0}, NextTokenDistribution::point_mass(3, TokenId{1})}});
    const auto s2 = generate(cat, PromptId{0}, ReplicateStream::coupled(0), NoiseSource(1), {5, 1.0, Sampler::GumbelMax});
    CHECK(s2.tokens == std::vector<TokenId>{TokenId{1}, TokenId{2}});
    CHECK(s2.terminated);
    CHECK(s2.length() == 2);
  }

  TEST_CASE("model that never emits eos runs exactly K steps") {
    const auto seq = generate(never_stops(), PromptId{0}, ReplicateStream::coupled(3), NoiseSource(5),
                              {7, 1.0, Sampler::GumbelMax});
    CHECK(seq.length() == 7);
    CHECK_FALSE(seq.terminated);
  }

  TEST_CASE("generation is deterministic") {
    const NoiseSource noise(99);
    for (std::uint32_t r = 0; r < 20; ++r) {
      CHECK(generate(never_stops(), PromptId{0}, {r, 1}, noise, {6, 0.7, Sampler::GumbelMax}) ==
            generate(never_stops(), PromptId{0}, {r, 1}, noise, {6, 0.7, Sampler::GumbelMax}));
    }
  }

  TEST_CASE("config validation") {
    CHECK_THROWS_AS((GenerationConfig{0, 1.0, Sampler::GumbelMax}.validate()), ConfigError);
    CHECK_THROWS_AS((GenerationConfig{1, 0.0, Sampler::GumbelMax}.validate()), ConfigError);
  }

  TEST_CASE("identical models agree under coupling") {
    const std::vector<ModelSpec> models{never_stops(), never_stops()};
    const NoiseSource noise(8);
    for (std::uint32_t r = 0; r < 100; ++r) {
      const auto out = generate_coupled(models, PromptId{0}, r, noise, {4, 1.0, Sampler::GumbelMax});
      CHECK(out[0] == out[1]);
    }
  }

  TEST_CASE("coupled two-token models are monotone") {
    const std::vector<ModelSpec> models{
        ModelSpec::categorical(vocab, {{PromptId{0}, dist({0.6, 0.4, 0.0})}}),
        ModelSpec::categorical(vocab, {{PromptId{0}, dist({0.7, 0.3, 0.0})}})};
    const NoiseSource noise(12);
    for (std::uint32_t r = 0; r < 20000; ++r) {
      const auto out = generate_coupled(models, PromptId{0}, r, noise, {2, 1.0, Sampler::GumbelMax});
      if (out[0].tokens[0] == TokenId{0}) REQUIRE(out[1].tokens[0] == TokenId{0});
    }
  }

  TEST_CASE("disjoint supports ignore the noise") {
    const std::vector<ModelSpec> models{
        ModelSpec::categorical(vocab, {{PromptId{0}, dist({1.0, 0.0, 0.0})}}),
        ModelSpec::categorical(vocab, {{PromptId{0}, dist({0.0, 1.0, 0.0})}})};
    const NoiseSource noise(4);
    for (std::uint32_t r = 0; r < 100; ++r) {
      for (Coupling c : {Coupling::Coupled, Coupling::Independent}) {
        const auto out = generate_all(c, models, PromptId{0}, r, noise, {2, 1.0, Sampler::GumbelMax});
        CHECK(out[0].tokens[0] == TokenId{0});
        CHECK(out[1].tokens[0] == TokenId{1});
      }
    }
  }

  TEST_CASE("identical models disagree half the time when independent") {
    const auto m = ModelSpec::categorical(vocab, {{PromptId{0}, dist({0.5, 0.5, 0.0})}});
    const std::vector<ModelSpec> models{m, m};
    const NoiseSource noise(31);
    const int n = 100000;
    int disagree = 0;
    for (int r = 0; r < n; ++r) {
      const auto out = generate_independent(models, PromptId{0}, static_cast<std::uint32_t>(r), noise,
                                            {2, 1.0, Sampler::GumbelMax});
      disagree += out[0] != out[1];
    }
    CHECK(std::abs(disagree / double(n) - 0.5) < 3.0 * std::sqrt(0.25 / n));
  }

  TEST_CASE("vocabulary mismatch is a configuration error") {
    const std::vector<ModelSpec> models{
        ModelSpec::point_mass(vocab, {{PromptId{0}, TokenId{0}}}),
        ModelSpec::point_mass(Vocabulary(4, TokenId{3}), {{PromptId{0}, TokenId{0}}})};
    CHECK_THROWS_AS(generate_coupled(models, PromptId{0}, 0, NoiseSource(1), {}), ConfigError);
  }

  TEST_CASE("stream assignment") {
    CHECK(stream_for(Coupling::Coupled, 4, 1) == ReplicateStream{4, 0});
    CHECK(stream_for(Coupling::Independent, 4, 1) == ReplicateStream{4, 2});
  }
}
