#include <doctest.h>

#include <cmath>

#include "cagen/errors.hpp"
#include "cagen/noise.hpp"
#include "cagen/scoring.hpp"

using namespace cagen;

namespace {

TokenSequence seq(std::vector<std::uint32_t> ids, bool terminated) {
  TokenSequence s;
  for (auto i : ids) s.tokens.push_back(TokenId{i});
  s.terminated = terminated;
  return s;
}

Scorer accept_a() { return Scorer::correctness({{PromptId{0}, {{TokenId{0}}}}}); }

}  // namespace

TEST_CASE("correctness scorer") {
  const auto s = accept_a();
  CHECK(s.is_binary());
  CHECK(s.default_tolerance() == 0.0);
  CHECK(score(s, PromptId{0}, seq({0, 2}, true), 0) == 1.0);
  CHECK(score(s, PromptId{0}, seq({1, 2}, true), 0) == 0.0);
  CHECK(score(s, PromptId{0}, seq({0}, false), 0) == 1.0);
  CHECK(score(s, PromptId{7}, seq({0, 2}, true), 0) == 0.0);
}

TEST_CASE("reward table scorer") {
  const auto s = Scorer::reward_table({{{PromptId{0}, {TokenId{1}}}, 0.25}, {{PromptId{0}, {TokenId{1}, TokenId{0}}}, 2.0}});
  CHECK_FALSE(s.is_binary());
  CHECK(s.default_tolerance() == 1e-12);
  CHECK(score(s, PromptId{0}, seq({1, 2}, true), 0) == 0.25);
  CHECK(score(s, PromptId{0}, seq({1, 0}, false), 0) == 2.0);
  CHECK(score(s, PromptId{0}, seq({0, 2}, true), 0) == 0.0);
}

TEST_CASE("noisy scorer") {
  const auto base = accept_a();
  const auto zero = Scorer::noisy(base, 0.0, 3);
  for (std::uint64_t z = 0; z < 50; ++z) {
    CHECK(score(zero, PromptId{0}, seq({0, 2}, true), z) == score(base, PromptId{0}, seq({0, 2}, true), z));
    CHECK(score(zero, PromptId{0}, seq({1, 2}, true), z) == score(base, PromptId{0}, seq({1, 2}, true), z));
  }
  const auto noisy = Scorer::noisy(base, 0.5, 3);
  CHECK_FALSE(noisy.is_binary());
  CHECK(score(noisy, PromptId{0}, seq({0, 2}, true), 9) == score(noisy, PromptId{0}, seq({0, 2}, true), 9));
  CHECK(score(noisy, PromptId{0}, seq({0, 2}, true), 9) != score(noisy, PromptId{0}, seq({0, 2}, true), 10));

  double sum = 0.0, sum2 = 0.0;
  const int n = 100000;
  for (int z = 0; z < n; ++z) {
    const double e = score(noisy, PromptId{0}, seq({1, 2}, true), static_cast<std::uint64_t>(z));
    sum += e;
    sum2 += e * e;
  }
  CHECK(std::abs(sum / n) < 4.0 * 0.5 / std::sqrt(n));
  CHECK(sum2 / n == doctest::Approx(0.25).epsilon(0.02));
  CHECK_THROWS(Scorer::noisy(base, -1.0, 0));
}

TEST_CASE("scorer keys follow the lanes") {
  CHECK(z_key_for(ReplicateStream::coupled(7)) == 7);
  CHECK(z_key_for(ReplicateStream::independent(7, 0)) != z_key_for(ReplicateStream::independent(7, 1)));
}

TEST_CASE("compare examples") {
  CHECK(compare(1.0, 0.0, 0.0) == PairwiseOutcome::Win);
  CHECK(compare(0.0, 1.0, 0.0) == PairwiseOutcome::Loss);
  CHECK(compare(0.5, 0.5, 0.0) == PairwiseOutcome::Tie);
  CHECK(compare(0.5 + 5e-13, 0.5, 1e-12) == PairwiseOutcome::Tie);
  CHECK(compare(0.5 + 5e-12, 0.5, 1e-12) == PairwiseOutcome::Win);
  CHECK_THROWS_AS(compare(0.0, 0.0, -1.0), DomainError);
}

// Property: swapping the arguments swaps Win and Loss.
TEST_CASE("compare is antisymmetric") {
  KeyedStream rng(NoiseSource(1), NoiseKey{});
  for (int i = 0; i < 10000; ++i) {
    const double a = std::round(rng.next_uniform() * 20) / 20;
    const double b = std::round(rng.next_uniform() * 20) / 20;
    const double tol = rng.next_uniform() < 0.5 ? 0.0 : 0.06;
    const auto ab = compare(a, b, tol);
    const auto ba = compare(b, a, tol);
    if (ab == PairwiseOutcome::Tie) {
      REQUIRE(ba == PairwiseOutcome::Tie);
    } else {
      REQUIRE(ba == (ab == PairwiseOutcome::Win ? PairwiseOutcome::Loss : PairwiseOutcome::Win));
    }
  }
}
