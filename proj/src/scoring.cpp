#include "cagen/scoring.hpp"

#include <cmath>

#include "cagen/errors.hpp"

namespace cagen {

std::string_view to_string(PairwiseOutcome o) noexcept {
  switch (o) {
    case PairwiseOutcome::Win:
      return "win";
    case PairwiseOutcome::Loss:
      return "loss";
    case PairwiseOutcome::Tie:
      return "tie";
  }
  return "unknown";
}

Scorer::Scorer(Variant variant) : variant_(std::move(variant)) {
  if (const auto* c = std::get_if<CorrectnessScorer>(&variant_)) {
    for (const auto& [prompt, set] : c->accepted) {
      if (set.empty()) throw ConfigError("correctness scorer has an empty accepted set for a prompt");
    }
  } else if (const auto* r = std::get_if<RewardTableScorer>(&variant_)) {
    for (const auto& [key, value] : r->rewards) {
      if (!std::isfinite(value)) throw ConfigError("reward table has a non-finite entry");
    }
  } else if (const auto* n = std::get_if<NoisyScorer>(&variant_)) {
    if (!n->base) throw ConfigError("noisy scorer needs a base scorer");
    if (!(n->scale >= 0.0) || !std::isfinite(n->scale)) throw ConfigError("noise scale must be non-negative");
  }
}

Scorer Scorer::correctness(std::map<PromptId, std::set<std::vector<TokenId>>> accepted) {
  return Scorer(CorrectnessScorer{std::move(accepted)});
}

Scorer Scorer::reward_table(std::map<std::pair<PromptId, std::vector<TokenId>>, double> rewards) {
  return Scorer(RewardTableScorer{std::move(rewards)});
}

Scorer Scorer::noisy(Scorer base, double scale, std::uint64_t seed) {
  return Scorer(NoisyScorer{std::make_shared<const Scorer>(std::move(base)), scale, seed});
}

bool Scorer::is_binary() const noexcept {
  if (std::holds_alternative<CorrectnessScorer>(variant_)) return true;
  if (const auto* r = std::get_if<RewardTableScorer>(&variant_)) {
    for (const auto& [key, value] : r->rewards) {
      if (value != 0.0 && value != 1.0) return false;
    }
    return true;
  }
  const auto& n = std::get<NoisyScorer>(variant_);
  return n.scale == 0.0 && n.base->is_binary();
}

ScoreValue Scorer::score(PromptId prompt, const TokenSequence& seq, std::uint64_t z_key) const {
  const auto content = seq.content();
  const std::vector<TokenId> key(content.begin(), content.end());
  if (const auto* c = std::get_if<CorrectnessScorer>(&variant_)) {
    const auto it = c->accepted.find(prompt);
    return it != c->accepted.end() && it->second.contains(key) ? 1.0 : 0.0;
  }
  if (const auto* r = std::get_if<RewardTableScorer>(&variant_)) {
    const auto it = r->rewards.find({prompt, key});
    return it == r->rewards.end() ? 0.0 : it->second;
  }
  const auto& n = std::get<NoisyScorer>(variant_);
  const ScoreValue base = n.base->score(prompt, seq, z_key);
  if (n.scale == 0.0) return base;
  const NoiseSource source(n.seed, NoiseDomain::Scorer);
  const NoiseKey noise_key{index_of(prompt), {static_cast<std::uint32_t>(z_key), static_cast<std::uint32_t>(z_key >> 32)}, 0};
  return base + n.scale * source.normal(noise_key, 0);
}

ScoreValue score(const Scorer& scorer, PromptId prompt, const TokenSequence& seq, std::uint64_t z_key) {
  return scorer.score(prompt, seq, z_key);
}

std::uint64_t z_key_for(ReplicateStream stream) noexcept {
  return (static_cast<std::uint64_t>(stream.lane) << 32) | stream.replicate;
}

PairwiseOutcome compare(ScoreValue a, ScoreValue b, double tol) {
  if (!(tol >= 0.0)) throw DomainError("comparison tolerance must be non-negative");
  if (a - b > tol) return PairwiseOutcome::Win;
  if (b - a > tol) return PairwiseOutcome::Loss;
  return PairwiseOutcome::Tie;
}

}  // namespace cagen
