#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <string_view>
#include <variant>
#include <vector>

#include "cagen/noise.hpp"
#include "cagen/types.hpp"

namespace cagen {

using ScoreValue = double;

enum class PairwiseOutcome { Win, Loss, Tie };

std::string_view to_string(PairwiseOutcome o) noexcept;

struct CorrectnessScorer {
  /// Accepted content sequences per prompt (eos not included).
  std::map<PromptId, std::set<std::vector<TokenId>>> accepted;
};

struct RewardTableScorer {
  /// Reward per (prompt, content sequence); unlisted sequences score 0.
  std::map<std::pair<PromptId, std::vector<TokenId>>, double> rewards;
};

class Scorer;

struct NoisyScorer {
  std::shared_ptr<const Scorer> base;
  double scale = 0.0;
  std::uint64_t seed = 0;
};

/// f_R: maps a generated sequence (and scorer noise Z) to a real score.
class Scorer {
 public:
  using Variant = std::variant<CorrectnessScorer, RewardTableScorer, NoisyScorer>;

  explicit Scorer(Variant variant);

  static Scorer correctness(std::map<PromptId, std::set<std::vector<TokenId>>> accepted);
  static Scorer reward_table(std::map<std::pair<PromptId, std::vector<TokenId>>, double> rewards);
  static Scorer noisy(Scorer base, double scale, std::uint64_t seed);

  const Variant& variant() const noexcept { return variant_; }

  /// True when every score is 0 or 1.
  bool is_binary() const noexcept;

  /// Comparison tolerance: 0 for binary scorers, 1e-12 otherwise.
  double default_tolerance() const noexcept { return is_binary() ? 0.0 : 1e-12; }

  /// Noisy scorers add N(0, scale^2) keyed by (prompt, z_key); equal keys give
  /// equal draws.
  ScoreValue score(PromptId prompt, const TokenSequence& seq, std::uint64_t z_key) const;

 private:
  Variant variant_;
};

ScoreValue score(const Scorer& scorer, PromptId prompt, const TokenSequence& seq, std::uint64_t z_key);

/// Scorer-noise key for a generation lane. Coupled runs give both sides the
/// same key; independent runs separate them by model index.
std::uint64_t z_key_for(ReplicateStream stream) noexcept;

/// Win iff a - b > tol, Loss iff b - a > tol, Tie otherwise.
PairwiseOutcome compare(ScoreValue a, ScoreValue b, double tol);

}  // namespace cagen
