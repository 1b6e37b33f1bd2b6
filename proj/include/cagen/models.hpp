#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cagen/types.hpp"

namespace cagen {

/// Finite prompt distribution P_Q.
class PromptSet {
 public:
  struct Entry {
    PromptId id;
    double weight;
  };

  /// Weights are normalized; they must be non-negative with a positive sum.
  explicit PromptSet(std::vector<Entry> entries);
  static PromptSet uniform(std::vector<PromptId> ids);

  const std::vector<Entry>& entries() const noexcept { return entries_; }
  std::size_t size() const noexcept { return entries_.size(); }
  double weight(PromptId id) const;

  /// Prompt whose cumulative weight first reaches u in (0,1).
  PromptId draw(double u) const;

 private:
  std::vector<Entry> entries_;
};

/// A fixed token for every step.
struct PointMassModel {
  std::map<PromptId, TokenId> tokens;
};

/// Single-step model: one content token drawn from the prompt's row, then eos.
struct CategoricalModel {
  std::map<PromptId, NextTokenDistribution> rows;
};

/// First token from the prompt's initial row, later tokens from the row of
/// the previous token.
struct MarkovModel {
  std::map<PromptId, NextTokenDistribution> initial;
  std::map<TokenId, NextTokenDistribution> transitions;
};

/// Rows keyed by the full (prompt, partial sequence); unlisted contexts use
/// the fallback row.
struct SequenceTableModel {
  std::map<std::pair<PromptId, std::vector<TokenId>>, NextTokenDistribution> rows;
  NextTokenDistribution fallback;
};

/// Synthetic next-token model f_D. Immutable after construction.
class ModelSpec {
 public:
  using Variant = std::variant<PointMassModel, CategoricalModel, MarkovModel, SequenceTableModel>;

  ModelSpec(Vocabulary vocab, Variant variant);

  static ModelSpec point_mass(Vocabulary vocab, std::map<PromptId, TokenId> tokens);
  static ModelSpec categorical(Vocabulary vocab, std::map<PromptId, NextTokenDistribution> rows);
  static ModelSpec markov(Vocabulary vocab, std::map<PromptId, NextTokenDistribution> initial,
                          std::map<TokenId, NextTokenDistribution> transitions);
  /// `fallback` defaults to uniform over the non-eos tokens.
  static ModelSpec sequence_table(Vocabulary vocab,
                                  std::map<std::pair<PromptId, std::vector<TokenId>>, NextTokenDistribution> rows,
                                  std::optional<NextTokenDistribution> fallback = std::nullopt);

  const Vocabulary& vocabulary() const noexcept { return vocab_; }
  const Variant& variant() const noexcept { return variant_; }

  /// D_i = f_D(S_{i-1}). `partial` holds the tokens generated so far and must
  /// not be terminated. Unknown prompts raise LookupError.
  NextTokenDistribution next_token_distribution(PromptId prompt, const TokenSequence& partial) const;

  /// Every (prompt, partial) context with a stored row, restricted to the
  /// given prompts.
  std::vector<std::pair<PromptId, TokenSequence>> table_contexts(const PromptSet& prompts) const;

 private:
  Vocabulary vocab_;
  Variant variant_;
};

/// Replace every row d by (1 - eps) d + eps r, r a seeded random distribution
/// on the support of d. The sup-norm change of any row is at most eps.
ModelSpec perturb(const ModelSpec& model, double eps, std::uint64_t direction_seed);

/// sup over prompts and table contexts of the max-abs row difference.
double model_distance(const ModelSpec& a, const ModelSpec& b, const PromptSet& prompts);

}  // namespace cagen
