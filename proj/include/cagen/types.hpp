#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cagen {

enum class TokenId : std::uint32_t {};
enum class PromptId : std::uint32_t {};

constexpr std::uint32_t index_of(TokenId t) noexcept { return static_cast<std::uint32_t>(t); }
constexpr std::uint32_t index_of(PromptId p) noexcept { return static_cast<std::uint32_t>(p); }

/// Token set of size |V| with a designated end-of-sequence token.
/// The empty token is never stored: a sequence simply stops after eos.
class Vocabulary {
 public:
  Vocabulary(std::size_t size, TokenId eos);

  std::size_t size() const noexcept { return size_; }
  TokenId eos() const noexcept { return eos_; }
  bool contains(TokenId t) const noexcept { return index_of(t) < size_; }

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::size_t size_;
  TokenId eos_;
};

/// Probability vector over a vocabulary.
///
/// Construction validates the entries: negative or non-finite entries are
/// rejected, a sum within 1e-6 of one is renormalized, anything further off
/// is an InvalidDistribution error. After construction the sum is within
/// 1e-9 of one.
class NextTokenDistribution {
 public:
  static constexpr double kSumTolerance = 1e-9;
  static constexpr double kRenormalizeTolerance = 1e-6;

  explicit NextTokenDistribution(std::vector<double> probs);

  static NextTokenDistribution point_mass(std::size_t size, TokenId t);
  static NextTokenDistribution uniform(std::size_t size);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](TokenId t) const { return probs_.at(index_of(t)); }
  std::span<const double> probs() const noexcept { return probs_; }

  friend bool operator==(const NextTokenDistribution&, const NextTokenDistribution&) = default;

 private:
  std::vector<double> probs_;
};

/// Generated tokens. Invariant: eos occurs at most once and only last.
struct TokenSequence {
  std::vector<TokenId> tokens;
  bool terminated = false;

  std::size_t length() const noexcept { return tokens.size(); }
  /// Tokens with a trailing eos removed.
  std::span<const TokenId> content() const noexcept;

  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

std::string to_string(std::span<const TokenId> tokens);

}  // namespace cagen
