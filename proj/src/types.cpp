#include "cagen/types.hpp"

#include <cmath>
#include <numeric>

#include "cagen/errors.hpp"

namespace cagen {

Vocabulary::Vocabulary(std::size_t size, TokenId eos) : size_(size), eos_(eos) {
  if (size < 2) throw ConfigError("vocabulary needs at least two tokens");
  if (index_of(eos) >= size) throw ConfigError("eos token outside vocabulary");
}

NextTokenDistribution::NextTokenDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw InvalidDistribution("empty distribution");
  for (double p : probs_) {
    if (!std::isfinite(p) || p < 0.0) throw InvalidDistribution("distribution has a negative or non-finite entry");
  }
  const double sum = std::accumulate(probs_.begin(), probs_.end(), 0.0);
  if (sum == 0.0) throw InvalidDistribution("all-zero distribution");
  if (std::abs(sum - 1.0) > kRenormalizeTolerance) {
    throw InvalidDistribution("distribution sums to " + std::to_string(sum));
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    for (double& p : probs_) p /= sum;
  }
}

NextTokenDistribution NextTokenDistribution::point_mass(std::size_t size, TokenId t) {
  if (index_of(t) >= size) throw InvalidDistribution("point mass outside vocabulary");
  std::vector<double> probs(size, 0.0);
  probs[index_of(t)] = 1.0;
  return NextTokenDistribution(std::move(probs));
}

NextTokenDistribution NextTokenDistribution::uniform(std::size_t size) {
  return NextTokenDistribution(std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

std::span<const TokenId> TokenSequence::content() const noexcept {
  std::span<const TokenId> all(tokens);
  return terminated ? all.first(all.size() - 1) : all;
}

std::string to_string(std::span<const TokenId> tokens) {
  std::string out = "[";
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(index_of(tokens[i]));
  }
  out += ']';
  return out;
}

}  // namespace cagen
