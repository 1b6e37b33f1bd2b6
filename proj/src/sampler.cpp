#include "cagen/sampler.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "cagen/errors.hpp"

namespace cagen {

std::string_view to_string(Sampler s) noexcept {
  switch (s) {
    case Sampler::GumbelMax:
      return "gumbel_max";
    case Sampler::InverseTransform:
      return "inverse_transform";
  }
  return "unknown";
}

std::optional<Sampler> parse_sampler(std::string_view name) noexcept {
  if (name == "gumbel_max") return Sampler::GumbelMax;
  if (name == "inverse_transform") return Sampler::InverseTransform;
  return std::nullopt;
}

TokenId gumbel_max_sample(const NextTokenDistribution& d, const NoiseBlock& noise) {
  const auto probs = d.probs();
  if (noise.gumbels.size() != probs.size()) {
    throw DomainError("noise block has " + std::to_string(noise.gumbels.size()) + " gumbels for a distribution of size " +
                      std::to_string(probs.size()));
  }
  std::size_t best = probs.size();
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < probs.size(); ++t) {
    if (probs[t] <= 0.0) continue;
    const double score = std::log(probs[t]) + noise.gumbels[t];
    if (best == probs.size() || score > best_score) {
      best = t;
      best_score = score;
    }
  }
  if (best == probs.size()) throw InvalidDistribution("all-zero distribution");
  return TokenId{static_cast<std::uint32_t>(best)};
}

TokenId inverse_transform_sample(const NextTokenDistribution& d, double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("inverse-transform uniform must lie in (0,1)");
  const auto probs = d.probs();
  double cdf = 0.0;
  std::size_t last_positive = probs.size();
  for (std::size_t t = 0; t < probs.size(); ++t) {
    if (probs[t] <= 0.0) continue;
    last_positive = t;
    cdf += probs[t];
    if (cdf >= u) return TokenId{static_cast<std::uint32_t>(t)};
  }
  if (last_positive == probs.size()) throw InvalidDistribution("all-zero distribution");
  return TokenId{static_cast<std::uint32_t>(last_positive)};
}

NextTokenDistribution temperature_scale(const NextTokenDistribution& d, double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("temperature must be positive");
  if (tau == 1.0) return d;
  const auto probs = d.probs();
  // Work in log space relative to the largest entry so small tau cannot underflow everything.
  double max_log = -std::numeric_limits<double>::infinity();
  for (double p : probs) {
    if (p > 0.0) max_log = std::max(max_log, std::log(p));
  }
  std::vector<double> scaled(probs.size(), 0.0);
  double total = 0.0;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    if (probs[t] <= 0.0) continue;
    scaled[t] = std::exp((std::log(probs[t]) - max_log) / tau);
    total += scaled[t];
  }
  for (double& p : scaled) p /= total;
  return NextTokenDistribution(std::move(scaled));
}

TokenId sample(Sampler sampler, const NextTokenDistribution& d, const NoiseBlock& noise) {
  switch (sampler) {
    case Sampler::GumbelMax:
      return gumbel_max_sample(d, noise);
    case Sampler::InverseTransform:
      return inverse_transform_sample(d, noise.uniform);
  }
  throw DomainError("unknown sampler");
}

}  // namespace cagen
