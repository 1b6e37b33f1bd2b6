#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace cagen {

/// Philox4x32-10 block function (Salmon et al., Random123).
/// Stateless: the same (counter, key) always maps to the same output.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;
PhiloxCounter philox4x32_10(PhiloxCounter counter, PhiloxKey key) noexcept;

/// SplitMix64 finalizer; a bijection on 64-bit words.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// 64 random bits mapped to the open interval (0, 1).
double to_open_unit(std::uint64_t bits) noexcept;

/// Seed namespaces. Streams in different domains never share a Philox key.
enum class NoiseDomain : std::uint32_t {
  Generation = 1,
  Oracle = 2,
  Scorer = 3,
  Perturbation = 4,
  Subsampling = 5,
  Instances = 6,
};

/// Which noise lane a model reads. Lane 0 is shared by every model of a
/// coupled run; independent runs give model j the lane j + 1.
struct ReplicateStream {
  std::uint32_t replicate = 0;
  std::uint32_t lane = 0;

  static constexpr ReplicateStream coupled(std::uint32_t replicate) noexcept { return {replicate, 0}; }
  static constexpr ReplicateStream independent(std::uint32_t replicate, std::uint32_t model_index) noexcept {
    return {replicate, model_index + 1};
  }

  friend bool operator==(const ReplicateStream&, const ReplicateStream&) = default;
};

struct NoiseKey {
  std::uint32_t prompt = 0;
  ReplicateStream stream;
  std::uint32_t step = 0;

  friend bool operator==(const NoiseKey&, const NoiseKey&) = default;
};

/// Exogenous noise for one generation step.
struct NoiseBlock {
  std::vector<double> gumbels;  // one Gumbel(0,1) per token
  double uniform = 0.5;         // in (0,1), read by the inverse-transform sampler
};

/// Counter-based noise: every value is a pure function of
/// (seed, domain, key, element), so results do not depend on evaluation
/// order or thread count.
class NoiseSource {
 public:
  explicit NoiseSource(std::uint64_t seed, NoiseDomain domain = NoiseDomain::Generation) noexcept;

  std::uint64_t seed() const noexcept { return seed_; }
  NoiseDomain domain() const noexcept { return domain_; }

  /// Element `element` of the stream at `key`, uniform on (0,1).
  double uniform(const NoiseKey& key, std::uint32_t element) const noexcept;
  double gumbel(const NoiseKey& key, std::uint32_t element) const noexcept;
  double normal(const NoiseKey& key, std::uint32_t element) const noexcept;

  /// Gumbels occupy elements [0, size); the uniform is element `size`.
  NoiseBlock block(const NoiseKey& key, std::size_t size) const;

  /// Same seed, different namespace.
  NoiseSource with_domain(NoiseDomain domain) const noexcept { return NoiseSource(seed_, domain); }

 private:
  std::uint64_t bits(const NoiseKey& key, std::uint32_t element) const noexcept;

  std::uint64_t seed_;
  NoiseDomain domain_;
};

/// Small sequential generator over a keyed stream, for drawing random
/// instances (test models, subsample permutations) reproducibly.
class KeyedStream {
 public:
  KeyedStream(const NoiseSource& source, NoiseKey key) noexcept : source_(source), key_(key) {}

  double next_uniform() noexcept { return source_.uniform(key_, next_++); }
  double next_uniform(double lo, double hi) noexcept { return lo + (hi - lo) * next_uniform(); }
  /// Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) noexcept;
  double next_exponential() noexcept;

 private:
  NoiseSource source_;
  NoiseKey key_;
  std::uint32_t next_ = 0;
};

}  // namespace cagen
