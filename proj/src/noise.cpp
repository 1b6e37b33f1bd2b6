#include "cagen/noise.hpp"

#include <cmath>
#include <numbers>

namespace cagen {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) noexcept {
  const std::uint64_t product = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(product >> 32);
  lo = static_cast<std::uint32_t>(product);
}

}  // namespace

PhiloxCounter philox4x32_10(PhiloxCounter c, PhiloxKey k) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kPhiloxW0;
      k[1] += kPhiloxW1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, c[0], hi0, lo0);
    mulhilo(kPhiloxM1, c[2], hi1, lo1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }
  return c;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

double to_open_unit(std::uint64_t bits) noexcept {
  // 52 bits plus a half-step offset: the largest value is 1 - 2^-53, which is
  // exactly representable (with 53 bits it would round up to 1).
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

NoiseSource::NoiseSource(std::uint64_t seed, NoiseDomain domain) noexcept : seed_(seed), domain_(domain) {}

std::uint64_t NoiseSource::bits(const NoiseKey& key, std::uint32_t element) const noexcept {
  const std::uint64_t tag = (static_cast<std::uint64_t>(domain_) << 32) | key.stream.lane;
  const std::uint64_t k = mix64(seed_ + mix64(tag));
  const PhiloxCounter out = philox4x32_10({element, key.step, key.stream.replicate, key.prompt},
                                          {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)});
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

double NoiseSource::uniform(const NoiseKey& key, std::uint32_t element) const noexcept {
  return to_open_unit(bits(key, element));
}

double NoiseSource::gumbel(const NoiseKey& key, std::uint32_t element) const noexcept {
  return -std::log(-std::log(uniform(key, element)));
}

double NoiseSource::normal(const NoiseKey& key, std::uint32_t element) const noexcept {
  const double u1 = uniform(key, 2 * element);
  const double u2 = uniform(key, 2 * element + 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

NoiseBlock NoiseSource::block(const NoiseKey& key, std::size_t size) const {
  NoiseBlock out;
  out.gumbels.resize(size);
  for (std::size_t t = 0; t < size; ++t) out.gumbels[t] = gumbel(key, static_cast<std::uint32_t>(t));
  out.uniform = uniform(key, static_cast<std::uint32_t>(size));
  return out;
}

std::uint64_t KeyedStream::next_below(std::uint64_t n) noexcept {
  // Multiply-shift on a 53-bit uniform; bias is below 2^-53 * n.
  const double u = next_uniform();
  const auto r = static_cast<std::uint64_t>(u * static_cast<double>(n));
  return r < n ? r : n - 1;
}

double KeyedStream::next_exponential() noexcept { return -std::log(next_uniform()); }

}  // namespace cagen
