#pragma once

#include <optional>
#include <string_view>

#include "cagen/noise.hpp"
#include "cagen/types.hpp"

namespace cagen {

enum class Sampler { GumbelMax, InverseTransform };

std::string_view to_string(Sampler s) noexcept;
std::optional<Sampler> parse_sampler(std::string_view name) noexcept;

/// argmax over tokens with positive probability of log(d_t) + gumbel_t.
/// Zero-probability tokens are never returned; ties go to the lowest index.
TokenId gumbel_max_sample(const NextTokenDistribution& d, const NoiseBlock& noise);

/// Smallest t with d_0 + ... + d_t >= u. Requires u in (0,1).
/// Rounding can leave the total CDF just below u; the last positive-mass
/// token is returned then.
TokenId inverse_transform_sample(const NextTokenDistribution& d, double u);

/// d'_t proportional to d_t^(1/tau). tau == 1 returns d unchanged.
NextTokenDistribution temperature_scale(const NextTokenDistribution& d, double tau);

TokenId sample(Sampler sampler, const NextTokenDistribution& d, const NoiseBlock& noise);

}  // namespace cagen
