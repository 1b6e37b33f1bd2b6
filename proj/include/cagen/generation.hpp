#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

#include "cagen/models.hpp"
#include "cagen/noise.hpp"
#include "cagen/sampler.hpp"
#include "cagen/types.hpp"

namespace cagen {

struct GenerationConfig {
  std::size_t max_steps = 1;  // K
  double temperature = 1.0;
  Sampler sampler = Sampler::GumbelMax;

  void validate() const;
};

enum class Coupling { Coupled, Independent };

std::string_view to_string(Coupling c) noexcept;

/// One autoregressive run. Step i (1-based) reads the noise block keyed by
/// (prompt, stream, i); generation stops after eos or after max_steps tokens.
TokenSequence generate(const ModelSpec& model, PromptId prompt, ReplicateStream stream, const NoiseSource& noise,
                       const GenerationConfig& cfg);

/// All models read the shared lane of `replicate`.
std::vector<TokenSequence> generate_coupled(std::span<const ModelSpec> models, PromptId prompt,
                                            std::uint32_t replicate, const NoiseSource& noise,
                                            const GenerationConfig& cfg);

/// Model j reads its own lane (replicate, j).
std::vector<TokenSequence> generate_independent(std::span<const ModelSpec> models, PromptId prompt,
                                                std::uint32_t replicate, const NoiseSource& noise,
                                                const GenerationConfig& cfg);

std::vector<TokenSequence> generate_all(Coupling coupling, std::span<const ModelSpec> models, PromptId prompt,
                                        std::uint32_t replicate, const NoiseSource& noise,
                                        const GenerationConfig& cfg);

/// Noise lane model `model_index` reads under `coupling`.
ReplicateStream stream_for(Coupling coupling, std::uint32_t replicate, std::size_t model_index) noexcept;

}  // namespace cagen
