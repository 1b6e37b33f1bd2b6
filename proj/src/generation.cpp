#include "cagen/generation.hpp"

#include "cagen/errors.hpp"

namespace cagen {

void GenerationConfig::validate() const {
  if (max_steps < 1) throw ConfigError("max_steps must be at least 1");
  if (!(temperature > 0.0)) throw ConfigError("temperature must be positive");
}

std::string_view to_string(Coupling c) noexcept { return c == Coupling::Coupled ? "coupled" : "independent"; }

TokenSequence generate(const ModelSpec& model, PromptId prompt, ReplicateStream stream, const NoiseSource& noise,
                       const GenerationConfig& cfg) {
  cfg.validate();
  const Vocabulary& vocab = model.vocabulary();
  TokenSequence seq;
  seq.tokens.reserve(cfg.max_steps);
  for (std::size_t step = 1; step <= cfg.max_steps; ++step) {
    auto d = model.next_token_distribution(prompt, seq);
    if (d.size() != vocab.size()) throw InvalidDistribution("model returned a row of the wrong size");
    if (cfg.temperature != 1.0) d = temperature_scale(d, cfg.temperature);
    const NoiseBlock block = noise.block({index_of(prompt), stream, static_cast<std::uint32_t>(step)}, vocab.size());
    const TokenId token = sample(cfg.sampler, d, block);
    seq.tokens.push_back(token);
    if (token == vocab.eos()) {
      seq.terminated = true;
      break;
    }
  }
  return seq;
}

namespace {

void check_shared_vocabulary(std::span<const ModelSpec> models) {
  if (models.empty()) throw ConfigError("no models given");
  for (const auto& m : models) {
    if (!(m.vocabulary() == models.front().vocabulary())) throw ConfigError("models use different vocabularies");
  }
}

}  // namespace

ReplicateStream stream_for(Coupling coupling, std::uint32_t replicate, std::size_t model_index) noexcept {
  return coupling == Coupling::Coupled
             ? ReplicateStream::coupled(replicate)
             : ReplicateStream::independent(replicate, static_cast<std::uint32_t>(model_index));
}

std::vector<TokenSequence> generate_all(Coupling coupling, std::span<const ModelSpec> models, PromptId prompt,
                                        std::uint32_t replicate, const NoiseSource& noise,
                                        const GenerationConfig& cfg) {
  check_shared_vocabulary(models);
  std::vector<TokenSequence> out;
  out.reserve(models.size());
  for (std::size_t j = 0; j < models.size(); ++j) {
    out.push_back(generate(models[j], prompt, stream_for(coupling, replicate, j), noise, cfg));
  }
  return out;
}

std::vector<TokenSequence> generate_coupled(std::span<const ModelSpec> models, PromptId prompt,
                                            std::uint32_t replicate, const NoiseSource& noise,
                                            const GenerationConfig& cfg) {
  return generate_all(Coupling::Coupled, models, prompt, replicate, noise, cfg);
}

std::vector<TokenSequence> generate_independent(std::span<const ModelSpec> models, PromptId prompt,
                                                std::uint32_t replicate, const NoiseSource& noise,
                                                const GenerationConfig& cfg) {
  return generate_all(Coupling::Independent, models, prompt, replicate, noise, cfg);
}

}  // namespace cagen
