#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cagen/experiment.hpp"

namespace cagen {

struct ErrorCurveSettings {
  std::vector<std::string> pair;  // empty: first two models
  std::vector<std::size_t> sizes;
  std::size_t subsamples = 1000;
  double target_error = 0.02;
};

/// One experiment file. See README for the schema.
struct ExperimentConfig {
  Vocabulary vocabulary{2, TokenId{1}};
  std::vector<NamedModel> models;
  ExperimentSetup setup{PromptSet::uniform({PromptId{0}}), Scorer::correctness({}), GenerationConfig{}};
  std::size_t replicates = 10'000;
  std::uint64_t seed = 0;
  std::vector<Coupling> regimes{Coupling::Coupled, Coupling::Independent};
  double level = 0.95;
  ErrorCurveSettings error_curve;

  const NamedModel& model(const std::string& name) const;
};

/// Parses and validates a configuration document. Any schema or semantic
/// problem raises ConfigError before computation starts.
ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace cagen
