#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cagen/estimators.hpp"
#include "cagen/generation.hpp"
#include "cagen/models.hpp"
#include "cagen/noise.hpp"
#include "cagen/scoring.hpp"

namespace cagen {

struct NamedModel {
  std::string name;
  ModelSpec spec;
};

/// Everything needed to run replicates: S_q ~ P_Q, generation, scoring.
struct ExperimentSetup {
  PromptSet prompts;
  Scorer scorer;
  GenerationConfig generation;
};

/// Prompt for replicate r, drawn from P_Q with the step-0 slot of lane 0
/// (generation steps start at 1, so this slot is never read by a sampler).
PromptId draw_prompt(const PromptSet& prompts, const NoiseSource& noise, std::uint32_t replicate);

/// `n` replicates of the ordered pair (a, b): a reads model slot 0 and b
/// slot 1 of the noise lanes.
PairedSampleSet collect_pairs(const NamedModel& a, const NamedModel& b, const ExperimentSetup& setup,
                              Coupling coupling, std::size_t n, const NoiseSource& noise, unsigned threads = 1);

/// Outcome counts for every ordered pair (i, j), i != j, with all models
/// generated on each replicate. tallies[i][j] counts i against j.
struct AllPairsResult {
  std::vector<std::vector<OutcomeTally>> tallies;
  /// Per replicate, per model: mean over opponents of the win indicator.
  /// Summed in block order; used for standard errors of average win rates.
  std::vector<double> avg_win_sum;
  std::vector<double> avg_win_sum_sq;
  std::size_t n = 0;
};

AllPairsResult run_all_pairs(std::span<const NamedModel> models, const ExperimentSetup& setup, Coupling coupling,
                             std::size_t n, const NoiseSource& noise, double tol, unsigned threads = 1);

}  // namespace cagen
