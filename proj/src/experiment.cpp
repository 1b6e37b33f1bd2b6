#include "cagen/experiment.hpp"

#include <algorithm>
#include <limits>

#include "cagen/errors.hpp"
#include "cagen/parallel.hpp"

namespace cagen {

PromptId draw_prompt(const PromptSet& prompts, const NoiseSource& noise, std::uint32_t replicate) {
  if (prompts.size() == 1) return prompts.entries().front().id;
  return prompts.draw(noise.uniform(NoiseKey{0, ReplicateStream::coupled(replicate), 0}, 0));
}

namespace {

void check_replicate_count(std::size_t n) {
  if (n < 1) throw DomainError("need at least one replicate");
  if (n > std::numeric_limits<std::uint32_t>::max()) throw DomainError("replicate count exceeds 2^32");
}

}  // namespace

PairedSampleSet collect_pairs(const NamedModel& a, const NamedModel& b, const ExperimentSetup& setup,
                              Coupling coupling, std::size_t n, const NoiseSource& noise, unsigned threads) {
  check_replicate_count(n);
  setup.generation.validate();
  if (!(a.spec.vocabulary() == b.spec.vocabulary())) throw ConfigError("models use different vocabularies");

  PairedSampleSet out{a.name, b.name, coupling, std::vector<PairedRecord>(n)};
  parallel_for(block_count(n), threads, [&](std::size_t block) {
    const std::size_t end = std::min(n, (block + 1) * kReplicateBlock);
    for (std::size_t r = block * kReplicateBlock; r < end; ++r) {
      const auto replicate = static_cast<std::uint32_t>(r);
      const PromptId prompt = draw_prompt(setup.prompts, noise, replicate);
      const ReplicateStream sa = stream_for(coupling, replicate, 0);
      const ReplicateStream sb = stream_for(coupling, replicate, 1);
      const TokenSequence seq_a = generate(a.spec, prompt, sa, noise, setup.generation);
      const TokenSequence seq_b = generate(b.spec, prompt, sb, noise, setup.generation);
      out.records[r] = {prompt, replicate, setup.scorer.score(prompt, seq_a, z_key_for(sa)),
                        setup.scorer.score(prompt, seq_b, z_key_for(sb))};
    }
  });
  return out;
}

AllPairsResult run_all_pairs(std::span<const NamedModel> models, const ExperimentSetup& setup, Coupling coupling,
                             std::size_t n, const NoiseSource& noise, double tol, unsigned threads) {
  check_replicate_count(n);
  setup.generation.validate();
  const std::size_t m = models.size();
  if (m < 2) throw ConfigError("need at least two models");
  for (const auto& model : models) {
    if (!(model.spec.vocabulary() == models.front().spec.vocabulary())) {
      throw ConfigError("models use different vocabularies");
    }
  }

  struct BlockResult {
    std::vector<std::vector<OutcomeTally>> tallies;
    std::vector<double> sum, sum_sq;
  };
  std::vector<BlockResult> blocks(block_count(n));
  parallel_for(blocks.size(), threads, [&](std::size_t block) {
    BlockResult& res = blocks[block];
    res.tallies.assign(m, std::vector<OutcomeTally>(m));
    res.sum.assign(m, 0.0);
    res.sum_sq.assign(m, 0.0);
    std::vector<ScoreValue> scores(m);
    const std::size_t end = std::min(n, (block + 1) * kReplicateBlock);
    for (std::size_t r = block * kReplicateBlock; r < end; ++r) {
      const auto replicate = static_cast<std::uint32_t>(r);
      const PromptId prompt = draw_prompt(setup.prompts, noise, replicate);
      for (std::size_t j = 0; j < m; ++j) {
        const ReplicateStream stream = stream_for(coupling, replicate, j);
        scores[j] = setup.scorer.score(prompt, generate(models[j].spec, prompt, stream, noise, setup.generation),
                                       z_key_for(stream));
      }
      for (std::size_t i = 0; i < m; ++i) {
        double wins = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
          if (i == j) continue;
          const auto outcome = compare(scores[i], scores[j], tol);
          res.tallies[i][j].add(outcome);
          if (outcome == PairwiseOutcome::Win) wins += 1.0;
        }
        const double avg = wins / static_cast<double>(m - 1);
        res.sum[i] += avg;
        res.sum_sq[i] += avg * avg;
      }
    }
  });

  AllPairsResult out;
  out.n = n;
  out.tallies.assign(m, std::vector<OutcomeTally>(m));
  out.avg_win_sum.assign(m, 0.0);
  out.avg_win_sum_sq.assign(m, 0.0);
  for (const auto& res : blocks) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) out.tallies[i][j] += res.tallies[i][j];
      out.avg_win_sum[i] += res.sum[i];
      out.avg_win_sum_sq[i] += res.sum_sq[i];
    }
  }
  return out;
}

}  // namespace cagen
