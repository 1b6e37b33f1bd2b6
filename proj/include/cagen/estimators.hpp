#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cagen/generation.hpp"
#include "cagen/models.hpp"
#include "cagen/scoring.hpp"

namespace cagen {

struct PairedRecord {
  PromptId prompt{};
  std::uint32_t replicate = 0;
  ScoreValue score_a = 0.0;
  ScoreValue score_b = 0.0;

  double difference() const noexcept { return score_a - score_b; }
};

/// Realized score pairs of one ordered model pair under one coupling regime.
struct PairedSampleSet {
  std::string model_a;
  std::string model_b;
  Coupling coupling = Coupling::Coupled;
  std::vector<PairedRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  /// Throws ConfigError when two records share a (prompt, replicate) key.
  void check_unique_keys() const;
};

/// Records of `set` whose prompt equals `prompt`, in original order.
PairedSampleSet prompt_stratum(const PairedSampleSet& set, PromptId prompt);

double mean_score_difference(const PairedSampleSet& samples);

/// Moments use the plug-in (1/n) normalization.
struct VarianceReport {
  double var_diff_coupled = 0.0;
  double var_diff_independent = 0.0;
  double covariance = 0.0;  // Cov(score_a, score_b) on the coupled set
  double identity_residual = 0.0;
  double residual_se = 0.0;  // delete-one jackknife standard error of the residual
};

VarianceReport variance_decomposition(const PairedSampleSet& coupled, const PairedSampleSet& independent);

struct OutcomeTally {
  std::uint64_t wins = 0;
  std::uint64_t losses = 0;
  std::uint64_t ties = 0;

  void add(PairwiseOutcome o) noexcept;
  std::uint64_t total() const noexcept { return wins + losses + ties; }
  OutcomeTally& operator+=(const OutcomeTally& other) noexcept;
};

struct WinRateReport {
  std::string model_a;
  std::string model_b;
  double win_rate = 0.0;
  double loss_rate = 0.0;
  double tie_rate = 0.0;
  std::uint64_t n = 0;
};

WinRateReport make_win_rate_report(std::string model_a, std::string model_b, const OutcomeTally& tally);

WinRateReport win_tie_rates(const PairedSampleSet& samples, double tol);

/// Per-prompt rates combined with the prompt weights.
WinRateReport win_tie_rates(const PairedSampleSet& samples, double tol, const PromptSet& prompts);

/// Unweighted mean of `model`'s win rate over every other model appearing in
/// `reports`. A report (other, model) contributes its loss rate.
double average_win_rate(std::span<const WinRateReport> reports, const std::string& model);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Two-sided standard normal quantile for a central `level` interval.
double normal_critical_value(double level);

/// p +- z sqrt(p(1-p)/n), clamped to [0,1].
Interval wald_ci(double p, std::uint64_t n, double level);

struct ZTest {
  double z = 0.0;
  double p_value = 1.0;
};

/// Pooled two-proportion z-test with a two-tailed p-value.
ZTest two_proportion_z_test(double p1, std::uint64_t n1, double p2, std::uint64_t n2);

struct RankEntry {
  std::string model;
  double average_win_rate = 0.0;
  Interval ci;
};

struct RankRow {
  std::string model;
  double average_win_rate = 0.0;
  Interval ci;
  int rank = 1;
};

struct RankTable {
  std::vector<RankRow> rows;  // input order

  int rank_of(const std::string& model) const;
};

/// rank = 1 + number of models whose CI lies strictly above this model's CI.
RankTable rank_from_cis(std::span<const RankEntry> entries);

struct ErrorPoint {
  std::size_t size = 0;
  double mean_abs_error = 0.0;
  double ci_low = 0.0;   // 2.5th percentile
  double ci_high = 0.0;  // 97.5th percentile
};

struct ErrorCurve {
  std::vector<ErrorPoint> points;
  double ground_truth = 0.0;
  std::size_t n_subsamples = 0;
};

/// Absolute error of the mean difference on subsets drawn without
/// replacement, against the full-pool mean.
ErrorCurve error_curve(const PairedSampleSet& pool, std::span<const std::size_t> sizes, std::size_t n_subsamples,
                       std::uint64_t seed, unsigned threads = 1);

/// 1 - n_coupled / n_independent at the interpolated size where each curve
/// first reaches `target_error`.
double sample_savings(const ErrorCurve& coupled, const ErrorCurve& independent, double target_error);

/// Sample size at which `curve` first reaches `target_error`, interpolated
/// linearly between grid points.
double size_at_error(const ErrorCurve& curve, double target_error);

/// Linear-interpolation percentile (q in [0,1]) of unsorted values.
double percentile(std::vector<double> values, double q);

}  // namespace cagen
