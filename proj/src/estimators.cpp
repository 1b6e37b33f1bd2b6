#include "cagen/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include <boost/math/distributions/normal.hpp>

#include "cagen/errors.hpp"
#include "cagen/noise.hpp"
#include "cagen/parallel.hpp"

namespace cagen {

void PairedSampleSet::check_unique_keys() const {
  std::set<std::pair<PromptId, std::uint32_t>> seen;
  for (const auto& r : records) {
    if (!seen.insert({r.prompt, r.replicate}).second) {
      throw ConfigError("duplicate (prompt, replicate) key in paired samples");
    }
  }
}

double mean_score_difference(const PairedSampleSet& samples) {
  if (samples.empty()) throw InsufficientData("no paired samples");
  double sum = 0.0;
  for (const auto& r : samples.records) sum += r.difference();
  return sum / static_cast<double>(samples.size());
}

namespace {

// Plug-in variance and its delete-one values for a column of data.
struct JackknifedVariance {
  double value = 0.0;
  std::vector<double> leave_one_out;
};

template <typename Get>
JackknifedVariance jackknifed_variance(const std::vector<PairedRecord>& records, Get get) {
  const std::size_t n = records.size();
  double mean = 0.0;
  for (const auto& r : records) mean += get(r);
  mean /= static_cast<double>(n);
  double sum_sq = 0.0;
  for (const auto& r : records) {
    const double x = get(r) - mean;
    sum_sq += x * x;
  }
  JackknifedVariance out;
  out.value = sum_sq / static_cast<double>(n);
  if (n < 3) return out;
  out.leave_one_out.resize(n);
  const double m = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = get(records[i]) - mean;
    out.leave_one_out[i] = (sum_sq - x * x) / m - (x / m) * (x / m);
  }
  return out;
}

double jackknife_variance(const std::vector<double>& leave_one_out) {
  const std::size_t n = leave_one_out.size();
  if (n < 3) return 0.0;
  const double mean = std::accumulate(leave_one_out.begin(), leave_one_out.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : leave_one_out) ss += (v - mean) * (v - mean);
  return static_cast<double>(n - 1) / static_cast<double>(n) * ss;
}

}  // namespace

PairedSampleSet prompt_stratum(const PairedSampleSet& set, PromptId prompt) {
  PairedSampleSet out{set.model_a, set.model_b, set.coupling, {}};
  for (const auto& r : set.records) {
    if (r.prompt == prompt) out.records.push_back(r);
  }
  return out;
}

VarianceReport variance_decomposition(const PairedSampleSet& coupled, const PairedSampleSet& independent) {
  if (coupled.empty() || independent.empty()) throw InsufficientData("variance decomposition needs both sample sets");
  if (coupled.model_a != independent.model_a || coupled.model_b != independent.model_b) {
    throw ConfigError("coupled and independent samples compare different model pairs");
  }
  if (coupled.coupling != Coupling::Coupled || independent.coupling != Coupling::Independent) {
    throw ConfigError("variance decomposition expects one coupled and one independent sample set");
  }

  const auto diff_c = jackknifed_variance(coupled.records, [](const PairedRecord& r) { return r.difference(); });
  const auto diff_i = jackknifed_variance(independent.records, [](const PairedRecord& r) { return r.difference(); });
  const auto var_a = jackknifed_variance(coupled.records, [](const PairedRecord& r) { return r.score_a; });
  const auto var_b = jackknifed_variance(coupled.records, [](const PairedRecord& r) { return r.score_b; });

  VarianceReport out;
  out.var_diff_coupled = diff_c.value;
  out.var_diff_independent = diff_i.value;
  // Var(a - b) = Var(a) + Var(b) - 2 Cov(a, b) holds exactly for plug-in moments.
  out.covariance = 0.5 * (var_a.value + var_b.value - diff_c.value);
  out.identity_residual = out.var_diff_independent - out.var_diff_coupled - 2.0 * out.covariance;

  // The residual equals Var_ind(a - b) - Var_c(a) - Var_c(b); the two sets are
  // independent, so their jackknife variances add.
  std::vector<double> coupled_loo(var_a.leave_one_out.size());
  for (std::size_t i = 0; i < coupled_loo.size(); ++i) coupled_loo[i] = var_a.leave_one_out[i] + var_b.leave_one_out[i];
  out.residual_se = std::sqrt(jackknife_variance(diff_i.leave_one_out) + jackknife_variance(coupled_loo));
  return out;
}

void OutcomeTally::add(PairwiseOutcome o) noexcept {
  switch (o) {
    case PairwiseOutcome::Win:
      ++wins;
      break;
    case PairwiseOutcome::Loss:
      ++losses;
      break;
    case PairwiseOutcome::Tie:
      ++ties;
      break;
  }
}

OutcomeTally& OutcomeTally::operator+=(const OutcomeTally& other) noexcept {
  wins += other.wins;
  losses += other.losses;
  ties += other.ties;
  return *this;
}

WinRateReport make_win_rate_report(std::string model_a, std::string model_b, const OutcomeTally& tally) {
  const std::uint64_t n = tally.total();
  if (n == 0) throw InsufficientData("no comparisons");
  const double denom = static_cast<double>(n);
  return {std::move(model_a), std::move(model_b), static_cast<double>(tally.wins) / denom,
          static_cast<double>(tally.losses) / denom, static_cast<double>(tally.ties) / denom, n};
}

WinRateReport win_tie_rates(const PairedSampleSet& samples, double tol) {
  if (samples.empty()) throw InsufficientData("no paired samples");
  OutcomeTally tally;
  for (const auto& r : samples.records) tally.add(compare(r.score_a, r.score_b, tol));
  return make_win_rate_report(samples.model_a, samples.model_b, tally);
}

WinRateReport win_tie_rates(const PairedSampleSet& samples, double tol, const PromptSet& prompts) {
  if (samples.empty()) throw InsufficientData("no paired samples");
  std::map<PromptId, OutcomeTally> per_prompt;
  for (const auto& r : samples.records) per_prompt[r.prompt].add(compare(r.score_a, r.score_b, tol));
  WinRateReport out{samples.model_a, samples.model_b, 0.0, 0.0, 0.0, samples.size()};
  for (const auto& entry : prompts.entries()) {
    if (entry.weight == 0.0) continue;
    const auto it = per_prompt.find(entry.id);
    if (it == per_prompt.end()) {
      throw InsufficientData("no samples for prompt " + std::to_string(index_of(entry.id)));
    }
    const auto rates = make_win_rate_report({}, {}, it->second);
    out.win_rate += entry.weight * rates.win_rate;
    out.loss_rate += entry.weight * rates.loss_rate;
    out.tie_rate += entry.weight * rates.tie_rate;
  }
  return out;
}

double average_win_rate(std::span<const WinRateReport> reports, const std::string& model) {
  std::set<std::string> others;
  for (const auto& r : reports) {
    others.insert(r.model_a);
    others.insert(r.model_b);
  }
  if (!others.erase(model)) throw ConfigError("no reports involve model " + model);
  if (others.empty()) throw ConfigError("model " + model + " has no opponents");

  double total = 0.0;
  for (const auto& opponent : others) {
    const WinRateReport* forward = nullptr;
    const WinRateReport* backward = nullptr;
    for (const auto& r : reports) {
      if (r.model_a == model && r.model_b == opponent && !forward) forward = &r;
      if (r.model_a == opponent && r.model_b == model && !backward) backward = &r;
    }
    if (forward) {
      total += forward->win_rate;
    } else if (backward) {
      total += backward->loss_rate;
    } else {
      throw ConfigError("no report for " + model + " against " + opponent);
    }
  }
  return total / static_cast<double>(others.size());
}

double normal_critical_value(double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0,1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + 0.5 * level);
}

Interval wald_ci(double p, std::uint64_t n, double level) {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("proportion must lie in [0,1]");
  if (n < 1) throw DomainError("interval needs at least one observation");
  const double half = normal_critical_value(level) * std::sqrt(p * (1.0 - p) / static_cast<double>(n));
  return {std::clamp(p - half, 0.0, 1.0), std::clamp(p + half, 0.0, 1.0)};
}

ZTest two_proportion_z_test(double p1, std::uint64_t n1, double p2, std::uint64_t n2) {
  if (n1 < 1 || n2 < 1) throw DomainError("z-test needs at least one observation per group");
  if (!(p1 >= 0.0 && p1 <= 1.0) || !(p2 >= 0.0 && p2 <= 1.0)) throw DomainError("proportions must lie in [0,1]");
  if (p1 == p2) return {0.0, 1.0};
  const double a = static_cast<double>(n1);
  const double b = static_cast<double>(n2);
  const double pooled = (p1 * a + p2 * b) / (a + b);
  const double var = pooled * (1.0 - pooled) * (1.0 / a + 1.0 / b);
  if (!(var > 0.0)) throw DegenerateData("pooled variance is zero for distinct proportions");
  const double z = (p1 - p2) / std::sqrt(var);
  return {z, std::erfc(std::abs(z) / std::numbers::sqrt2)};
}

int RankTable::rank_of(const std::string& model) const {
  for (const auto& row : rows) {
    if (row.model == model) return row.rank;
  }
  throw LookupError("model " + model + " not in rank table");
}

RankTable rank_from_cis(std::span<const RankEntry> entries) {
  RankTable table;
  table.rows.reserve(entries.size());
  for (const auto& e : entries) {
    int above = 0;
    for (const auto& other : entries) {
      if (other.ci.low > e.ci.high) ++above;
    }
    table.rows.push_back({e.model, e.average_win_rate, e.ci, 1 + above});
  }
  return table;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw InsufficientData("percentile of an empty set");
  if (!(q >= 0.0 && q <= 1.0)) throw DomainError("percentile rank must lie in [0,1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

ErrorCurve error_curve(const PairedSampleSet& pool, std::span<const std::size_t> sizes, std::size_t n_subsamples,
                       std::uint64_t seed, unsigned threads) {
  if (pool.empty()) throw InsufficientData("empty sample pool");
  if (n_subsamples < 1) throw DomainError("need at least one subsample");
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    if (sizes[k] < 1 || sizes[k] > pool.size()) {
      throw DomainError("subsample size " + std::to_string(sizes[k]) + " outside [1, " + std::to_string(pool.size()) +
                        "]");
    }
    if (k > 0 && sizes[k] <= sizes[k - 1]) throw DomainError("subsample sizes must be strictly increasing");
  }

  ErrorCurve curve;
  curve.ground_truth = mean_score_difference(pool);
  curve.n_subsamples = n_subsamples;
  curve.points.resize(sizes.size());

  std::vector<double> diffs(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) diffs[i] = pool.records[i].difference();

  const NoiseSource source(seed, NoiseDomain::Subsampling);
  parallel_for(sizes.size(), threads, [&](std::size_t k) {
    const std::size_t size = sizes[k];
    std::vector<std::uint32_t> index(pool.size());
    std::iota(index.begin(), index.end(), 0u);
    std::vector<double> errors(n_subsamples);
    for (std::size_t s = 0; s < n_subsamples; ++s) {
      KeyedStream stream(source, NoiseKey{static_cast<std::uint32_t>(k), {static_cast<std::uint32_t>(s), 0}, 0});
      // Partial Fisher-Yates: the first `size` slots become the subsample.
      double sum = 0.0;
      for (std::size_t i = 0; i < size; ++i) {
        const std::size_t j = i + stream.next_below(pool.size() - i);
        std::swap(index[i], index[j]);
        sum += diffs[index[i]];
      }
      errors[s] = std::abs(sum / static_cast<double>(size) - curve.ground_truth);
    }
    ErrorPoint& point = curve.points[k];
    point.size = size;
    point.mean_abs_error = std::accumulate(errors.begin(), errors.end(), 0.0) / static_cast<double>(n_subsamples);
    point.ci_low = percentile(errors, 0.025);
    point.ci_high = percentile(errors, 0.975);
  });
  return curve;
}

double size_at_error(const ErrorCurve& curve, double target_error) {
  const auto& pts = curve.points;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (pts[k].mean_abs_error > target_error) continue;
    if (k == 0) return static_cast<double>(pts[0].size);
    const double e0 = pts[k - 1].mean_abs_error;
    const double e1 = pts[k].mean_abs_error;
    const double n0 = static_cast<double>(pts[k - 1].size);
    const double n1 = static_cast<double>(pts[k].size);
    return n0 + (e0 - target_error) / (e0 - e1) * (n1 - n0);
  }
  throw UnreachableTarget("curve never reaches error " + std::to_string(target_error));
}

double sample_savings(const ErrorCurve& coupled, const ErrorCurve& independent, double target_error) {
  if (coupled.points.size() != independent.points.size()) throw ConfigError("error curves use different size grids");
  for (std::size_t k = 0; k < coupled.points.size(); ++k) {
    if (coupled.points[k].size != independent.points[k].size) {
      throw ConfigError("error curves use different size grids");
    }
  }
  return 1.0 - size_at_error(coupled, target_error) / size_at_error(independent, target_error);
}

}  // namespace cagen
