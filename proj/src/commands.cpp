#include "cagen/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "cagen/config.hpp"
#include "cagen/errors.hpp"
#include "cagen/estimators.hpp"
#include "cagen/experiment.hpp"
#include "cagen/oracle.hpp"
#include "cagen/suites.hpp"

namespace cagen::cli {

using nlohmann::json;
namespace fs = std::filesystem;

std::string format_double(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> replicates;
  std::optional<std::size_t> subsamples;
  std::optional<double> level;
  std::string out_dir = ".";
  unsigned threads = 1;
};

void add_common(CLI::App& cmd, CommonOptions& o, bool with_config) {
  if (with_config) cmd.add_option("--config", o.config, "Experiment configuration file (JSON)");
  cmd.add_option("--seed", o.seed, "Master seed");
  cmd.add_option("--replicates", o.replicates, "Replicates per run");
  cmd.add_option("--out", o.out_dir, "Output directory")->capture_default_str();
  cmd.add_option("--threads", o.threads, "Worker threads (0 = all cores); results do not depend on it")
      ->capture_default_str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << content;
}

void write_json(const fs::path& path, const json& doc) { write_file(path, doc.dump(2) + "\n"); }

// ---------------------------------------------------------------- verify

int cmd_verify(const std::string& suite, const CommonOptions& o, std::ostream& out, std::ostream& err) {
  suites::SuiteOptions opts;
  opts.threads = o.threads;
  if (!o.config.empty()) {
    const auto cfg = load_config(o.config);
    opts.seed = cfg.seed;
    opts.replicates = cfg.replicates;
  }
  if (o.seed) opts.seed = *o.seed;
  if (o.replicates) opts.replicates = *o.replicates;

  const auto report = suites::run_suite(suite, opts);
  if (!report) {
    err << "unknown suite '" << suite << "'; expected one of:";
    for (const auto& name : suites::suite_names()) err << ' ' << name;
    err << '\n';
    return kExitUsage;
  }
  const fs::path path = fs::path(o.out_dir) / ("verify_" + suite + ".json");
  write_json(path, report->to_json());
  for (const auto& inst : report->instances) out << (inst.pass ? "PASS " : "FAIL ") << inst.name << '\n';
  out << suite << ": " << report->passed() << "/" << report->instances.size() << " instances passed -> "
      << (report->pass ? "PASS" : "FAIL") << '\n'
      << "report: " << path.string() << '\n';
  return report->pass ? kExitPass : kExitFailure;
}

// ---------------------------------------------------------------- appendix

std::vector<NamedModel> two_prompt_models(const std::array<std::array<double, 3>, 2>& probs, const Vocabulary& vocab) {
  std::vector<NamedModel> models;
  for (std::size_t k = 0; k < 3; ++k) {
    std::map<PromptId, NextTokenDistribution> rows;
    for (std::uint32_t q = 0; q < 2; ++q) {
      rows.emplace(PromptId{q}, NextTokenDistribution({probs[q][k], 1.0 - probs[q][k], 0.0}));
    }
    models.push_back({"m" + std::to_string(k + 1), ModelSpec::categorical(vocab, std::move(rows))});
  }
  return models;
}

int cmd_reproduce_appendix(const CommonOptions& o, std::ostream& out) {
  const std::array<double, 3> expected_independent{0.1545, 0.15675, 0.16225};
  const std::array<double, 3> expected_coupled{0.0525, 0.0225, 0.03};
  const auto table = oracle::appendix_example();

  bool exact = true;
  for (std::size_t k = 0; k < 3; ++k) {
    exact = exact && std::abs(table.independent[k] - expected_independent[k]) <= 1e-12 &&
            std::abs(table.coupled[k] - expected_coupled[k]) <= 1e-12;
  }

  const Vocabulary vocab(3, TokenId{2});
  const auto models = two_prompt_models(table.probs, vocab);
  const std::set<std::vector<TokenId>> favored{{TokenId{0}}};
  const ExperimentSetup setup{PromptSet::uniform({PromptId{0}, PromptId{1}}),
                              Scorer::correctness({{PromptId{0}, favored}, {PromptId{1}, favored}}),
                              GenerationConfig{2, 1.0, Sampler::GumbelMax}};
  const std::size_t n = o.replicates.value_or(1'000'000);
  const NoiseSource noise(o.seed.value_or(20240901), NoiseDomain::Oracle);

  json report;
  bool in_band = true;
  auto names = [&](const std::array<std::size_t, 3>& order) {
    json list = json::array();
    for (std::size_t k : order) list.push_back(models[k].name);
    return list;
  };
  out << "model   prompt_q  prompt_q'  independent  coupled\n";
  for (std::size_t k = 0; k < 3; ++k) {
    out << models[k].name << "      " << table.probs[0][k] << "      " << table.probs[1][k] << "      "
        << format_double(table.independent[k]) << "  " << format_double(table.coupled[k]) << '\n';
  }
  for (Coupling coupling : {Coupling::Independent, Coupling::Coupled}) {
    const auto result = run_all_pairs(models, setup, coupling, n, noise, 0.0, o.threads);
    const auto& exact_row = coupling == Coupling::Coupled ? table.coupled : table.independent;
    json rows = json::array();
    for (std::size_t k = 0; k < 3; ++k) {
      const double dn = static_cast<double>(n);
      const double mean = result.avg_win_sum[k] / dn;
      const double var = std::max(0.0, result.avg_win_sum_sq[k] / dn - mean * mean);
      const double se = std::sqrt(var / (dn - 1.0));
      const bool ok = std::abs(mean - exact_row[k]) <= 3.0 * se;
      in_band = in_band && ok;
      rows.push_back({{"model", models[k].name},
                      {"closed_form", exact_row[k]},
                      {"monte_carlo", mean},
                      {"se", se},
                      {"within_3se", ok}});
      out << to_string(coupling) << " MC " << models[k].name << ": " << format_double(mean) << " +- "
          << format_double(se) << (ok ? "  in band" : "  OUT OF BAND") << '\n';
    }
    report["monte_carlo"][std::string(to_string(coupling))] = std::move(rows);
  }

  report["probabilities"] = {{"q", table.probs[0]}, {"q_prime", table.probs[1]}};
  report["closed_form"] = {{"independent", table.independent}, {"coupled", table.coupled}};
  report["expected"] = {{"independent", expected_independent}, {"coupled", expected_coupled}};
  report["ranking"] = {{"independent", names(table.independent_order)}, {"coupled", names(table.coupled_order)}};
  report["rank_flip"] = table.rankings_differ();
  report["exact_match"] = exact;
  report["monte_carlo_in_band"] = in_band;
  report["replicates"] = n;
  const bool pass = exact && in_band && table.rankings_differ();
  report["pass"] = pass;

  const fs::path path = fs::path(o.out_dir) / "appendix.json";
  write_json(path, report);
  out << "independent ranking: " << report["ranking"]["independent"].dump() << '\n'
      << "coupled ranking:     " << report["ranking"]["coupled"].dump() << '\n'
      << "rank flip: " << (table.rankings_differ() ? "yes" : "no") << '\n'
      << "closed forms match to 1e-12: " << (exact ? "yes" : "no") << '\n'
      << "report: " << path.string() << '\n';
  return pass ? kExitPass : kExitFailure;
}

// ---------------------------------------------------------------- error curve

int cmd_error_curve(const CommonOptions& o, std::ostream& out) {
  if (o.config.empty()) throw ConfigError("error-curve requires --config");
  const auto cfg = load_config(o.config);
  if (cfg.models.size() < 2) throw ConfigError("error-curve needs two models");
  const auto& settings = cfg.error_curve;
  const NamedModel& a = settings.pair.empty() ? cfg.models[0] : cfg.model(settings.pair[0]);
  const NamedModel& b = settings.pair.empty() ? cfg.models[1] : cfg.model(settings.pair[1]);
  const std::size_t pool = o.replicates.value_or(cfg.replicates);
  const std::size_t subsamples = o.subsamples.value_or(settings.subsamples);
  const std::uint64_t seed = o.seed.value_or(cfg.seed);

  std::vector<std::size_t> sizes = settings.sizes;
  if (sizes.empty()) {
    for (std::size_t s : {50, 100, 200, 300, 500, 750, 1000, 1500, 2000, 3000, 5000}) {
      if (s <= pool) sizes.push_back(s);
    }
    if (sizes.empty()) throw DomainError("pool of " + std::to_string(pool) + " pairs is smaller than every grid size");
  }
  for (std::size_t s : sizes) {
    if (s > pool) throw DomainError("subsample size " + std::to_string(s) + " exceeds pool of " + std::to_string(pool));
  }

  const auto curves = suites::run_error_curves(a, b, cfg.setup, pool, sizes, subsamples, seed, o.threads);

  std::string csv = "size,mean_abs_error,ci_low,ci_high,regime\n";
  auto emit = [&](const ErrorCurve& curve, const char* regime) {
    for (const auto& p : curve.points) {
      csv += std::to_string(p.size) + ',' + format_double(p.mean_abs_error) + ',' + format_double(p.ci_low) + ',' +
             format_double(p.ci_high) + ',' + regime + '\n';
    }
  };
  emit(curves.coupled, "coupled");
  emit(curves.independent, "independent");
  const fs::path csv_path = fs::path(o.out_dir) / "error_curve.csv";
  write_file(csv_path, csv);

  json summary;
  summary["pair"] = {a.name, b.name};
  summary["pool_size"] = pool;
  summary["subsamples"] = subsamples;
  summary["ground_truth"] = {{"coupled", curves.coupled.ground_truth},
                             {"independent", curves.independent.ground_truth}};
  summary["target_error"] = settings.target_error;
  try {
    const double savings = sample_savings(curves.coupled, curves.independent, settings.target_error);
    summary["sample_savings"] = savings;
    out << "sample savings at error " << format_double(settings.target_error) << ": " << format_double(savings)
        << '\n';
  } catch (const UnreachableTarget& e) {
    summary["sample_savings"] = nullptr;
    summary["sample_savings_note"] = e.what();
    out << "sample savings: target error not reached (" << e.what() << ")\n";
  }
  const fs::path json_path = fs::path(o.out_dir) / "error_curve.json";
  write_json(json_path, summary);
  out << "curves: " << csv_path.string() << "\nsummary: " << json_path.string() << '\n';
  return kExitPass;
}

// ---------------------------------------------------------------- rank

int cmd_rank(const CommonOptions& o, std::ostream& out) {
  if (o.config.empty()) throw ConfigError("rank requires --config");
  const auto cfg = load_config(o.config);
  const auto& models = cfg.models;
  const std::size_t m = models.size();
  if (m < 2) throw ConfigError("rank needs at least two models");
  const std::size_t n = o.replicates.value_or(cfg.replicates);
  const double level = o.level.value_or(cfg.level);
  const NoiseSource noise(o.seed.value_or(cfg.seed));
  const double tol = cfg.setup.scorer.default_tolerance();

  std::string pairs_csv = "regime,model_a,model_b,win_rate,win_ci_low,win_ci_high,loss_rate,tie_rate,n\n";
  std::string table_csv = "regime,model,average_win_rate,ci_low,ci_high,rank\n";
  json report;
  report["replicates"] = n;
  report["level"] = level;
  std::map<Coupling, std::vector<std::vector<double>>> win_rates;

  for (Coupling coupling : cfg.regimes) {
    const std::string regime(to_string(coupling));
    const auto result = run_all_pairs(models, cfg.setup, coupling, n, noise, tol, o.threads);
    auto& wins = win_rates[coupling];
    wins.assign(m, std::vector<double>(m, 0.0));
    json pair_list = json::array();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (i == j) continue;
        const auto r = make_win_rate_report(models[i].name, models[j].name, result.tallies[i][j]);
        const auto ci = wald_ci(r.win_rate, r.n, level);
        wins[i][j] = r.win_rate;
        pairs_csv += regime + ',' + r.model_a + ',' + r.model_b + ',' + format_double(r.win_rate) + ',' +
                     format_double(ci.low) + ',' + format_double(ci.high) + ',' + format_double(r.loss_rate) + ',' +
                     format_double(r.tie_rate) + ',' + std::to_string(r.n) + '\n';
        pair_list.push_back({{"model_a", r.model_a},
                             {"model_b", r.model_b},
                             {"win_rate", r.win_rate},
                             {"win_ci", {ci.low, ci.high}},
                             {"loss_rate", r.loss_rate},
                             {"tie_rate", r.tie_rate},
                             {"n", r.n}});
      }
    }

    // Normal interval for the mean of the per-replicate average win indicator.
    const double z = normal_critical_value(level);
    const double dn = static_cast<double>(n);
    std::vector<RankEntry> entries;
    for (std::size_t i = 0; i < m; ++i) {
      const double mean = result.avg_win_sum[i] / dn;
      const double var = std::max(0.0, result.avg_win_sum_sq[i] / dn - mean * mean);
      const double half = n > 1 ? z * std::sqrt(var / (dn - 1.0)) : 0.0;
      entries.push_back({models[i].name, mean, {std::clamp(mean - half, 0.0, 1.0), std::clamp(mean + half, 0.0, 1.0)}});
    }
    const auto table = rank_from_cis(entries);
    json rank_list = json::array();
    out << regime << " ranking:\n";
    for (const auto& row : table.rows) {
      table_csv += regime + ',' + row.model + ',' + format_double(row.average_win_rate) + ',' +
                   format_double(row.ci.low) + ',' + format_double(row.ci.high) + ',' + std::to_string(row.rank) + '\n';
      rank_list.push_back({{"model", row.model},
                           {"average_win_rate", row.average_win_rate},
                           {"ci", {row.ci.low, row.ci.high}},
                           {"rank", row.rank}});
      out << "  " << row.model << "  avg win " << format_double(row.average_win_rate) << "  rank " << row.rank << '\n';
    }
    report["regimes"][regime] = {{"pairs", std::move(pair_list)}, {"ranking", std::move(rank_list)}};
  }

  if (win_rates.contains(Coupling::Coupled) && win_rates.contains(Coupling::Independent)) {
    std::string z_csv = "model_a,model_b,win_coupled,win_independent,z,p_value\n";
    json tests = json::array();
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (i == j) continue;
        const double pc = win_rates[Coupling::Coupled][i][j];
        const double pi = win_rates[Coupling::Independent][i][j];
        json entry = {{"model_a", models[i].name}, {"model_b", models[j].name}, {"win_coupled", pc},
                      {"win_independent", pi}};
        std::string z_text = "", p_text = "";
        try {
          const auto t = two_proportion_z_test(pc, n, pi, n);
          entry["z"] = t.z;
          entry["p_value"] = t.p_value;
          z_text = format_double(t.z);
          p_text = format_double(t.p_value);
        } catch (const DegenerateData&) {
          entry["z"] = nullptr;
          entry["p_value"] = nullptr;
        }
        tests.push_back(std::move(entry));
        z_csv += models[i].name + ',' + models[j].name + ',' + format_double(pc) + ',' + format_double(pi) + ',' +
                 z_text + ',' + p_text + '\n';
      }
    }
    report["z_tests"] = std::move(tests);
    write_file(fs::path(o.out_dir) / "rank_ztests.csv", z_csv);
  }

  write_file(fs::path(o.out_dir) / "rank_pairs.csv", pairs_csv);
  write_file(fs::path(o.out_dir) / "rank_table.csv", table_csv);
  write_json(fs::path(o.out_dir) / "rank.json", report);
  out << "report: " << (fs::path(o.out_dir) / "rank.json").string() << '\n';
  return kExitPass;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coupled autoregressive generation: paired evaluation of token-level models under shared noise", "cagen"};
  app.require_subcommand(1);

  CommonOptions verify_opts, appendix_opts, curve_opts, rank_opts;
  std::string suite;

  auto* verify = app.add_subcommand("verify", "Run a property suite (prop1|prop2|prop4|prop5|stability|marginals)");
  verify->add_option("suite", suite, "Suite name")->required();
  add_common(*verify, verify_opts, true);

  auto* appendix = app.add_subcommand("reproduce-appendix", "Closed-form and Monte Carlo three-model ranking example");
  add_common(*appendix, appendix_opts, false);

  auto* curve = app.add_subcommand("error-curve", "Estimation error vs sample size under both regimes");
  add_common(*curve, curve_opts, true);
  curve->add_option("--subsamples", curve_opts.subsamples, "Sub-samplings per size (default 1000)");

  auto* rank = app.add_subcommand("rank", "Pairwise win rates, z-tests and CI-based ranks");
  add_common(*rank, rank_opts, true);
  rank->add_option("--level", rank_opts.level, "Confidence level (default 0.95)");

  std::vector<std::string> argv_tail(args.begin() + (args.empty() ? 0 : 1), args.end());
  std::reverse(argv_tail.begin(), argv_tail.end());
  try {
    app.parse(argv_tail);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitPass;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n' << app.help();
    return kExitUsage;
  }

  try {
    if (*verify) return cmd_verify(suite, verify_opts, out, err);
    if (*appendix) return cmd_reproduce_appendix(appendix_opts, out);
    if (*curve) return cmd_error_curve(curve_opts, out);
    if (*rank) return cmd_rank(rank_opts, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace cagen::cli
