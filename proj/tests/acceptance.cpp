// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "cagen/estimators.hpp"
#include "cagen/experiment.hpp"
#include "cagen/oracle.hpp"
#include "cagen/suites.hpp"

using namespace cagen;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20240901;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  const char* id;
  const char* title;
  double time_limit_s;  // <= 0: no limit
  std::function<Outcome()> check;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Outcome a1_appendix() {
  const auto t = oracle::appendix_example();
  const double independent[] = {0.1545, 0.15675, 0.16225};
  const double coupled[] = {0.0525, 0.0225, 0.03};
  double worst = 0.0;
  for (int k = 0; k < 3; ++k) {
    worst = std::max({worst, std::abs(t.independent[k] - independent[k]), std::abs(t.coupled[k] - coupled[k])});
  }
  const bool order_ok = t.independent_order == std::array<std::size_t, 3>{2, 1, 0} &&
                        t.coupled_order == std::array<std::size_t, 3>{0, 2, 1};
  return {worst <= 1e-12 && order_ok,
          "max |error| " + fmt("%.3g", worst) + (order_ok ? ", rankings m3>m2>m1 vs m1>m3>m2" : ", ranking mismatch")};
}

Outcome a2_closed_form_win_rates() {
  KeyedStream rng(NoiseSource(kSeed, NoiseDomain::Instances), NoiseKey{0, {0, 0}, 2});
  int checks = 0, failures = 0;
  double worst_z = 0.0;
  for (std::uint32_t k = 0; k < 25; ++k) {
    const oracle::TwoTokenInstance inst{rng.next_uniform(0.05, 0.95), rng.next_uniform(0.05, 0.95)};
    const auto cf = oracle::closed_form_win_rates(inst);
    const auto s = oracle::make_two_token_setup(inst);
    for (Coupling c : {Coupling::Coupled, Coupling::Independent}) {
      const auto r = oracle::mc_reference(s.m, s.m_prime, s.setup, c, 100'000, kSeed + k);
      const auto& exact = c == Coupling::Coupled ? cf.coupled : cf.independent;
      for (auto [est, truth] : {std::pair{r.win_rate, exact.win_m}, std::pair{r.loss_rate, exact.win_m_prime}}) {
        ++checks;
        const double err = std::abs(est.value - truth);
        // A zero-probability cell has a zero SE; any occurrence then fails.
        const bool ok = est.se > 0.0 ? err <= 4.0 * est.se : err == 0.0;
        failures += !ok;
        if (est.se > 0.0) worst_z = std::max(worst_z, err / est.se);
      }
    }
  }
  return {failures == 0, std::to_string(checks - failures) + "/" + std::to_string(checks) +
                             " statistics within 4 SE, max |z| " + fmt("%.2f", worst_z)};
}

Outcome a3_sample_savings() {
  const auto v = oracle::closed_form_variances({0.6, 0.7});
  const bool exact = std::abs(v.var_coupled - 0.09) <= 1e-12 && std::abs(v.var_independent - 0.45) <= 1e-12 &&
                     std::abs(v.covariance - 0.18) <= 1e-12;
  const auto s = oracle::make_two_token_setup({0.6, 0.7});
  const std::vector<std::size_t> sizes{50, 100, 200, 300, 500, 750, 1000, 1500, 2000, 3000, 5000};
  const auto curves = suites::run_error_curves(s.m, s.m_prime, s.setup, 10'000, sizes, 1000, kSeed, 1);
  bool below = true;
  for (std::size_t k = 0; k < sizes.size(); ++k) {
    below = below && curves.coupled.points[k].mean_abs_error < curves.independent.points[k].mean_abs_error;
  }
  double savings = 0.0;
  bool reached = true;
  try {
    savings = sample_savings(curves.coupled, curves.independent, 0.02);
  } catch (const std::exception&) {
    reached = false;
  }
  std::string detail = std::string(exact ? "exact variances 0.09/0.45/0.18" : "exact variances WRONG") +
                       (below ? ", coupled below independent at all sizes" : ", coupled NOT below at some size") +
                       (reached ? ", savings " + fmt("%.3f", savings) : ", target error unreachable");
  return {exact && below && reached && savings > 0.25, detail};
}

Outcome from_suite(const suites::SuiteReport& r, std::size_t required) {
  return {r.passed() >= required,
          std::to_string(r.passed()) + "/" + std::to_string(r.instances.size()) + " instances pass"};
}

Outcome a4_variance_identity() {
  const auto r = suites::verify_prop1({kSeed, 100'000, 1});
  return from_suite(r, r.instances.size());
}

Outcome a5_stability() {
  const auto r = suites::verify_stability({kSeed, 100'000, 1});
  return from_suite(r, r.instances.size());
}

Outcome a6_marginals() {
  const auto r = suites::verify_marginals({kSeed, 100'000, 1});
  return from_suite(r, r.instances.size());
}

Outcome a7_ties() {
  const auto r = suites::verify_prop5({kSeed, 100'000, 1});
  return from_suite(r, 18);
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

Outcome a8_determinism() {
  const fs::path root = fs::temp_directory_path() / "cagen_acceptance_determinism";
  fs::remove_all(root);
  const std::string cli = CAGEN_CLI_PATH;
  const std::string configs = std::string(CAGEN_SOURCE_DIR) + "/configs/";
  const std::vector<std::string> commands{
      "verify prop4 --replicates 20000",
      "verify marginals --replicates 20000",
      "reproduce-appendix --replicates 100000",
      "error-curve --config " + configs + "two_token.json --subsamples 200",
      "rank --config " + configs + "perturbed.json",
      "rank --config " + configs + "ranking_flip.json --replicates 100000",
  };
  int compared = 0;
  for (std::size_t c = 0; c < commands.size(); ++c) {
    std::vector<fs::path> dirs;
    for (const char* threads : {"1", "4", "1"}) {
      const fs::path dir = root / (std::to_string(c) + "_" + std::to_string(dirs.size()));
      fs::create_directories(dir);
      const std::string line =
          cli + " " + commands[c] + " --threads " + threads + " --out " + dir.string() + " > /dev/null 2>&1";
      if (std::system(line.c_str()) != 0) return {false, "command failed: " + commands[c]};
      dirs.push_back(dir);
    }
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      const auto name = entry.path().filename();
      for (std::size_t k = 1; k < dirs.size(); ++k) {
        if (slurp(entry.path()) != slurp(dirs[k] / name)) {
          return {false, "output differs: " + commands[c] + " -> " + name.string()};
        }
        ++compared;
      }
    }
  }
  fs::remove_all(root);
  return {compared > 0, std::to_string(commands.size()) + " commands, " + std::to_string(compared) +
                            " file comparisons identical across reruns and thread counts 1/4"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"A1", "three-model example closed forms", 1.0, a1_appendix},
      {"A2", "closed-form win rates vs Monte Carlo", 30.0, a2_closed_form_win_rates},
      {"A3", "two-token variances and sample savings", 120.0, a3_sample_savings},
      {"A4", "variance identity on Markov instances", 120.0, a4_variance_identity},
      {"A5", "counterfactual stability", 60.0, a5_stability},
      {"A6", "marginal preservation", 30.0, a6_marginals},
      {"A7", "tie inflation under coupling", 120.0, a7_ties},
      {"A8", "CLI determinism", 0.0, a8_determinism},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = c.time_limit_s <= 0.0 || secs < c.time_limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::ostringstream line;
    line << (pass ? "PASS " : "FAIL ") << c.id << " " << c.title << ": " << o.detail << " ["
         << fmt("%.2f", secs) << " s";
    if (c.time_limit_s > 0.0) line << " / limit " << fmt("%.0f", c.time_limit_s) << " s";
    line << (in_time ? "" : ", TOO SLOW") << "]";
    std::cout << line.str() << std::endl;
  }
  std::cout << (failed == 0 ? "ALL CRITERIA PASS" : std::to_string(failed) + " CRITERIA FAILED") << std::endl;
  return failed == 0 ? 0 : 1;
}
