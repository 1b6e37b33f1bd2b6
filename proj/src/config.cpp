#include "cagen/config.hpp"

#include <fstream>
#include <set>

#include "cagen/errors.hpp"

namespace cagen {

using nlohmann::json;

const NamedModel& ExperimentConfig::model(const std::string& name) const {
  for (const auto& m : models) {
    if (m.name == name) return m;
  }
  throw ConfigError("unknown model '" + name + "'");
}

namespace {

void expect_keys(const json& obj, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : obj.items()) {
    if (!ok.contains(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(where + ": missing '" + key + "'");
  return *it;
}

const json& require_array(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_array()) throw ConfigError(where + ": '" + key + "' must be an array");
  return v;
}

TokenId token_of(const json& v, const Vocabulary& vocab, const std::string& where) {
  const auto t = v.get<std::uint32_t>();
  if (t >= vocab.size()) throw ConfigError(where + ": token " + std::to_string(t) + " outside vocabulary");
  return TokenId{t};
}

std::vector<TokenId> tokens_of(const json& v, const Vocabulary& vocab, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": token sequence must be an array");
  std::vector<TokenId> out;
  for (const auto& t : v) out.push_back(token_of(t, vocab, where));
  return out;
}

NextTokenDistribution row_of(const json& v, const std::string& where) {
  if (!v.is_array()) throw ConfigError(where + ": probabilities must be an array");
  try {
    return NextTokenDistribution(v.get<std::vector<double>>());
  } catch (const InvalidDistribution& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

PromptSet parse_prompts(const json& v) {
  if (!v.is_array() || v.empty()) throw ConfigError("prompts: expected a non-empty array");
  std::vector<PromptSet::Entry> entries;
  for (const auto& p : v) {
    if (p.is_number_unsigned()) {
      entries.push_back({PromptId{p.get<std::uint32_t>()}, 1.0});
    } else {
      expect_keys(p, "prompts[]", {"id", "weight"});
      entries.push_back({PromptId{require(p, "id", "prompts[]").get<std::uint32_t>()}, p.value("weight", 1.0)});
    }
  }
  return PromptSet(std::move(entries));
}

ModelSpec parse_model(const json& m, const Vocabulary& vocab, const std::vector<NamedModel>& defined,
                      const std::string& where) {
  const auto type = require(m, "type", where).get<std::string>();
  if (type == "point_mass") {
    expect_keys(m, where, {"name", "type", "tokens"});
    std::map<PromptId, TokenId> tokens;
    for (const auto& e : require_array(m, "tokens", where)) {
      expect_keys(e, where + ".tokens[]", {"prompt", "token"});
      tokens[PromptId{require(e, "prompt", where).get<std::uint32_t>()}] =
          token_of(require(e, "token", where), vocab, where);
    }
    return ModelSpec::point_mass(vocab, std::move(tokens));
  }
  if (type == "categorical") {
    expect_keys(m, where, {"name", "type", "rows"});
    std::map<PromptId, NextTokenDistribution> rows;
    for (const auto& e : require_array(m, "rows", where)) {
      expect_keys(e, where + ".rows[]", {"prompt", "probs"});
      rows.emplace(PromptId{require(e, "prompt", where).get<std::uint32_t>()}, row_of(require(e, "probs", where), where));
    }
    return ModelSpec::categorical(vocab, std::move(rows));
  }
  if (type == "markov") {
    expect_keys(m, where, {"name", "type", "initial", "transitions"});
    std::map<PromptId, NextTokenDistribution> initial;
    for (const auto& e : require_array(m, "initial", where)) {
      expect_keys(e, where + ".initial[]", {"prompt", "probs"});
      initial.emplace(PromptId{require(e, "prompt", where).get<std::uint32_t>()},
                      row_of(require(e, "probs", where), where));
    }
    std::map<TokenId, NextTokenDistribution> transitions;
    for (const auto& e : require_array(m, "transitions", where)) {
      expect_keys(e, where + ".transitions[]", {"token", "probs"});
      transitions.emplace(token_of(require(e, "token", where), vocab, where), row_of(require(e, "probs", where), where));
    }
    return ModelSpec::markov(vocab, std::move(initial), std::move(transitions));
  }
  if (type == "sequence_table") {
    expect_keys(m, where, {"name", "type", "rows", "fallback"});
    std::map<std::pair<PromptId, std::vector<TokenId>>, NextTokenDistribution> rows;
    for (const auto& e : require_array(m, "rows", where)) {
      expect_keys(e, where + ".rows[]", {"prompt", "prefix", "probs"});
      rows.emplace(std::pair{PromptId{require(e, "prompt", where).get<std::uint32_t>()},
                             tokens_of(require(e, "prefix", where), vocab, where)},
                   row_of(require(e, "probs", where), where));
    }
    std::optional<NextTokenDistribution> fallback;
    if (m.contains("fallback")) fallback = row_of(m["fallback"], where);
    return ModelSpec::sequence_table(vocab, std::move(rows), std::move(fallback));
  }
  if (type == "perturbed") {
    expect_keys(m, where, {"name", "type", "base", "epsilon", "seed"});
    const auto base = require(m, "base", where).get<std::string>();
    for (const auto& d : defined) {
      if (d.name == base) {
        return perturb(d.spec, require(m, "epsilon", where).get<double>(), m.value("seed", std::uint64_t{0}));
      }
    }
    throw ConfigError(where + ": base model '" + base + "' must be defined earlier");
  }
  throw ConfigError(where + ": unknown model type '" + type + "'");
}

Scorer parse_scorer(const json& s, const Vocabulary& vocab) {
  const std::string where = "scorer";
  const auto type = require(s, "type", where).get<std::string>();
  if (type == "correctness") {
    expect_keys(s, where, {"type", "accepted"});
    std::map<PromptId, std::set<std::vector<TokenId>>> accepted;
    for (const auto& e : require_array(s, "accepted", where)) {
      expect_keys(e, where + ".accepted[]", {"prompt", "sequences"});
      auto& set = accepted[PromptId{require(e, "prompt", where).get<std::uint32_t>()}];
      for (const auto& seq : require_array(e, "sequences", where)) set.insert(tokens_of(seq, vocab, where));
    }
    return Scorer::correctness(std::move(accepted));
  }
  if (type == "reward_table") {
    expect_keys(s, where, {"type", "rewards"});
    std::map<std::pair<PromptId, std::vector<TokenId>>, double> rewards;
    for (const auto& e : require_array(s, "rewards", where)) {
      expect_keys(e, where + ".rewards[]", {"prompt", "sequence", "value"});
      rewards[{PromptId{require(e, "prompt", where).get<std::uint32_t>()},
               tokens_of(require(e, "sequence", where), vocab, where)}] = require(e, "value", where).get<double>();
    }
    return Scorer::reward_table(std::move(rewards));
  }
  if (type == "noisy") {
    expect_keys(s, where, {"type", "base", "scale", "seed"});
    return Scorer::noisy(parse_scorer(require(s, "base", where), vocab), require(s, "scale", where).get<double>(),
                         s.value("seed", std::uint64_t{0}));
  }
  throw ConfigError("scorer: unknown type '" + type + "'");
}

GenerationConfig parse_generation(const json& g) {
  expect_keys(g, "generation", {"sampler", "temperature", "max_steps"});
  GenerationConfig cfg;
  if (g.contains("sampler")) {
    const auto name = g["sampler"].get<std::string>();
    const auto sampler = parse_sampler(name);
    if (!sampler) throw ConfigError("generation: unknown sampler '" + name + "'");
    cfg.sampler = *sampler;
  }
  cfg.temperature = g.value("temperature", 1.0);
  cfg.max_steps = g.value("max_steps", std::size_t{1});
  cfg.validate();
  return cfg;
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
  try {
    expect_keys(doc, "config",
                {"vocabulary", "prompts", "models", "scorer", "generation", "replicates", "seed", "regimes", "level",
                 "error_curve"});
    ExperimentConfig cfg;
    const json& vocab = require(doc, "vocabulary", "config");
    expect_keys(vocab, "vocabulary", {"size", "eos"});
    cfg.vocabulary = Vocabulary(require(vocab, "size", "vocabulary").get<std::size_t>(),
                                TokenId{require(vocab, "eos", "vocabulary").get<std::uint32_t>()});

    const PromptSet prompts = parse_prompts(require(doc, "prompts", "config"));

    std::set<std::string> names;
    for (const auto& m : require_array(doc, "models", "config")) {
      if (!m.is_object()) throw ConfigError("models[]: expected an object");
      const auto name = require(m, "name", "models[]").get<std::string>();
      if (!names.insert(name).second) throw ConfigError("duplicate model name '" + name + "'");
      cfg.models.push_back({name, parse_model(m, cfg.vocabulary, cfg.models, "models." + name)});
    }
    if (cfg.models.empty()) throw ConfigError("config defines no models");

    Scorer scorer = parse_scorer(require(doc, "scorer", "config"), cfg.vocabulary);
    const GenerationConfig generation = doc.contains("generation") ? parse_generation(doc["generation"])
                                                                   : GenerationConfig{};
    cfg.setup = ExperimentSetup{prompts, std::move(scorer), generation};

    cfg.replicates = doc.value("replicates", cfg.replicates);
    if (cfg.replicates < 1) throw ConfigError("replicates must be at least 1");
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.level = doc.value("level", cfg.level);
    if (!(cfg.level > 0.0 && cfg.level < 1.0)) throw ConfigError("level must lie in (0,1)");

    if (doc.contains("regimes")) {
      cfg.regimes.clear();
      for (const auto& r : doc["regimes"]) {
        const auto name = r.get<std::string>();
        if (name == "coupled") {
          cfg.regimes.push_back(Coupling::Coupled);
        } else if (name == "independent") {
          cfg.regimes.push_back(Coupling::Independent);
        } else {
          throw ConfigError("regimes: unknown regime '" + name + "'");
        }
      }
      if (cfg.regimes.empty()) throw ConfigError("regimes: at least one regime required");
    }

    if (doc.contains("error_curve")) {
      const json& ec = doc["error_curve"];
      expect_keys(ec, "error_curve", {"pair", "sizes", "subsamples", "target_error"});
      if (ec.contains("pair")) {
        cfg.error_curve.pair = ec["pair"].get<std::vector<std::string>>();
        if (cfg.error_curve.pair.size() != 2) throw ConfigError("error_curve.pair must name two models");
        for (const auto& name : cfg.error_curve.pair) (void)cfg.model(name);
      }
      if (ec.contains("sizes")) cfg.error_curve.sizes = ec["sizes"].get<std::vector<std::size_t>>();
      cfg.error_curve.subsamples = ec.value("subsamples", cfg.error_curve.subsamples);
      cfg.error_curve.target_error = ec.value("target_error", cfg.error_curve.target_error);
    }
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return parse_config(doc);
}

}  // namespace cagen
