#include "cagen/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "cagen/errors.hpp"
#include "cagen/noise.hpp"

namespace cagen {

PromptSet::PromptSet(std::vector<Entry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw ConfigError("prompt set is empty");
  double total = 0.0;
  std::set<PromptId> seen;
  for (const auto& e : entries_) {
    if (!(e.weight >= 0.0) || !std::isfinite(e.weight)) throw ConfigError("prompt weights must be non-negative");
    if (!seen.insert(e.id).second) throw ConfigError("duplicate prompt id " + std::to_string(index_of(e.id)));
    total += e.weight;
  }
  if (total <= 0.0) throw ConfigError("prompt weights sum to zero");
  for (auto& e : entries_) e.weight /= total;
}

PromptSet PromptSet::uniform(std::vector<PromptId> ids) {
  std::vector<Entry> entries;
  entries.reserve(ids.size());
  for (PromptId id : ids) entries.push_back({id, 1.0});
  return PromptSet(std::move(entries));
}

double PromptSet::weight(PromptId id) const {
  for (const auto& e : entries_) {
    if (e.id == id) return e.weight;
  }
  throw LookupError("unknown prompt " + std::to_string(index_of(id)));
}

PromptId PromptSet::draw(double u) const {
  double cdf = 0.0;
  for (const auto& e : entries_) {
    cdf += e.weight;
    if (e.weight > 0.0 && cdf >= u) return e.id;
  }
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (it->weight > 0.0) return it->id;
  }
  return entries_.back().id;
}

namespace {

void check_row(const Vocabulary& vocab, const NextTokenDistribution& row, const char* what) {
  if (row.size() != vocab.size()) {
    throw ConfigError(std::string(what) + " row has " + std::to_string(row.size()) + " entries, vocabulary has " +
                      std::to_string(vocab.size()));
  }
}

struct Validator {
  const Vocabulary& vocab;

  void operator()(const PointMassModel& m) const {
    for (const auto& [prompt, token] : m.tokens) {
      if (!vocab.contains(token)) throw ConfigError("point-mass token outside vocabulary");
    }
  }

  void operator()(const CategoricalModel& m) const {
    for (const auto& [prompt, row] : m.rows) {
      check_row(vocab, row, "categorical");
      if (row[vocab.eos()] != 0.0) throw ConfigError("categorical rows must put zero mass on eos");
    }
  }

  void operator()(const MarkovModel& m) const {
    auto require_successors = [&](const NextTokenDistribution& row) {
      for (std::size_t t = 0; t < row.size(); ++t) {
        const TokenId token{static_cast<std::uint32_t>(t)};
        if (row[token] > 0.0 && token != vocab.eos() && !m.transitions.contains(token)) {
          throw ConfigError("markov model can emit token " + std::to_string(t) + " but has no transition row for it");
        }
      }
    };
    for (const auto& [prompt, row] : m.initial) {
      check_row(vocab, row, "markov initial");
      require_successors(row);
    }
    for (const auto& [token, row] : m.transitions) {
      if (!vocab.contains(token)) throw ConfigError("markov transition key outside vocabulary");
      check_row(vocab, row, "markov transition");
      require_successors(row);
    }
  }

  void operator()(const SequenceTableModel& m) const {
    check_row(vocab, m.fallback, "sequence-table fallback");
    for (const auto& [context, row] : m.rows) {
      check_row(vocab, row, "sequence-table");
      const auto& prefix = context.second;
      for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (!vocab.contains(prefix[i])) throw ConfigError("sequence-table prefix token outside vocabulary");
        if (prefix[i] == vocab.eos()) throw ConfigError("sequence-table prefix contains eos");
      }
    }
  }
};

template <typename Map>
const auto& lookup_prompt(const Map& rows, PromptId prompt) {
  const auto it = rows.find(prompt);
  if (it == rows.end()) throw LookupError("model has no row for prompt " + std::to_string(index_of(prompt)));
  return it->second;
}

}  // namespace

ModelSpec::ModelSpec(Vocabulary vocab, Variant variant) : vocab_(vocab), variant_(std::move(variant)) {
  std::visit(Validator{vocab_}, variant_);
}

ModelSpec ModelSpec::point_mass(Vocabulary vocab, std::map<PromptId, TokenId> tokens) {
  return ModelSpec(vocab, PointMassModel{std::move(tokens)});
}

ModelSpec ModelSpec::categorical(Vocabulary vocab, std::map<PromptId, NextTokenDistribution> rows) {
  return ModelSpec(vocab, CategoricalModel{std::move(rows)});
}

ModelSpec ModelSpec::markov(Vocabulary vocab, std::map<PromptId, NextTokenDistribution> initial,
                            std::map<TokenId, NextTokenDistribution> transitions) {
  return ModelSpec(vocab, MarkovModel{std::move(initial), std::move(transitions)});
}

ModelSpec ModelSpec::sequence_table(Vocabulary vocab,
                                    std::map<std::pair<PromptId, std::vector<TokenId>>, NextTokenDistribution> rows,
                                    std::optional<NextTokenDistribution> fallback) {
  if (!fallback) {
    std::vector<double> probs(vocab.size(), 1.0 / static_cast<double>(vocab.size() - 1));
    probs[index_of(vocab.eos())] = 0.0;
    fallback = NextTokenDistribution(std::move(probs));
  }
  return ModelSpec(vocab, SequenceTableModel{std::move(rows), std::move(*fallback)});
}

NextTokenDistribution ModelSpec::next_token_distribution(PromptId prompt, const TokenSequence& partial) const {
  if (partial.terminated) throw DomainError("cannot extend a terminated sequence");
  const std::size_t size = vocab_.size();
  return std::visit(
      [&](const auto& m) -> NextTokenDistribution {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, PointMassModel>) {
          return NextTokenDistribution::point_mass(size, lookup_prompt(m.tokens, prompt));
        } else if constexpr (std::is_same_v<T, CategoricalModel>) {
          const auto& row = lookup_prompt(m.rows, prompt);
          if (partial.tokens.empty()) return row;
          return NextTokenDistribution::point_mass(size, vocab_.eos());
        } else if constexpr (std::is_same_v<T, MarkovModel>) {
          const auto& row = lookup_prompt(m.initial, prompt);
          if (partial.tokens.empty()) return row;
          const auto it = m.transitions.find(partial.tokens.back());
          if (it == m.transitions.end()) {
            throw LookupError("markov model has no transition row for token " +
                              std::to_string(index_of(partial.tokens.back())));
          }
          return it->second;
        } else {
          const auto it = m.rows.find({prompt, partial.tokens});
          return it == m.rows.end() ? m.fallback : it->second;
        }
      },
      variant_);
}

std::vector<std::pair<PromptId, TokenSequence>> ModelSpec::table_contexts(const PromptSet& prompts) const {
  std::vector<std::pair<PromptId, TokenSequence>> out;
  for (const auto& entry : prompts.entries()) {
    out.push_back({entry.id, TokenSequence{}});
    if (const auto* markov = std::get_if<MarkovModel>(&variant_)) {
      for (const auto& [token, row] : markov->transitions) out.push_back({entry.id, TokenSequence{{token}, false}});
    } else if (const auto* table = std::get_if<SequenceTableModel>(&variant_)) {
      for (const auto& [context, row] : table->rows) {
        if (context.first == entry.id && !context.second.empty()) {
          out.push_back({entry.id, TokenSequence{context.second, false}});
        }
      }
    }
  }
  return out;
}

namespace {

class RowPerturber {
 public:
  RowPerturber(double eps, std::uint64_t seed) : eps_(eps), source_(seed, NoiseDomain::Perturbation) {}

  NextTokenDistribution operator()(const NextTokenDistribution& d) {
    KeyedStream stream(source_, NoiseKey{row_++, {}, 0});
    const auto probs = d.probs();
    std::vector<double> direction(probs.size(), 0.0);
    double total = 0.0;
    for (std::size_t t = 0; t < probs.size(); ++t) {
      if (probs[t] > 0.0) {
        direction[t] = stream.next_exponential();
        total += direction[t];
      }
    }
    std::vector<double> mixed(probs.size());
    for (std::size_t t = 0; t < probs.size(); ++t) mixed[t] = (1.0 - eps_) * probs[t] + eps_ * direction[t] / total;
    return NextTokenDistribution(std::move(mixed));
  }

 private:
  double eps_;
  NoiseSource source_;
  std::uint32_t row_ = 0;
};

}  // namespace

ModelSpec perturb(const ModelSpec& model, double eps, std::uint64_t direction_seed) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw DomainError("perturbation size must lie in [0,1]");
  RowPerturber perturb_row(eps, direction_seed);
  auto perturbed = std::visit(
      [&](const auto& m) -> ModelSpec::Variant {
        using T = std::decay_t<decltype(m)>;
        T copy = m;
        if constexpr (std::is_same_v<T, CategoricalModel>) {
          for (auto& [prompt, row] : copy.rows) row = perturb_row(row);
        } else if constexpr (std::is_same_v<T, MarkovModel>) {
          for (auto& [prompt, row] : copy.initial) row = perturb_row(row);
          for (auto& [token, row] : copy.transitions) row = perturb_row(row);
        } else if constexpr (std::is_same_v<T, SequenceTableModel>) {
          for (auto& [context, row] : copy.rows) row = perturb_row(row);
          copy.fallback = perturb_row(copy.fallback);
        }
        // Point masses have a one-token support, so any mixture leaves them unchanged.
        return copy;
      },
      model.variant());
  return ModelSpec(model.vocabulary(), std::move(perturbed));
}

double model_distance(const ModelSpec& a, const ModelSpec& b, const PromptSet& prompts) {
  if (!(a.vocabulary() == b.vocabulary())) throw ConfigError("models use different vocabularies");
  std::set<std::pair<PromptId, std::vector<TokenId>>> contexts;
  for (const auto* m : {&a, &b}) {
    for (const auto& [prompt, seq] : m->table_contexts(prompts)) contexts.insert({prompt, seq.tokens});
  }
  double distance = 0.0;
  for (const auto& [prompt, tokens] : contexts) {
    const TokenSequence partial{tokens, false};
    const auto da = a.next_token_distribution(prompt, partial);
    const auto db = b.next_token_distribution(prompt, partial);
    for (std::size_t t = 0; t < da.size(); ++t) distance = std::max(distance, std::abs(da.probs()[t] - db.probs()[t]));
  }
  return distance;
}

}  // namespace cagen
