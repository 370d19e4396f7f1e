#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ldmi/errors.hpp"
#include "ldmi/model.hpp"
#include "ldmi/numeric.hpp"
#include "ldmi/vocab.hpp"

namespace ldmi {

struct ContextualPair {
  std::string word1, word2;
  std::vector<std::string> context1, context2;
  double human_score;
};

struct PlainPair {
  std::string word1, word2;
  double human_score;
};

namespace detail {

inline std::string normalize_or_lower(std::string_view raw) {
  if (auto tok = normalize_token(raw)) return *tok;
  std::string out(raw);
  for (char& c : out) c = char(std::tolower((unsigned char)c));
  return out;
}

// Context tokens of an SCWS sentence: everything around the <b>target</b>
// marker, normalized with the corpus rules; the marked token itself is
// excluded from its own context.
inline std::vector<std::string> scws_context_tokens(std::string_view text, std::size_t line_no) {
  const auto open = text.find("<b>");
  const auto close = text.find("</b>");
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    throw DataFormatError("dataset line " + std::to_string(line_no) +
                          ": context lacks <b>...</b> target markers");
  }
  std::vector<std::string> tokens;
  auto collect = [&](std::string_view part) {
    for_each_raw_token(part, [&](std::string_view raw) {
      if (auto tok = normalize_token(raw)) tokens.push_back(std::move(*tok));
    });
  };
  collect(text.substr(0, open));
  collect(text.substr(close + 4));
  return tokens;
}

inline std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

inline double parse_score(std::string_view field, std::size_t line_no) {
  try {
    std::size_t used = 0;
    std::string s(field);
    double v = std::stod(s, &used);
    while (used < s.size() && std::isspace((unsigned char)s[used])) ++used;
    if (used != s.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw DataFormatError("dataset line " + std::to_string(line_no) + ": bad score \"" +
                          std::string(field) + "\"");
  }
}

}  // namespace detail

// SCWS-format records: id, word1, POS1, word2, POS2, context1, context2,
// mean rating, individual ratings; tab-separated, targets marked with
// <b>...</b> inside each context.
inline std::vector<ContextualPair> load_scws(std::istream& in) {
  std::vector<ContextualPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = detail::split_fields(line, '\t');
    if (fields.size() < 8) {
      throw DataFormatError("dataset line " + std::to_string(line_no) +
                            ": expected at least 8 tab-separated fields, found " +
                            std::to_string(fields.size()));
    }
    ContextualPair p;
    p.word1 = detail::normalize_or_lower(fields[1]);
    p.word2 = detail::normalize_or_lower(fields[3]);
    p.context1 = detail::scws_context_tokens(fields[5], line_no);
    p.context2 = detail::scws_context_tokens(fields[6], line_no);
    p.human_score = detail::parse_score(fields[7], line_no);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

// "word1,word2,score" records, comma- or tab-separated, optional header.
inline std::vector<PlainPair> load_wordsim(std::istream& in) {
  std::vector<PlainPair> pairs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const char sep = line.find('\t') != std::string::npos ? '\t' : ',';
    auto fields = detail::split_fields(line, sep);
    if (fields.size() < 3) {
      throw DataFormatError("dataset line " + std::to_string(line_no) +
                            ": expected word1, word2, score");
    }
    if (line_no == 1) {
      // optional header: skip the first line when its score does not parse
      try {
        detail::parse_score(fields[2], line_no);
      } catch (const DataFormatError&) {
        continue;
      }
    }
    PlainPair p;
    p.word1 = detail::normalize_or_lower(fields[0]);
    p.word2 = detail::normalize_or_lower(fields[1]);
    p.human_score = detail::parse_score(fields[2], line_no);
    pairs.push_back(std::move(p));
  }
  return pairs;
}

// Similarity between a sense vector x and a context: the mean cosine against
// every sense of every in-vocabulary context word. Out-of-vocabulary tokens
// are skipped; no in-vocabulary token at all makes the pair unscorable.
inline std::optional<double> sim_sense_context(const EmbeddingSet& emb, std::span<const float> x,
                                               const std::vector<std::string>& context) {
  double sum = 0.0;
  std::int64_t z = 0;
  for (const std::string& tok : context) {
    const WordId y = emb.id_of(tok);
    if (y == kNoWord) continue;
    const int m = emb.senses(y);
    for (int j = 0; j < m; ++j) sum += cosine(x, emb.vec(y, j));
    z += m;
  }
  if (z == 0) return std::nullopt;
  return sum / double(z);
}

// Index of the sense most similar to the context; ties go to the lowest
// sense index.
inline std::optional<int> best_sense(const EmbeddingSet& emb, WordId w,
                                     const std::vector<std::string>& context) {
  int best = -1;
  double best_sim = 0.0;
  for (int s = 0; s < emb.senses(w); ++s) {
    auto sim = sim_sense_context(emb, emb.vec(w, s), context);
    if (!sim) return std::nullopt;
    if (best < 0 || *sim > best_sim) {
      best = s;
      best_sim = *sim;
    }
  }
  return best;
}

inline std::optional<double> max_sim_c(const EmbeddingSet& emb, const ContextualPair& pair) {
  const WordId w1 = emb.id_of(pair.word1);
  const WordId w2 = emb.id_of(pair.word2);
  if (w1 == kNoWord || w2 == kNoWord) return std::nullopt;
  auto s1 = best_sense(emb, w1, pair.context1);
  auto s2 = best_sense(emb, w2, pair.context2);
  if (!s1 || !s2) return std::nullopt;
  return cosine(emb.vec(w1, *s1), emb.vec(w2, *s2));
}

// Probability of each sense given the context, proportional to
// 1 / (1 - sim); the denominator is clamped below at 1e-6.
inline std::optional<std::vector<double>> sense_probabilities(
    const EmbeddingSet& emb, WordId w, const std::vector<std::string>& context) {
  const int m = emb.senses(w);
  std::vector<double> probs(static_cast<std::size_t>(m));
  double total = 0.0;
  for (int s = 0; s < m; ++s) {
    auto sim = sim_sense_context(emb, emb.vec(w, s), context);
    if (!sim) return std::nullopt;
    probs[std::size_t(s)] = 1.0 / std::max(1.0 - *sim, 1e-6);
    total += probs[std::size_t(s)];
  }
  for (double& p : probs) p /= total;
  return probs;
}

inline std::optional<double> sense_prob(const EmbeddingSet& emb, WordId w, int sense,
                                        const std::vector<std::string>& context) {
  auto probs = sense_probabilities(emb, w, context);
  if (!probs) return std::nullopt;
  return (*probs)[std::size_t(sense)];
}

inline std::optional<double> avg_sim_c(const EmbeddingSet& emb, const ContextualPair& pair) {
  const WordId w1 = emb.id_of(pair.word1);
  const WordId w2 = emb.id_of(pair.word2);
  if (w1 == kNoWord || w2 == kNoWord) return std::nullopt;
  auto p1 = sense_probabilities(emb, w1, pair.context1);
  auto p2 = sense_probabilities(emb, w2, pair.context2);
  if (!p1 || !p2) return std::nullopt;
  double sum = 0.0;
  for (int i = 0; i < emb.senses(w1); ++i) {
    for (int j = 0; j < emb.senses(w2); ++j) {
      sum += (*p1)[std::size_t(i)] * (*p2)[std::size_t(j)] * cosine(emb.vec(w1, i), emb.vec(w2, j));
    }
  }
  return sum;
}

// Context-free similarity: the unweighted mean cosine over all sense pairs.
inline std::optional<double> avg_sim(const EmbeddingSet& emb, const PlainPair& pair) {
  const WordId w1 = emb.id_of(pair.word1);
  const WordId w2 = emb.id_of(pair.word2);
  if (w1 == kNoWord || w2 == kNoWord) return std::nullopt;
  double sum = 0.0;
  for (int i = 0; i < emb.senses(w1); ++i) {
    for (int j = 0; j < emb.senses(w2); ++j) {
      sum += cosine(emb.vec(w1, i), emb.vec(w2, j));
    }
  }
  return sum / double(emb.senses(w1) * emb.senses(w2));
}

// Fractional ranks with average ties, 1-based.
inline std::vector<double> fractional_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t(0));
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = (double(i) + double(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

// Spearman rank correlation: Pearson correlation of average-tie ranks.
// Undefined (nullopt) when either side has zero rank variance.
inline std::optional<double> spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw InvariantError("spearman needs two equal-length lists of size >= 2");
  }
  const auto ra = fractional_ranks(a);
  const auto rb = fractional_ranks(b);
  const double n = double(a.size());
  double ma = 0.0, mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i];
    mb += rb[i];
  }
  ma /= n;
  mb /= n;
  double cov = 0.0, va = 0.0, vb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = ra[i] - ma;
    const double db = rb[i] - mb;
    cov += da * db;
    va += da * da;
    vb += db * db;
  }
  if (va == 0.0 || vb == 0.0) return std::nullopt;
  return cov / std::sqrt(va * vb);
}

struct Neighbor {
  WordId word;
  int sense;
  double cos;
};

// Top-k entries by cosine against all other (word, sense) vectors. Other
// senses of the query word are excluded; ties break by token, then sense.
inline std::vector<Neighbor> nearest_neighbors(const EmbeddingSet& emb, std::string_view token,
                                               int sense, int top_k) {
  const WordId q = emb.id_of(token);
  if (q == kNoWord) throw ConfigError("unknown token: " + std::string(token));
  if (sense < 0 || sense >= emb.senses(q)) {
    throw ConfigError("token " + std::string(token) + " has no sense " + std::to_string(sense));
  }
  auto query = emb.vec(q, sense);
  std::vector<Neighbor> all;
  for (WordId w = 0; w < emb.word_count(); ++w) {
    if (w == q) continue;
    for (int s = 0; s < emb.senses(w); ++s) {
      all.push_back({w, s, cosine(query, emb.vec(w, s))});
    }
  }
  auto better = [&](const Neighbor& a, const Neighbor& b) {
    if (a.cos != b.cos) return a.cos > b.cos;
    if (emb.token(a.word) != emb.token(b.word)) return emb.token(a.word) < emb.token(b.word);
    return a.sense < b.sense;
  };
  const std::size_t k = std::min(std::size_t(std::max(top_k, 0)), all.size());
  std::partial_sort(all.begin(), all.begin() + std::ptrdiff_t(k), all.end(), better);
  all.resize(k);
  return all;
}

enum class Metric { kMaxSimC, kAvgSimC, kAvgSim };

inline std::optional<Metric> metric_from_name(std::string_view name) {
  if (name == "maxsimc") return Metric::kMaxSimC;
  if (name == "avgsimc") return Metric::kAvgSimC;
  if (name == "avgsim") return Metric::kAvgSim;
  return std::nullopt;
}

inline const char* metric_name(Metric m) {
  switch (m) {
    case Metric::kMaxSimC: return "maxsimc";
    case Metric::kAvgSimC: return "avgsimc";
    default: return "avgsim";
  }
}

struct EvalReport {
  std::size_t pairs = 0;
  std::size_t scored = 0;
  double rho = 0.0;  // valid only when rho_defined
  bool rho_defined = false;
};

inline EvalReport evaluate_contextual(const EmbeddingSet& emb,
                                      const std::vector<ContextualPair>& pairs, Metric metric) {
  EvalReport rep;
  rep.pairs = pairs.size();
  std::vector<double> model_scores, human;
  for (const ContextualPair& p : pairs) {
    auto s = metric == Metric::kMaxSimC ? max_sim_c(emb, p) : avg_sim_c(emb, p);
    if (!s) continue;
    model_scores.push_back(*s);
    human.push_back(p.human_score);
  }
  rep.scored = model_scores.size();
  if (rep.scored >= 2) {
    if (auto rho = spearman(model_scores, human)) {
      rep.rho = *rho;
      rep.rho_defined = true;
    }
  }
  return rep;
}

inline EvalReport evaluate_plain(const EmbeddingSet& emb, const std::vector<PlainPair>& pairs) {
  EvalReport rep;
  rep.pairs = pairs.size();
  std::vector<double> model_scores, human;
  for (const PlainPair& p : pairs) {
    auto s = avg_sim(emb, p);
    if (!s) continue;
    model_scores.push_back(*s);
    human.push_back(p.human_score);
  }
  rep.scored = model_scores.size();
  if (rep.scored >= 2) {
    if (auto rho = spearman(model_scores, human)) {
      rep.rho = *rho;
      rep.rho_defined = true;
    }
  }
  return rep;
}

}  // namespace ldmi
