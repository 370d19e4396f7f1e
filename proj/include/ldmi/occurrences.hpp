#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "ldmi/errors.hpp"
#include "ldmi/random.hpp"
#include "ldmi/vocab.hpp"

namespace ldmi {

// One center position with the window members that survived sub-sampling.
struct Occurrence {
  WordId center;
  std::span<const WordId> context;
  std::uint64_t position;  // raw token offset in the corpus
  std::int32_t sense;
};

// Materialized training stream. Written once, then read-shared; the only
// mutable field is the per-occurrence sense label, owned by the sense-split
// step.
class OccurrenceStore {
 public:
  std::size_t size() const { return centers_.size(); }

  Occurrence view(std::size_t i) const {
    return {centers_[i], context(i), positions_[i], senses_[i]};
  }

  std::span<const WordId> context(std::size_t i) const {
    return {ctx_.data() + ctx_begin_[i], std::size_t(ctx_begin_[i + 1] - ctx_begin_[i])};
  }

  WordId center(std::size_t i) const { return centers_[i]; }
  std::uint64_t position(std::size_t i) const { return positions_[i]; }
  std::int32_t sense(std::size_t i) const { return senses_[i]; }
  void set_sense(std::size_t i, std::int32_t s) { senses_[i] = s; }

  // Occurrence indices whose center is w.
  std::span<const std::uint32_t> of_center(WordId w) const {
    return {by_center_.data() + center_begin_[std::size_t(w)],
            std::size_t(center_begin_[std::size_t(w) + 1] - center_begin_[std::size_t(w)])};
  }

  std::int64_t count_for(WordId w) const { return std::int64_t(of_center(w).size()); }

  void append(WordId center, std::span<const WordId> ctx, std::uint64_t position) {
    centers_.push_back(center);
    positions_.push_back(position);
    senses_.push_back(0);
    ctx_.insert(ctx_.end(), ctx.begin(), ctx.end());
    ctx_begin_.push_back(std::uint64_t(ctx_.size()));
  }

  void finalize(WordId vocab_size) {
    std::vector<std::uint32_t> counts(std::size_t(vocab_size), 0);
    for (WordId c : centers_) ++counts[std::size_t(c)];
    center_begin_.assign(std::size_t(vocab_size) + 1, 0);
    for (std::size_t w = 0; w < counts.size(); ++w) {
      center_begin_[w + 1] = center_begin_[w] + counts[w];
    }
    by_center_.resize(centers_.size());
    std::vector<std::uint32_t> cursor(center_begin_.begin(), center_begin_.end() - 1);
    for (std::size_t i = 0; i < centers_.size(); ++i) {
      by_center_[cursor[std::size_t(centers_[i])]++] = std::uint32_t(i);
    }
  }

 private:
  std::vector<WordId> centers_;
  std::vector<std::uint64_t> positions_;
  std::vector<std::int32_t> senses_;
  std::vector<std::uint64_t> ctx_begin_{0};
  std::vector<WordId> ctx_;
  std::vector<std::uint32_t> by_center_;
  std::vector<std::uint32_t> center_begin_{0};
};

// Materializes one occurrence per kept center token. Sub-sampling removes
// tokens (as centers and as context members) before windowing; the window is
// taken over the surviving in-vocabulary sequence of each line. Occurrences
// with an empty context are discarded. Deterministic given the seed.
inline OccurrenceStore extract_occurrences(const TextCorpus& corpus, const Vocabulary& vocab,
                                           int window, double subsample_t, std::uint64_t seed) {
  if (window < 1) throw ConfigError("window must be >= 1");
  OccurrenceStore store;
  if (vocab.size() == 0) {
    store.finalize(0);
    return store;
  }

  std::vector<double> keep(std::size_t(vocab.size()));
  for (WordId w = 0; w < vocab.size(); ++w) {
    keep[std::size_t(w)] = keep_probability(vocab.frequency(w), vocab.total_tokens(), subsample_t);
  }

  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uint64_t raw_pos = 0;
  std::vector<WordId> kept;
  std::vector<std::uint64_t> kept_pos;
  std::vector<WordId> ctx;

  corpus.for_each_line([&](std::string_view line) {
    kept.clear();
    kept_pos.clear();
    for_each_raw_token(line, [&](std::string_view raw) {
      const std::uint64_t pos = raw_pos++;
      auto tok = normalize_token(raw);
      if (!tok) return;
      WordId w = vocab.id_of(*tok);
      if (w == kNoWord) return;
      double p = keep[std::size_t(w)];
      if (p < 1.0 && unit(rng) > p) return;
      kept.push_back(w);
      kept_pos.push_back(pos);
    });
    const std::ptrdiff_t n = std::ptrdiff_t(kept.size());
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      ctx.clear();
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, i - window);
      const std::ptrdiff_t hi = std::min(n - 1, i + window);
      for (std::ptrdiff_t j = lo; j <= hi; ++j) {
        if (j != i) ctx.push_back(kept[std::size_t(j)]);
      }
      if (ctx.empty()) continue;
      store.append(kept[std::size_t(i)], ctx, kept_pos[std::size_t(i)]);
    }
  });
  store.finalize(vocab.size());
  return store;
}

}  // namespace ldmi
