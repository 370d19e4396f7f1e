#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ldmi/errors.hpp"

namespace ldmi {

using WordId = std::int32_t;
inline constexpr WordId kNoWord = -1;

struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const noexcept {
    return std::hash<std::string_view>{}(s);
  }
};

using TokenIndex = std::unordered_map<std::string, WordId, StringHash, std::equal_to<>>;

// Lowercases a raw whitespace token. Tokens containing a digit, or without
// any alphabetic character, are dropped.
inline std::optional<std::string> normalize_token(std::string_view raw) {
  bool has_alpha = false;
  std::string out;
  out.reserve(raw.size());
  for (unsigned char c : raw) {
    if (std::isdigit(c)) return std::nullopt;
    if (std::isalpha(c)) has_alpha = true;
    out.push_back(char(std::tolower(c)));
  }
  if (!has_alpha) return std::nullopt;
  return out;
}

template <typename Fn>
void for_each_raw_token(std::string_view line, Fn&& fn) {
  std::size_t i = 0;
  const std::size_t n = line.size();
  while (i < n) {
    while (i < n && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < n && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) fn(line.substr(i, j - i));
    i = j;
  }
}

// A re-iterable plain-text corpus: one or more files, or an in-memory buffer.
// Lines are independent; context windows never cross them.
class TextCorpus {
 public:
  explicit TextCorpus(std::vector<std::string> paths) : paths_(std::move(paths)) {}

  static TextCorpus from_string(std::string text) {
    TextCorpus c{{}};
    c.buffer_ = std::move(text);
    c.buffered_ = true;
    return c;
  }

  void for_each_line(const std::function<void(std::string_view)>& fn) const {
    if (buffered_) {
      std::istringstream in(buffer_);
      std::string line;
      while (std::getline(in, line)) fn(line);
      return;
    }
    for (const auto& path : paths_) {
      std::ifstream in(path);
      if (!in) throw IoError("cannot open corpus file: " + path);
      std::string line;
      while (std::getline(in, line)) fn(line);
    }
  }

 private:
  std::vector<std::string> paths_;
  std::string buffer_;
  bool buffered_ = false;
};

// Surface tokens with frequencies; ids are dense 0..size-1 in order of
// descending frequency (ties by first appearance).
class Vocabulary {
 public:
  struct Entry {
    std::string token;
    std::int64_t frequency;
  };

  Vocabulary() = default;

  static Vocabulary build(const TextCorpus& corpus, std::int64_t min_count) {
    if (min_count < 1) throw ConfigError("min_count must be >= 1");
    struct Count {
      std::int64_t n = 0;
      std::size_t first = 0;
    };
    std::unordered_map<std::string, Count, StringHash, std::equal_to<>> counts;
    std::size_t order = 0;
    corpus.for_each_line([&](std::string_view line) {
      for_each_raw_token(line, [&](std::string_view raw) {
        auto tok = normalize_token(raw);
        if (!tok) return;
        auto [it, inserted] = counts.try_emplace(std::move(*tok));
        if (inserted) it->second.first = order;
        ++order;
        it->second.n += 1;
      });
    });

    struct Row {
      const std::string* token;
      std::int64_t n;
      std::size_t first;
    };
    std::vector<Row> rows;
    rows.reserve(counts.size());
    for (const auto& [token, c] : counts) {
      if (c.n >= min_count) rows.push_back({&token, c.n, c.first});
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      if (a.n != b.n) return a.n > b.n;
      return a.first < b.first;
    });

    Vocabulary v;
    v.entries_.reserve(rows.size());
    for (const Row& r : rows) {
      WordId id = WordId(v.entries_.size());
      v.entries_.push_back({*r.token, r.n});
      v.index_.emplace(*r.token, id);
      v.total_ += std::uint64_t(r.n);
    }
    return v;
  }

  WordId id_of(std::string_view token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kNoWord : it->second;
  }

  const std::string& token(WordId id) const { return entries_[std::size_t(id)].token; }
  std::int64_t frequency(WordId id) const { return entries_[std::size_t(id)].frequency; }
  WordId size() const { return WordId(entries_.size()); }
  std::uint64_t total_tokens() const { return total_; }
  const std::vector<Entry>& entries() const { return entries_; }

  // "token<TAB>frequency", descending frequency.
  void dump(std::ostream& out) const {
    for (const Entry& e : entries_) out << e.token << '\t' << e.frequency << '\n';
  }

 private:
  std::vector<Entry> entries_;
  TokenIndex index_;
  std::uint64_t total_ = 0;
};

// Word2vec-style sub-sampling keep probability; 1 for words at or below the
// sub-sampling parameter t, (sqrt(f/t)+1)*(t/f) clamped to 1 above it.
inline double keep_probability(std::int64_t word_freq, std::uint64_t total, double t) {
  if (total == 0) throw std::domain_error("keep_probability: empty vocabulary");
  if (!(t > 0.0)) throw std::domain_error("keep_probability: t must be > 0");
  double f = double(word_freq) / double(total);
  if (f <= t) return 1.0;
  double p = (std::sqrt(f / t) + 1.0) * (t / f);
  return std::min(p, 1.0);
}

}  // namespace ldmi
