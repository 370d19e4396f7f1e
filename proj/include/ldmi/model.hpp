#pragma once

#include <cctype>
#include <charconv>
#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ldmi/errors.hpp"
#include "ldmi/random.hpp"
#include "ldmi/vocab.hpp"

namespace ldmi {

// Renders a (token, sense) pair the way the model file spells it: the "#s"
// suffix is omitted for single-sense words.
inline std::string sense_token(std::string_view token, int sense, int sense_count) {
  if (sense_count == 1) return std::string(token);
  return std::string(token) + "#" + std::to_string(sense);
}

// Splits "token#s" back apart. Vocabulary tokens never contain digits, so a
// trailing all-digit suffix after '#' is always a sense index.
inline std::pair<std::string_view, int> parse_sense_token(std::string_view t) {
  auto pos = t.rfind('#');
  if (pos == std::string_view::npos || pos + 1 == t.size()) return {t, 0};
  std::string_view suffix = t.substr(pos + 1);
  int sense = 0;
  auto [ptr, ec] = std::from_chars(suffix.data(), suffix.data() + suffix.size(), sense);
  if (ec != std::errc() || ptr != suffix.data() + suffix.size()) return {t, 0};
  return {t.substr(0, pos), sense};
}

// Per-(word, sense) input vectors plus one shared context vector per word,
// with AdaGrad state for every parameter. The sense count m(w) starts at 1
// and only grows.
template <typename Real = float>
class SenseModel {
 public:
  SenseModel(WordId vocab_size, int dim, Real initial_lr, std::uint64_t seed)
      : dim_(dim), lr_(initial_lr) {
    if (dim < 1) throw ConfigError("dimension must be >= 1");
    if (!(initial_lr > 0)) throw ConfigError("initial learning rate must be > 0");
    const std::size_t v = std::size_t(vocab_size);
    input_.resize(v);
    input_grad_.resize(v);
    context_.assign(v * std::size_t(dim), Real(0));
    context_grad_.assign(v * std::size_t(dim), Real(0));
    auto rng = make_rng(seed);
    std::uniform_real_distribution<double> u(-0.5 / dim, 0.5 / dim);
    for (std::size_t w = 0; w < v; ++w) {
      input_[w].resize(std::size_t(dim));
      input_grad_[w].assign(std::size_t(dim), Real(0));
      for (int c = 0; c < dim; ++c) input_[w][std::size_t(c)] = Real(u(rng));
    }
  }

  int dim() const { return dim_; }
  Real initial_lr() const { return lr_; }
  WordId vocab_size() const { return WordId(input_.size()); }
  int sense_count(WordId w) const { return int(input_[std::size_t(w)].size()) / dim_; }

  std::span<Real> input(WordId w, int sense) {
    check_sense(w, sense);
    return {input_[std::size_t(w)].data() + std::size_t(sense) * dim_, std::size_t(dim_)};
  }
  std::span<const Real> input(WordId w, int sense) const {
    check_sense(w, sense);
    return {input_[std::size_t(w)].data() + std::size_t(sense) * dim_, std::size_t(dim_)};
  }
  std::span<Real> input_grad(WordId w, int sense) {
    check_sense(w, sense);
    return {input_grad_[std::size_t(w)].data() + std::size_t(sense) * dim_, std::size_t(dim_)};
  }

  std::span<Real> context(WordId w) {
    return {context_.data() + std::size_t(w) * dim_, std::size_t(dim_)};
  }
  std::span<const Real> context(WordId w) const {
    return {context_.data() + std::size_t(w) * dim_, std::size_t(dim_)};
  }
  std::span<Real> context_grad(WordId w) {
    return {context_grad_.data() + std::size_t(w) * dim_, std::size_t(dim_)};
  }

  // Appends one sense to w and returns its index.
  int add_sense(WordId w, std::span<const Real> vec, std::span<const Real> grad) {
    if (int(vec.size()) != dim_ || int(grad.size()) != dim_) {
      throw InvariantError("add_sense: dimension mismatch");
    }
    auto& in = input_[std::size_t(w)];
    auto& g = input_grad_[std::size_t(w)];
    in.insert(in.end(), vec.begin(), vec.end());
    g.insert(g.end(), grad.begin(), grad.end());
    return int(in.size()) / dim_ - 1;
  }

  std::size_t total_entries() const {
    std::size_t n = 0;
    for (const auto& v : input_) n += v.size();
    return n / std::size_t(dim_);
  }

  std::vector<int> sense_counts() const {
    std::vector<int> m(input_.size());
    for (std::size_t w = 0; w < input_.size(); ++w) m[w] = int(input_[w].size()) / dim_;
    return m;
  }

  // Text model file: header "entry_count d", then one "token#s v1 .. vd"
  // line per (word, sense).
  void save(std::ostream& out, const Vocabulary& vocab) const {
    out << total_entries() << ' ' << dim_ << '\n';
    out << std::setprecision(std::numeric_limits<Real>::max_digits10);
    for (WordId w = 0; w < vocab_size(); ++w) {
      const int m = sense_count(w);
      for (int s = 0; s < m; ++s) {
        out << sense_token(vocab.token(w), s, m);
        for (Real x : input(w, s)) out << ' ' << x;
        out << '\n';
      }
    }
  }

  // Companion file of per-word context vectors, same layout.
  void save_context_vectors(std::ostream& out, const Vocabulary& vocab) const {
    out << std::size_t(vocab_size()) << ' ' << dim_ << '\n';
    out << std::setprecision(std::numeric_limits<Real>::max_digits10);
    for (WordId w = 0; w < vocab_size(); ++w) {
      out << vocab.token(w);
      for (Real x : context(w)) out << ' ' << x;
      out << '\n';
    }
  }

 private:
  void check_sense(WordId w, int sense) const {
    if (sense < 0 || sense >= sense_count(w)) {
      throw InvariantError("sense label out of range for word id " + std::to_string(w));
    }
  }

  int dim_;
  Real lr_;
  std::vector<std::vector<Real>> input_;
  std::vector<std::vector<Real>> input_grad_;
  std::vector<Real> context_;
  std::vector<Real> context_grad_;
};

// Read-only sense embeddings as loaded from a model file; the view the
// evaluation and neighbor operations work on.
class EmbeddingSet {
 public:
  static EmbeddingSet load(std::istream& in) {
    EmbeddingSet e;
    std::string line;
    if (!std::getline(in, line)) throw DataFormatError("model line 1: empty file");
    std::size_t entries = 0;
    {
      std::istringstream head(line);
      long long n = -1, d = -1;
      head >> n >> d;
      if (!head || n < 0 || d < 1) {
        throw DataFormatError("model line 1: expected header \"entry_count dim\"");
      }
      entries = std::size_t(n);
      e.dim_ = int(d);
    }

    struct Slot {
      int sense;
      std::vector<float> vec;
    };
    std::vector<std::vector<Slot>> slots;
    std::size_t line_no = 1;
    std::size_t seen = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream ls(line);
      std::string label;
      ls >> label;
      std::vector<float> vec(std::size_t(e.dim_));
      for (int c = 0; c < e.dim_; ++c) {
        if (!(ls >> vec[std::size_t(c)])) {
          throw DataFormatError("model line " + std::to_string(line_no) +
                                ": expected " + std::to_string(e.dim_) + " values");
        }
      }
      float extra;
      if (ls >> extra) {
        throw DataFormatError("model line " + std::to_string(line_no) + ": too many values");
      }
      auto [token, sense] = parse_sense_token(label);
      WordId w = e.id_of(token);
      if (w == kNoWord) {
        w = WordId(e.tokens_.size());
        e.tokens_.emplace_back(token);
        e.index_.emplace(e.tokens_.back(), w);
        slots.emplace_back();
      }
      for (const Slot& s : slots[std::size_t(w)]) {
        if (s.sense == sense) {
          throw DataFormatError("model line " + std::to_string(line_no) + ": duplicate entry " + label);
        }
      }
      slots[std::size_t(w)].push_back({sense, std::move(vec)});
      ++seen;
    }
    if (seen != entries) {
      throw DataFormatError("model: header promises " + std::to_string(entries) +
                            " entries, found " + std::to_string(seen));
    }
    e.vecs_.resize(slots.size());
    for (std::size_t w = 0; w < slots.size(); ++w) {
      auto& sl = slots[w];
      std::sort(sl.begin(), sl.end(), [](const Slot& a, const Slot& b) { return a.sense < b.sense; });
      for (std::size_t s = 0; s < sl.size(); ++s) {
        if (sl[s].sense != int(s)) {
          throw DataFormatError("model: word \"" + e.tokens_[w] + "\" has non-contiguous sense ids");
        }
        e.vecs_[w].insert(e.vecs_[w].end(), sl[s].vec.begin(), sl[s].vec.end());
      }
    }
    return e;
  }

  template <typename Real>
  static EmbeddingSet from_model(const SenseModel<Real>& model, const Vocabulary& vocab) {
    EmbeddingSet e;
    e.dim_ = model.dim();
    e.tokens_.reserve(std::size_t(vocab.size()));
    e.vecs_.resize(std::size_t(vocab.size()));
    for (WordId w = 0; w < vocab.size(); ++w) {
      e.tokens_.push_back(vocab.token(w));
      e.index_.emplace(e.tokens_.back(), w);
      const int m = model.sense_count(w);
      auto& out = e.vecs_[std::size_t(w)];
      out.reserve(std::size_t(m) * std::size_t(e.dim_));
      for (int s = 0; s < m; ++s) {
        for (Real x : model.input(w, s)) out.push_back(float(x));
      }
    }
    return e;
  }

  int dim() const { return dim_; }
  WordId word_count() const { return WordId(tokens_.size()); }
  std::size_t entry_count() const {
    std::size_t n = 0;
    for (const auto& v : vecs_) n += v.size();
    return dim_ == 0 ? 0 : n / std::size_t(dim_);
  }

  WordId id_of(std::string_view token) const {
    auto it = index_.find(token);
    return it == index_.end() ? kNoWord : it->second;
  }
  const std::string& token(WordId w) const { return tokens_[std::size_t(w)]; }
  int senses(WordId w) const { return int(vecs_[std::size_t(w)].size()) / dim_; }
  std::span<const float> vec(WordId w, int sense) const {
    return {vecs_[std::size_t(w)].data() + std::size_t(sense) * dim_, std::size_t(dim_)};
  }

 private:
  int dim_ = 0;
  std::vector<std::string> tokens_;
  TokenIndex index_;
  std::vector<std::vector<float>> vecs_;
};

}  // namespace ldmi
