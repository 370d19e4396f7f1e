#pragma once

#include <algorithm>
#include <cstdint>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ldmi/errors.hpp"
#include "ldmi/model.hpp"
#include "ldmi/numeric.hpp"
#include "ldmi/occurrences.hpp"
#include "ldmi/vocab.hpp"

namespace ldmi {

// Positive-pair-only loss of one occurrence: the mean of -log sigmoid over
// the context dot products. Negative samples are deliberately left out.
template <typename Real>
double contextual_loss(const SenseModel<Real>& model, const Occurrence& occ) {
  if (occ.context.empty()) throw InvariantError("contextual_loss: empty context");
  auto w = model.input(occ.center, occ.sense);
  double sum = 0.0;
  for (WordId j : occ.context) sum += log_sigmoid(dot(w, model.context(j)));
  return -sum / double(occ.context.size());
}

// Running per-(word, sense) contextual-loss sums in double precision.
class LossLedger {
 public:
  LossLedger() = default;
  explicit LossLedger(std::vector<int> sense_counts) { reset(std::move(sense_counts)); }

  void reset(std::vector<int> sense_counts) {
    offsets_.assign(sense_counts.size() + 1, 0);
    for (std::size_t w = 0; w < sense_counts.size(); ++w) {
      offsets_[w + 1] = offsets_[w] + std::size_t(sense_counts[w]);
    }
    cells_.assign(offsets_.back(), Cell{});
  }

  void accumulate(WordId word, int sense, double loss) {
    if (loss < 0.0) throw InvariantError("contextual loss must be >= 0");
    Cell& c = cells_[offsets_[std::size_t(word)] + std::size_t(sense)];
    c.sum += loss;
    c.count += 1;
  }

  void merge(const LossLedger& other) {
    if (other.offsets_ != offsets_) throw InvariantError("ledger shapes differ");
    for (std::size_t i = 0; i < cells_.size(); ++i) {
      cells_[i].sum += other.cells_[i].sum;
      cells_[i].count += other.cells_[i].count;
    }
  }

  WordId word_count() const { return WordId(offsets_.size()) - 1; }
  int senses(WordId w) const {
    return int(offsets_[std::size_t(w) + 1] - offsets_[std::size_t(w)]);
  }
  std::uint64_t count(WordId w, int s) const { return cell(w, s).count; }
  bool observed(WordId w, int s) const { return cell(w, s).count > 0; }

  double average(WordId w, int s) const {
    const Cell& c = cell(w, s);
    if (c.count == 0) throw InvariantError("average over zero occurrences");
    return c.sum / double(c.count);
  }

  std::uint64_t total_count() const {
    std::uint64_t n = 0;
    for (const Cell& c : cells_) n += c.count;
    return n;
  }

 private:
  struct Cell {
    double sum = 0.0;
    std::uint64_t count = 0;
  };
  const Cell& cell(WordId w, int s) const {
    return cells_[offsets_[std::size_t(w)] + std::size_t(s)];
  }

  std::vector<std::size_t> offsets_{0};
  std::vector<Cell> cells_;
};

struct LossReportRow {
  std::string token;  // sense-qualified when the word has several senses
  std::int64_t frequency;
  double avg_loss;
};

// Rows for every observed (word, sense), ascending by average loss; the
// threshold is picked by a human looking at this.
inline std::vector<LossReportRow> loss_report(const LossLedger& ledger, const Vocabulary& vocab) {
  std::vector<LossReportRow> rows;
  for (WordId w = 0; w < ledger.word_count(); ++w) {
    const int m = ledger.senses(w);
    for (int s = 0; s < m; ++s) {
      if (!ledger.observed(w, s)) continue;
      rows.push_back({sense_token(vocab.token(w), s, m), vocab.frequency(w), ledger.average(w, s)});
    }
  }
  std::sort(rows.begin(), rows.end(), [](const LossReportRow& a, const LossReportRow& b) {
    if (a.avg_loss != b.avg_loss) return a.avg_loss < b.avg_loss;
    return a.token < b.token;
  });
  return rows;
}

inline void write_loss_report(std::ostream& out, const std::vector<LossReportRow>& rows) {
  out << std::setprecision(10);
  for (const LossReportRow& r : rows) {
    out << r.token << '\t' << r.frequency << '\t' << r.avg_loss << '\n';
  }
}

inline std::vector<LossReportRow> read_loss_report(std::istream& in) {
  std::vector<LossReportRow> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    LossReportRow r;
    if (!(std::getline(ls, r.token, '\t') && ls >> r.frequency >> r.avg_loss)) {
      throw DataFormatError("loss report line " + std::to_string(line_no) + ": malformed row");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

// Threshold plus frequency gate for multi-sense candidate selection.
struct CandidateFilter {
  double loss_threshold = 0.0;
  std::int64_t min_freq = 1;
  std::int64_t max_freq = std::numeric_limits<std::int64_t>::max();
};

struct Candidate {
  WordId word;
  int sense;
};

// Every (word, sense) whose word frequency lies inside the gate and whose
// average contextual loss exceeds the threshold. Applied per sense so an
// already-split sense can be re-selected in later iterations.
inline std::vector<Candidate> select_candidates(const LossLedger& ledger, const Vocabulary& vocab,
                                                const CandidateFilter& filter) {
  if (!(filter.loss_threshold > 0.0)) throw ConfigError("loss threshold must be > 0");
  if (filter.min_freq > filter.max_freq) throw ConfigError("min_freq must be <= max_freq");
  std::vector<Candidate> out;
  for (WordId w = 0; w < ledger.word_count(); ++w) {
    const std::int64_t f = vocab.frequency(w);
    if (f < filter.min_freq || f > filter.max_freq) continue;
    for (int s = 0; s < ledger.senses(w); ++s) {
      if (ledger.observed(w, s) && ledger.average(w, s) > filter.loss_threshold) {
        out.push_back({w, s});
      }
    }
  }
  return out;
}

// The 50..30,000 band used at a 62.7M-token corpus, scaled linearly with
// corpus size.
inline std::pair<std::int64_t, std::int64_t> default_frequency_gate(std::uint64_t total_tokens) {
  const double scale = double(total_tokens) / 62653821.0;
  auto lo = std::max<std::int64_t>(1, std::int64_t(std::llround(50.0 * scale)));
  auto hi = std::max(lo, std::int64_t(std::llround(30000.0 * scale)));
  return {lo, hi};
}

}  // namespace ldmi
