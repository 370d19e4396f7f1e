#pragma once

#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "ldmi/config.hpp"
#include "ldmi/eval.hpp"
#include "ldmi/loss_monitor.hpp"
#include "ldmi/model.hpp"
#include "ldmi/occurrences.hpp"
#include "ldmi/sampler.hpp"
#include "ldmi/sense_split.hpp"
#include "ldmi/trainer.hpp"
#include "ldmi/vocab.hpp"

namespace ldmi {

struct TrainSummary {
  WordId vocab_size = 0;
  std::uint64_t total_tokens = 0;
  std::size_t occurrences = 0;
  int splits = 0;
  int skips = 0;
  std::size_t sense_entries = 0;
};

namespace detail {

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  return out;
}

}  // namespace detail

// The train command: corpus build, occurrence extraction, the full training
// and sense-splitting loop, then model/report persistence.
inline TrainSummary run_train(const RunConfig& user_cfg, std::ostream& diag) {
  RunConfig cfg = user_cfg;
  cfg.validate();
  if (cfg.split_log.empty()) cfg.split_log = cfg.model_out + ".splits";
  if (cfg.loss_report.empty()) cfg.loss_report = cfg.model_out + ".loss";
  if (cfg.manifest.empty()) cfg.manifest = cfg.model_out + ".manifest";

  TextCorpus corpus(cfg.corpus);
  Vocabulary vocab = Vocabulary::build(corpus, cfg.min_count);
  if (vocab.size() == 0) throw DataFormatError("corpus produced an empty vocabulary");
  diag << "vocabulary: " << vocab.size() << " tokens, " << vocab.total_tokens()
       << " total occurrences\n";
  if (!cfg.save_vocab.empty()) {
    auto out = detail::open_output(cfg.save_vocab);
    vocab.dump(out);
  }

  OccurrenceStore store = extract_occurrences(corpus, vocab, cfg.window, cfg.subsample,
                                              mix_seed(cfg.seed, 1));
  diag << "occurrences: " << store.size() << "\n";

  SenseModel<float> model(vocab.size(), cfg.dim, float(cfg.learning_rate), mix_seed(cfg.seed, 2));
  NegativeSampler sampler(vocab, cfg.negatives);

  auto [auto_min, auto_max] = default_frequency_gate(vocab.total_tokens());
  LdmiOptions opt;
  opt.outer_iters = cfg.outer_iters;
  opt.epochs_per_check = cfg.epochs_per_check;
  opt.filter.loss_threshold = cfg.loss_threshold;
  opt.filter.min_freq = cfg.freq_min > 0 ? cfg.freq_min : auto_min;
  opt.filter.max_freq = cfg.freq_max > 0 ? cfg.freq_max : auto_max;
  opt.clusterer = cfg.clusterer;
  opt.seed = mix_seed(cfg.seed, 3);
  opt.threads = cfg.threads;
  diag << "frequency gate: [" << opt.filter.min_freq << ", " << opt.filter.max_freq
       << "], loss threshold " << cfg.loss_threshold << "\n";

  TrainSummary summary;
  summary.vocab_size = vocab.size();
  summary.total_tokens = vocab.total_tokens();
  summary.occurrences = store.size();

  auto split_log = detail::open_output(cfg.split_log);
  LdmiCallbacks cb;
  cb.on_identification = [&](int it, const LossLedger& ledger) {
    const std::string path = cfg.loss_report + ".iter" + std::to_string(it + 1) + ".tsv";
    auto out = detail::open_output(path);
    write_loss_report(out, loss_report(ledger, vocab));
    diag << "iteration " << (it + 1) << ": loss report -> " << path << "\n";
  };
  cb.on_split = [&](int it, const SplitRecord& rec) {
    write_split_record(split_log, rec, vocab);
    ++summary.splits;
    diag << "iteration " << (it + 1) << ": split " << vocab.token(rec.word) << "#"
         << rec.old_sense << " -> #" << rec.new_sense << " (" << rec.n0 << "/" << rec.n1 << ")\n";
  };
  cb.on_skip = [&](int it, WordId w, int s, const std::string& reason) {
    ++summary.skips;
    diag << "iteration " << (it + 1) << ": skipped " << vocab.token(w) << "#" << s << ": "
         << reason << "\n";
  };

  ldmi_iterate(model, store, sampler, vocab, opt, cb);

  {
    auto out = detail::open_output(cfg.model_out);
    model.save(out, vocab);
  }
  if (!cfg.context_out.empty()) {
    auto out = detail::open_output(cfg.context_out);
    model.save_context_vectors(out, vocab);
  }
  {
    auto out = detail::open_output(cfg.manifest);
    write_manifest(out, cfg);
  }
  summary.sense_entries = model.total_entries();
  diag << "model: " << summary.sense_entries << " sense vectors -> " << cfg.model_out << "\n";
  return summary;
}

inline EmbeddingSet load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open model file: " + path);
  return EmbeddingSet::load(in);
}

// The eval command: scores a dataset with one metric and prints pair count,
// coverage, and rho x 100 to two decimals.
inline EvalReport run_eval(const std::string& model_path, const std::string& dataset_path,
                           Metric metric, std::ostream& out) {
  EmbeddingSet emb = load_embeddings(model_path);
  std::ifstream data(dataset_path);
  if (!data) throw IoError("cannot open dataset file: " + dataset_path);

  EvalReport rep;
  if (metric == Metric::kAvgSim) {
    rep = evaluate_plain(emb, load_wordsim(data));
  } else {
    rep = evaluate_contextual(emb, load_scws(data), metric);
  }
  if (rep.scored == 0) throw DataFormatError("no scorable pairs in " + dataset_path);
  if (!rep.rho_defined) {
    throw DataFormatError("rank correlation undefined (zero rank variance or < 2 pairs)");
  }
  out << "metric\t" << metric_name(metric) << '\n';
  out << "pairs\t" << rep.pairs << '\n';
  out << "scored\t" << rep.scored << '\n';
  out << "coverage\t" << std::fixed << std::setprecision(2)
      << 100.0 * double(rep.scored) / double(rep.pairs) << "%\n";
  out << "rho_x100\t" << std::fixed << std::setprecision(2) << 100.0 * rep.rho << '\n';
  out.unsetf(std::ios::fixed);
  return rep;
}

// One "token#s: neighbor (cos); ..." line per sense of the query token.
inline void run_neighbors(const std::string& model_path, const std::string& token,
                          std::optional<int> sense, int top_k, std::ostream& out) {
  EmbeddingSet emb = load_embeddings(model_path);
  const WordId q = emb.id_of(token);
  if (q == kNoWord) throw ConfigError("unknown token: " + token);
  const int m = emb.senses(q);
  std::vector<int> senses;
  if (sense) {
    if (*sense < 0 || *sense >= m) {
      throw ConfigError("token " + token + " has no sense " + std::to_string(*sense));
    }
    senses.push_back(*sense);
  } else {
    for (int s = 0; s < m; ++s) senses.push_back(s);
  }
  out << std::fixed << std::setprecision(3);
  for (int s : senses) {
    out << sense_token(token, s, m) << ":";
    bool first = true;
    for (const Neighbor& nb : nearest_neighbors(emb, token, s, top_k)) {
      out << (first ? " " : "; ")
          << sense_token(emb.token(nb.word), nb.sense, emb.senses(nb.word)) << " (" << nb.cos
          << ")";
      first = false;
    }
    out << '\n';
  }
  out.unsetf(std::ios::fixed);
}

namespace detail {

inline void write_loss_curve_svg(std::ostream& out, const std::vector<LossReportRow>& rows) {
  const double width = 800, height = 420, pad = 50;
  double lo = rows.front().avg_loss, hi = rows.back().avg_loss;
  if (hi <= lo) hi = lo + 1.0;
  auto x_at = [&](std::size_t i) {
    return pad + (width - 2 * pad) * (rows.size() == 1 ? 0.5 : double(i) / double(rows.size() - 1));
  };
  auto y_at = [&](double loss) { return height - pad - (height - 2 * pad) * (loss - lo) / (hi - lo); };

  out << std::fixed << std::setprecision(2);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<line x1=\"" << pad << "\" y1=\"" << height - pad << "\" x2=\"" << width - pad
      << "\" y2=\"" << height - pad << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\""
      << height - pad << "\" stroke=\"black\"/>\n";
  out << "<text x=\"" << pad << "\" y=\"" << height - pad / 4
      << "\" font-size=\"12\">words sorted by average contextual loss (" << rows.size()
      << ")</text>\n";
  out << std::setprecision(4);
  out << "<text x=\"2\" y=\"" << pad << "\" font-size=\"12\">" << hi << "</text>\n";
  out << "<text x=\"2\" y=\"" << height - pad << "\" font-size=\"12\">" << lo << "</text>\n";
  out << std::setprecision(2);
  out << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i) out << ' ';
    out << x_at(i) << ',' << y_at(rows[i].avg_loss);
  }
  out << "\"/>\n</svg>\n";
  out.unsetf(std::ios::fixed);
}

}  // namespace detail

// Renders a loss report as a sorted curve: SVG when the output path ends in
// .svg, otherwise a gnuplot-ready "rank token avg_loss" table.
inline void run_loss_plot(const std::string& report_path, const std::string& out_path) {
  std::ifstream in(report_path);
  if (!in) throw IoError("cannot open loss report: " + report_path);
  auto rows = read_loss_report(in);
  if (rows.empty()) throw DataFormatError("loss report is empty: " + report_path);
  std::sort(rows.begin(), rows.end(), [](const LossReportRow& a, const LossReportRow& b) {
    if (a.avg_loss != b.avg_loss) return a.avg_loss < b.avg_loss;
    return a.token < b.token;
  });
  auto out = detail::open_output(out_path);
  const bool svg = out_path.size() >= 4 && out_path.substr(out_path.size() - 4) == ".svg";
  if (svg) {
    detail::write_loss_curve_svg(out, rows);
  } else {
    out << std::setprecision(10);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out << i << '\t' << rows[i].token << '\t' << rows[i].avg_loss << '\n';
    }
  }
}

inline void run_vocab(const std::vector<std::string>& corpus_paths, std::int64_t min_count,
                      std::ostream& out) {
  TextCorpus corpus(corpus_paths);
  Vocabulary::build(corpus, min_count).dump(out);
}

}  // namespace ldmi
