#pragma once

#include <cstdint>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ldmi/errors.hpp"
#include "ldmi/sense_split.hpp"

namespace ldmi {

inline constexpr const char* kLdmiVersion = "0.1.0";

// Full configuration of one training run; serializes to key=value lines and
// round-trips exactly.
struct RunConfig {
  std::vector<std::string> corpus;
  int dim = 50;
  int window = 10;
  int negatives = 10;
  double subsample = 1e-4;
  std::int64_t min_count = 10;
  double loss_threshold = 0.0;  // required; chosen from the loss report
  std::int64_t freq_min = 0;    // 0 = scale the default gate by corpus size
  std::int64_t freq_max = 0;
  int epochs_per_check = 5;
  int outer_iters = 3;
  Clusterer clusterer = Clusterer::kI1;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
  int threads = 1;
  std::string model_out;
  std::string context_out;   // optional companion file of context vectors
  std::string split_log;     // default: <model_out>.splits
  std::string loss_report;   // prefix; default: <model_out>.loss
  std::string save_vocab;    // optional
  std::string manifest;      // default: <model_out>.manifest

  void validate() const {
    if (corpus.empty()) throw ConfigError("no corpus files given");
    if (model_out.empty()) throw ConfigError("no model output path given");
    if (dim < 1) throw ConfigError("dim must be >= 1");
    if (window < 1) throw ConfigError("window must be >= 1");
    if (negatives < 1) throw ConfigError("negatives must be >= 1");
    if (!(subsample > 0.0)) throw ConfigError("subsample must be > 0");
    if (min_count < 1) throw ConfigError("min_count must be >= 1");
    if (!(loss_threshold > 0.0)) throw ConfigError("loss_threshold must be set and > 0");
    if (freq_min < 0 || freq_max < 0) throw ConfigError("frequency gate must be >= 0");
    if (freq_min > 0 && freq_max > 0 && freq_min > freq_max) {
      throw ConfigError("freq_min must be <= freq_max");
    }
    if (epochs_per_check < 1) throw ConfigError("epochs_per_check must be >= 1");
    if (outer_iters < 1) throw ConfigError("outer_iters must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
    if (threads < 1) throw ConfigError("threads must be >= 1");
  }

  void write_kv(std::ostream& out) const {
    out << std::setprecision(17);
    for (const std::string& c : corpus) out << "corpus=" << c << '\n';
    out << "dim=" << dim << '\n';
    out << "window=" << window << '\n';
    out << "negatives=" << negatives << '\n';
    out << "subsample=" << subsample << '\n';
    out << "min_count=" << min_count << '\n';
    out << "loss_threshold=" << loss_threshold << '\n';
    out << "freq_min=" << freq_min << '\n';
    out << "freq_max=" << freq_max << '\n';
    out << "epochs_per_check=" << epochs_per_check << '\n';
    out << "outer_iters=" << outer_iters << '\n';
    out << "clusterer=" << clusterer_name(clusterer) << '\n';
    out << "learning_rate=" << learning_rate << '\n';
    out << "seed=" << seed << '\n';
    out << "threads=" << threads << '\n';
    out << "model_out=" << model_out << '\n';
    out << "context_out=" << context_out << '\n';
    out << "split_log=" << split_log << '\n';
    out << "loss_report=" << loss_report << '\n';
    out << "save_vocab=" << save_vocab << '\n';
    out << "manifest=" << manifest << '\n';
  }

  std::string to_kv() const {
    std::ostringstream out;
    write_kv(out);
    return out.str();
  }

  static RunConfig read_kv(std::istream& in) {
    RunConfig cfg;
    cfg.corpus.clear();
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string_view v(line);
      while (!v.empty() && std::isspace((unsigned char)v.front())) v.remove_prefix(1);
      while (!v.empty() && std::isspace((unsigned char)v.back())) v.remove_suffix(1);
      if (v.empty() || v.front() == '#') continue;
      auto eq = v.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
      }
      const std::string key(v.substr(0, eq));
      const std::string value(v.substr(eq + 1));
      apply_kv(cfg, key, value, line_no);
    }
    return cfg;
  }

 private:
  static void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value,
                       std::size_t line_no) {
    auto bad = [&](const std::string& what) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + what);
    };
    auto as_ll = [&](const std::string& v) -> long long {
      try {
        std::size_t used = 0;
        long long r = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return r;
      } catch (const std::exception&) {
        bad("bad integer \"" + v + "\" for " + key);
        return 0;
      }
    };
    auto as_ull = [&](const std::string& v) -> unsigned long long {
      try {
        std::size_t used = 0;
        unsigned long long r = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return r;
      } catch (const std::exception&) {
        bad("bad integer \"" + v + "\" for " + key);
        return 0;
      }
    };
    auto as_double = [&](const std::string& v) -> double {
      try {
        std::size_t used = 0;
        double r = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument("");
        return r;
      } catch (const std::exception&) {
        bad("bad number \"" + v + "\" for " + key);
        return 0;
      }
    };

    if (key == "corpus") cfg.corpus.push_back(value);
    else if (key == "dim") cfg.dim = int(as_ll(value));
    else if (key == "window") cfg.window = int(as_ll(value));
    else if (key == "negatives") cfg.negatives = int(as_ll(value));
    else if (key == "subsample") cfg.subsample = as_double(value);
    else if (key == "min_count") cfg.min_count = as_ll(value);
    else if (key == "loss_threshold") cfg.loss_threshold = as_double(value);
    else if (key == "freq_min") cfg.freq_min = as_ll(value);
    else if (key == "freq_max") cfg.freq_max = as_ll(value);
    else if (key == "epochs_per_check") cfg.epochs_per_check = int(as_ll(value));
    else if (key == "outer_iters") cfg.outer_iters = int(as_ll(value));
    else if (key == "clusterer") {
      auto c = clusterer_from_name(value);
      if (!c) bad("unknown clusterer \"" + value + "\"");
      cfg.clusterer = *c;
    } else if (key == "learning_rate") cfg.learning_rate = as_double(value);
    else if (key == "seed") cfg.seed = as_ull(value);
    else if (key == "threads") cfg.threads = int(as_ll(value));
    else if (key == "model_out") cfg.model_out = value;
    else if (key == "context_out") cfg.context_out = value;
    else if (key == "split_log") cfg.split_log = value;
    else if (key == "loss_report") cfg.loss_report = value;
    else if (key == "save_vocab") cfg.save_vocab = value;
    else if (key == "manifest") cfg.manifest = value;
    else if (key == "ldmi_version") { /* accepted so a manifest can be replayed */ }
    else bad("unknown config key \"" + key + "\"");
  }
};

// Manifest: version plus the full configuration; replayable as a config
// file to reproduce the run in single-threaded mode.
inline void write_manifest(std::ostream& out, const RunConfig& cfg) {
  out << "ldmi_version=" << kLdmiVersion << '\n';
  cfg.write_kv(out);
}

}  // namespace ldmi
