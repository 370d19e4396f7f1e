#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ldmi/config.hpp"
#include "ldmi/pipeline.hpp"
#include "synthetic_corpus.hpp"

using namespace ldmi;

namespace {

RunConfig sample_config() {
  RunConfig cfg;
  cfg.corpus = {"data/a.txt", "data/b.txt"};
  cfg.dim = 64;
  cfg.window = 7;
  cfg.negatives = 8;
  cfg.subsample = 2.5e-4;
  cfg.min_count = 3;
  cfg.loss_threshold = 2.15;
  cfg.freq_min = 50;
  cfg.freq_max = 30000;
  cfg.epochs_per_check = 4;
  cfg.outer_iters = 2;
  cfg.clusterer = Clusterer::kSpherical;
  cfg.learning_rate = 0.0125;
  cfg.seed = 987654321;
  cfg.threads = 2;
  cfg.model_out = "out/model.txt";
  cfg.context_out = "out/context.txt";
  cfg.split_log = "out/model.splits";
  cfg.loss_report = "out/model.loss";
  cfg.save_vocab = "out/vocab.tsv";
  cfg.manifest = "out/model.manifest";
  return cfg;
}

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "ldmi_config_test";
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("config serialization is a fixed point") {
  const RunConfig cfg = sample_config();
  const std::string once = cfg.to_kv();
  std::istringstream in(once);
  const RunConfig back = RunConfig::read_kv(in);
  CHECK(back.to_kv() == once);
  CHECK(back.corpus == cfg.corpus);
  CHECK(back.subsample == cfg.subsample);
  CHECK(back.seed == cfg.seed);
  CHECK(back.clusterer == Clusterer::kSpherical);
}

TEST_CASE("manifests replay as config files") {
  const RunConfig cfg = sample_config();
  std::ostringstream out;
  write_manifest(out, cfg);
  std::istringstream in(out.str());
  const RunConfig back = RunConfig::read_kv(in);
  CHECK(back.to_kv() == cfg.to_kv());
}

TEST_CASE("unknown keys and malformed lines are config errors") {
  std::istringstream junk("mystery=1\n");
  CHECK_THROWS_AS(RunConfig::read_kv(junk), ConfigError);
  std::istringstream noeq("dim 5\n");
  CHECK_THROWS_AS(RunConfig::read_kv(noeq), ConfigError);
  std::istringstream badnum("dim=five\n");
  CHECK_THROWS_AS(RunConfig::read_kv(badnum), ConfigError);
  std::istringstream comments("# comment\n\ndim=9\n");
  CHECK(RunConfig::read_kv(comments).dim == 9);
}

TEST_CASE("validate rejects inconsistent configurations") {
  RunConfig cfg = sample_config();
  cfg.validate();

  auto broken = cfg;
  broken.corpus.clear();
  CHECK_THROWS_AS(broken.validate(), ConfigError);
  broken = cfg;
  broken.loss_threshold = 0;
  CHECK_THROWS_AS(broken.validate(), ConfigError);
  broken = cfg;
  broken.freq_min = 100;
  broken.freq_max = 10;
  CHECK_THROWS_AS(broken.validate(), ConfigError);
  broken = cfg;
  broken.window = 0;
  CHECK_THROWS_AS(broken.validate(), ConfigError);
  broken = cfg;
  broken.subsample = 0;
  CHECK_THROWS_AS(broken.validate(), ConfigError);
}

TEST_CASE("run_train writes model, reports, manifest, and is reproducible") {
  const auto dir = temp_dir();
  synth::Options sopt;
  sopt.sentences = 900;
  sopt.topic_words = 60;
  sopt.pseudo_pairs = 2;
  auto corpus = synth::generate(sopt);
  const auto corpus_path = dir / "corpus.txt";
  {
    std::ofstream out(corpus_path);
    out << corpus.text;
  }

  RunConfig cfg;
  cfg.corpus = {corpus_path.string()};
  cfg.dim = 12;
  cfg.window = 3;
  cfg.negatives = 3;
  cfg.subsample = 1e-2;
  cfg.min_count = 5;
  cfg.loss_threshold = 0.4;
  cfg.freq_min = 10;
  cfg.freq_max = 100000;
  cfg.epochs_per_check = 2;
  cfg.outer_iters = 2;
  cfg.learning_rate = 0.05;
  cfg.seed = 77;
  cfg.model_out = (dir / "model.txt").string();
  cfg.context_out = (dir / "context.txt").string();
  cfg.save_vocab = (dir / "vocab.tsv").string();

  std::ostringstream diag;
  auto summary = run_train(cfg, diag);
  CHECK(summary.vocab_size > 0);
  CHECK(summary.occurrences > 0);

  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  const std::string model_once = slurp(dir / "model.txt");
  CHECK(!model_once.empty());
  CHECK(!slurp(dir / "context.txt").empty());
  CHECK(!slurp(dir / "vocab.tsv").empty());
  CHECK(!slurp(dir / "model.txt.manifest").empty());
  CHECK(!slurp(dir / "model.txt.loss.iter1.tsv").empty());
  CHECK(!slurp(dir / "model.txt.loss.iter2.tsv").empty());

  // the model file parses back and matches the vocabulary
  {
    std::ifstream in(dir / "model.txt");
    auto emb = EmbeddingSet::load(in);
    CHECK(emb.word_count() == summary.vocab_size);
    CHECK(emb.entry_count() == summary.sense_entries);
    CHECK(emb.dim() == 12);
  }

  // byte-identical rerun with the same config and seed
  std::ostringstream diag2;
  run_train(cfg, diag2);
  CHECK(slurp(dir / "model.txt") == model_once);

  // the manifest replays to the resolved configuration
  {
    std::ifstream in(dir / "model.txt.manifest");
    auto replay = RunConfig::read_kv(in);
    CHECK(replay.seed == cfg.seed);
    CHECK(replay.dim == cfg.dim);
    CHECK(replay.split_log == cfg.model_out + ".splits");
  }
}

TEST_CASE("loss-plot emits ascending points and is deterministic") {
  const auto dir = temp_dir();
  const auto report = dir / "plot_in.tsv";
  {
    std::ofstream out(report);
    out << "b\t40\t0.9\na\t50\t0.2\nc\t30\t0.5\n";  // deliberately unsorted
  }
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  const auto dat = dir / "plot_out.dat";
  run_loss_plot(report.string(), dat.string());
  const std::string table = slurp(dat);
  CHECK(table == "0\ta\t0.2\n1\tc\t0.5\n2\tb\t0.9\n");
  run_loss_plot(report.string(), dat.string());
  CHECK(slurp(dat) == table);

  const auto svg = dir / "plot_out.svg";
  run_loss_plot(report.string(), svg.string());
  const std::string svg_text = slurp(svg);
  CHECK(svg_text.find("<svg") != std::string::npos);
  CHECK(svg_text.find("polyline") != std::string::npos);
  run_loss_plot(report.string(), svg.string());
  CHECK(slurp(svg) == svg_text);

  const auto empty = dir / "empty.tsv";
  {
    std::ofstream out(empty);
  }
  CHECK_THROWS_AS(run_loss_plot(empty.string(), dat.string()), DataFormatError);
}

TEST_CASE("run_train propagates I/O failures") {
  RunConfig cfg;
  cfg.corpus = {"/nonexistent/nowhere.txt"};
  cfg.model_out = "/tmp/ldmi_never_written.txt";
  cfg.loss_threshold = 1.0;
  std::ostringstream diag;
  CHECK_THROWS_AS(run_train(cfg, diag), IoError);
}
