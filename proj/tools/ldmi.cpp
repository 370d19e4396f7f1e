#include <cstdint>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ldmi/config.hpp"
#include "ldmi/errors.hpp"
#include "ldmi/pipeline.hpp"

namespace {

// Distinct exit codes: 0 success, 1 usage/config, 2 I/O, 3 data format,
// 4 internal invariant violation.
template <typename Fn>
int run_guarded(Fn&& fn) {
  try {
    fn();
    return ldmi::kExitOk;
  } catch (const ldmi::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ldmi::kExitUsage;
  } catch (const ldmi::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ldmi::kExitIo;
  } catch (const ldmi::DataFormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ldmi::kExitDataFormat;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return ldmi::kExitInternal;
  }
}

ldmi::RunConfig load_config_if_given(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      std::ifstream in(argv[i + 1]);
      if (!in) throw ldmi::IoError(std::string("cannot open config file: ") + argv[i + 1]);
      return ldmi::RunConfig::read_kv(in);
    }
  }
  return {};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ldmi: multi-sense word embeddings via loss-driven sense splitting"};
  app.require_subcommand(1);

  // train
  ldmi::RunConfig cfg;
  try {
    cfg = load_config_if_given(argc, argv);
  } catch (const ldmi::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ldmi::kExitIo;
  } catch (const ldmi::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ldmi::kExitUsage;
  }

  auto* train = app.add_subcommand("train", "train sense embeddings on a corpus");
  std::string config_path;
  std::string clusterer_name = ldmi::clusterer_name(cfg.clusterer);
  train->add_option("--config", config_path, "key=value config file; flags override it");
  train->add_option("--corpus", cfg.corpus, "corpus text file(s)");
  train->add_option("--output", cfg.model_out, "model output path");
  train->add_option("--dim", cfg.dim, "embedding dimensionality");
  train->add_option("--window", cfg.window, "symmetric context window");
  train->add_option("--negatives", cfg.negatives, "negative samples per positive pair");
  train->add_option("--subsample", cfg.subsample, "sub-sampling parameter t");
  train->add_option("--min-count", cfg.min_count, "minimum token frequency");
  train->add_option("--loss-threshold", cfg.loss_threshold,
                    "average contextual loss above which a word is split");
  train->add_option("--freq-min", cfg.freq_min, "candidate frequency gate lower bound (0 = auto)");
  train->add_option("--freq-max", cfg.freq_max, "candidate frequency gate upper bound (0 = auto)");
  train->add_option("--epochs-per-check", cfg.epochs_per_check,
                    "SGD passes between multi-sense checks");
  train->add_option("--outer-iters", cfg.outer_iters, "train+split iterations");
  train->add_option("--clusterer", clusterer_name, "occurrence clusterer")
      ->check(CLI::IsMember({"i1", "spherical"}));
  train->add_option("--learning-rate", cfg.learning_rate, "initial AdaGrad learning rate");
  train->add_option("--seed", cfg.seed, "rng seed");
  train->add_option("--threads", cfg.threads, "training threads (1 = deterministic)");
  train->add_option("--context-output", cfg.context_out, "companion context-vector file");
  train->add_option("--split-log", cfg.split_log, "split log path");
  train->add_option("--loss-report", cfg.loss_report, "loss report path prefix");
  train->add_option("--save-vocab", cfg.save_vocab, "vocabulary dump path");
  train->add_option("--manifest", cfg.manifest, "run manifest path");

  // eval
  auto* eval = app.add_subcommand("eval", "score a similarity dataset against a model");
  std::string eval_model, eval_dataset, metric_name = "maxsimc";
  eval->add_option("--model", eval_model, "model file")->required();
  eval->add_option("--dataset", eval_dataset, "dataset file")->required();
  eval->add_option("--metric", metric_name, "maxsimc | avgsimc | avgsim")
      ->check(CLI::IsMember({"maxsimc", "avgsimc", "avgsim"}));

  // neighbors
  auto* neighbors = app.add_subcommand("neighbors", "nearest neighbors of a token's senses");
  std::string nb_model, nb_token;
  int nb_sense = -1;
  int nb_top = 10;
  neighbors->add_option("--model", nb_model, "model file")->required();
  neighbors->add_option("--token", nb_token, "query token")->required();
  neighbors->add_option("--sense", nb_sense, "sense index (default: all senses)");
  neighbors->add_option("--top", nb_top, "neighbors per sense");

  // loss-plot
  auto* plot = app.add_subcommand("loss-plot", "render a loss report as a sorted curve");
  std::string plot_report, plot_out;
  plot->add_option("--report", plot_report, "loss report file")->required();
  plot->add_option("--output", plot_out, "output path (.svg or tabular)")->required();

  // vocab
  auto* vocab = app.add_subcommand("vocab", "build and dump a vocabulary");
  std::vector<std::string> vocab_corpus;
  std::int64_t vocab_min_count = 10;
  std::string vocab_out;
  vocab->add_option("--corpus", vocab_corpus, "corpus text file(s)")->required();
  vocab->add_option("--min-count", vocab_min_count, "minimum token frequency");
  vocab->add_option("--output", vocab_out, "output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return ldmi::kExitUsage;
  }

  if (train->parsed()) {
    return run_guarded([&] {
      cfg.clusterer = *ldmi::clusterer_from_name(clusterer_name);
      ldmi::run_train(cfg, std::cerr);
    });
  }
  if (eval->parsed()) {
    return run_guarded([&] {
      ldmi::run_eval(eval_model, eval_dataset, *ldmi::metric_from_name(metric_name), std::cout);
    });
  }
  if (neighbors->parsed()) {
    return run_guarded([&] {
      std::optional<int> sense;
      if (neighbors->count("--sense") > 0) sense = nb_sense;
      ldmi::run_neighbors(nb_model, nb_token, sense, nb_top, std::cout);
    });
  }
  if (plot->parsed()) {
    return run_guarded([&] { ldmi::run_loss_plot(plot_report, plot_out); });
  }
  if (vocab->parsed()) {
    return run_guarded([&] {
      if (vocab_out.empty()) {
        ldmi::run_vocab(vocab_corpus, vocab_min_count, std::cout);
      } else {
        std::ofstream out(vocab_out);
        if (!out) throw ldmi::IoError("cannot write " + vocab_out);
        ldmi::run_vocab(vocab_corpus, vocab_min_count, out);
      }
    });
  }
  return ldmi::kExitUsage;
}
