#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "ldmi/trainer.hpp"
#include "synthetic_corpus.hpp"

using namespace ldmi;

namespace {

Vocabulary tiny_vocab(int n, std::int64_t base_freq = 10) {
  std::string text;
  for (int w = 0; w < n; ++w) {
    const std::string tok = synth::spell("w", w);
    for (std::int64_t i = 0; i < base_freq + (n - w); ++i) text += tok + " ";
    text += "\n";
  }
  return Vocabulary::build(TextCorpus::from_string(text), 1);
}

template <typename Real>
std::string model_bytes(const SenseModel<Real>& m, const Vocabulary& v) {
  std::ostringstream out;
  m.save(out, v);
  m.save_context_vectors(out, v);
  return out.str();
}

}  // namespace

TEST_CASE("sigmoid values and identity") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(sigmoid(20.0) == Catch::Approx(1.0 - 2.0611536181902037e-9).epsilon(1e-12));
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) <= 1.0);
  auto rng = make_rng(4);
  std::uniform_real_distribution<double> u(-30, 30);
  for (int i = 0; i < 200; ++i) {
    const double x = u(rng);
    CHECK(sigmoid(x) + sigmoid(-x) == Catch::Approx(1.0).margin(1e-15));
  }
}

TEST_CASE("init_model bounds, zero context vectors, determinism") {
  auto v = tiny_vocab(6);
  SenseModel<float> m(v.size(), 50, 0.025f, 9);
  for (WordId w = 0; w < v.size(); ++w) {
    CHECK(m.sense_count(w) == 1);
    for (float x : m.input(w, 0)) CHECK(std::abs(x) <= 0.01f);
    for (float x : m.context(w)) CHECK(x == 0.0f);
  }
  SenseModel<float> m2(v.size(), 50, 0.025f, 9);
  CHECK(model_bytes(m, v) == model_bytes(m2, v));
  SenseModel<float> m3(v.size(), 50, 0.025f, 10);
  CHECK(model_bytes(m, v) != model_bytes(m3, v));
}

TEST_CASE("occurrence_loss with all-zero vectors is (|C| + negatives) * ln 2") {
  auto v = tiny_vocab(8);
  SenseModel<double> m(v.size(), 16, 0.025, 2);
  for (WordId w = 0; w < v.size(); ++w) {
    for (auto& x : m.input(w, 0)) x = 0.0;
  }
  std::vector<WordId> ctx{1, 2, 3, 4};
  std::vector<WordId> negs{5, 6, 7, 5, 6, 7, 5, 6, 7, 5};
  Occurrence occ{0, ctx, 0, 0};
  CHECK(occurrence_loss(m, occ, negs) == Catch::Approx(14.0 * std::log(2.0)).epsilon(1e-12));
  CHECK(occurrence_loss(m, occ, negs) == Catch::Approx(9.70406).epsilon(1e-5));
}

TEST_CASE("occurrence_loss with a +20 dot and no negatives") {
  auto v = tiny_vocab(3);
  SenseModel<double> m(v.size(), 2, 0.025, 2);
  auto w = m.input(0, 0);
  w[0] = 4.0;
  w[1] = 0.0;
  auto c = m.context(1);
  c[0] = 5.0;
  c[1] = 0.0;
  std::vector<WordId> ctx{1};
  Occurrence occ{0, ctx, 0, 0};
  const double expected = std::log1p(std::exp(-20.0));  // -log sigmoid(20), stable form
  CHECK(occurrence_loss(m, occ, {}) == Catch::Approx(expected).epsilon(1e-9));
  CHECK(occurrence_loss(m, occ, {}) == Catch::Approx(2.061e-9).epsilon(1e-3));
}

TEST_CASE("occurrence_loss matches an extended-precision direct evaluation") {
  auto v = tiny_vocab(10);
  auto rng = make_rng(31);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  SenseModel<double> m(v.size(), 6, 0.025, 7);
  for (WordId w = 0; w < v.size(); ++w) {
    for (auto& x : m.input(w, 0)) x = u(rng);
    for (auto& x : m.context(w)) x = u(rng);
  }
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<WordId> ctx{1, 2, 3};
    std::vector<WordId> negs{4, 5, 6, 7};
    Occurrence occ{0, ctx, 0, 0};
    long double expected = 0.0L;
    auto wv = m.input(0, 0);
    auto term = [&](WordId j, int sign) {
      long double dot = 0.0L;
      for (int c = 0; c < 6; ++c) dot += (long double)wv[std::size_t(c)] * m.context(j)[std::size_t(c)];
      expected -= std::log(1.0L / (1.0L + std::exp(-sign * dot)));
    };
    for (WordId j : ctx) term(j, +1);
    for (WordId k : negs) term(k, -1);
    CHECK(occurrence_loss(m, occ, negs) == Catch::Approx(double(expected)).epsilon(1e-12));
    for (auto& x : m.input(0, 0)) x = u(rng);  // next trial, new vectors
  }
}

TEST_CASE("occurrence_loss rejects an out-of-range sense label") {
  auto v = tiny_vocab(3);
  SenseModel<float> m(v.size(), 4, 0.025f, 1);
  std::vector<WordId> ctx{1};
  Occurrence occ{0, ctx, 0, 2};
  CHECK_THROWS_AS(occurrence_loss(m, occ, {}), InvariantError);
}

TEST_CASE("analytic gradients match central finite differences") {
  auto v = tiny_vocab(8);
  auto rng = make_rng(100);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  double max_rel = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    SenseModel<double> m(v.size(), 4, 0.025, 1000 + std::uint64_t(trial));
    for (WordId w = 0; w < v.size(); ++w) {
      for (auto& x : m.input(w, 0)) x = u(rng);
      for (auto& x : m.context(w)) x = u(rng);
    }
    std::vector<WordId> ctx{1, 2, 2};  // repeated context member on purpose
    std::vector<WordId> negs{3, 4, 5, 4};
    Occurrence occ{0, ctx, 0, 0};
    auto grads = occurrence_gradients(m, occ, negs);

    const double h = 1e-5;
    auto fd_check = [&](std::span<double> vec, const std::vector<double>& grad) {
      for (std::size_t c = 0; c < vec.size(); ++c) {
        const double keep = vec[c];
        vec[c] = keep + h;
        const double up = occurrence_loss(m, occ, negs);
        vec[c] = keep - h;
        const double down = occurrence_loss(m, occ, negs);
        vec[c] = keep;
        const double fd = (up - down) / (2 * h);
        const double rel = std::abs(grad[c] - fd) / std::max({std::abs(fd), std::abs(grad[c]), 1e-6});
        max_rel = std::max(max_rel, rel);
      }
    };
    fd_check(m.input(0, 0), grads.center);
    for (auto& [id, g] : grads.context) fd_check(m.context(id), g);
  }
  CHECK(max_rel < 1e-4);
}

TEST_CASE("one step on an orthogonal positive pair increases the dot product") {
  auto v = tiny_vocab(2);
  SenseModel<double> m(v.size(), 4, 0.025, 1);
  auto w = m.input(0, 0);
  std::fill(w.begin(), w.end(), 0.0);
  w[0] = 0.3;
  auto c = m.context(1);
  std::fill(c.begin(), c.end(), 0.0);
  c[1] = 0.4;
  REQUIRE(dot(m.input(0, 0), m.context(1)) == 0.0);

  NegativeSampler sampler(v, 0);  // no negatives
  auto rng = make_rng(5);
  TrainWorkspace ws;
  std::vector<WordId> ctx{1};
  sgd_step(m, Occurrence{0, ctx, 0, 0}, sampler, rng, ws);
  CHECK(dot(m.input(0, 0), m.context(1)) > 0.0);
}

TEST_CASE("sgd_step touches only the labeled sense and the touched context vectors") {
  auto v = tiny_vocab(8);
  SenseModel<float> m(v.size(), 8, 0.025f, 3);
  std::vector<float> extra(8, 0.01f);
  std::vector<float> zeros(8, 0.0f);
  m.add_sense(1, extra, zeros);  // center word gets a second sense

  auto snapshot = [&](WordId w, int s) {
    auto sp = m.input(w, s);
    return std::vector<float>(sp.begin(), sp.end());
  };
  const auto sense1_before = snapshot(1, 1);
  const auto other_word_before = snapshot(5, 0);

  NegativeSampler sampler(v, 2);
  auto rng = make_rng(6);
  TrainWorkspace ws;
  std::vector<WordId> ctx{2, 3};
  sgd_step(m, Occurrence{1, ctx, 0, 0}, sampler, rng, ws);

  CHECK(snapshot(1, 1) == sense1_before);          // other sense untouched
  CHECK(snapshot(5, 0) == other_word_before);      // unrelated input untouched
  CHECK(ws.touched.size() <= ctx.size() + ws.drawn.size());
  for (WordId t : ws.touched) {
    const bool in_ctx = std::find(ctx.begin(), ctx.end(), t) != ctx.end();
    const bool in_negs = std::find(ws.drawn.begin(), ws.drawn.end(), t) != ws.drawn.end();
    CHECK((in_ctx || in_negs));
  }
}

TEST_CASE("the loss whose gradient sgd_step applies equals occurrence_loss on the drawn negatives") {
  auto v = tiny_vocab(12);
  SenseModel<double> m(v.size(), 6, 0.025, 21);
  SenseModel<double> before = m;
  NegativeSampler sampler(v, 3);
  auto rng = make_rng(77);
  TrainWorkspace ws;
  ws.record_full_loss = true;
  std::vector<WordId> ctx{1, 2, 3};
  Occurrence occ{0, ctx, 0, 0};
  sgd_step(m, occ, sampler, rng, ws);
  REQUIRE(ws.drawn.size() == 9);  // 3 negatives per positive pair
  const double expected = occurrence_loss(before, occ, ws.drawn);
  CHECK(ws.last_full_loss == Catch::Approx(expected).epsilon(1e-12));
}

TEST_CASE("negative draws exclude the center and context members") {
  auto v = tiny_vocab(30);
  NegativeSampler sampler(v, 5);
  auto rng = make_rng(8);
  std::vector<WordId> ctx{0, 1, 2};
  Occurrence occ{3, ctx, 0, 0};
  std::vector<WordId> out;
  for (int i = 0; i < 200; ++i) sampler.draw_excluding(occ, rng, out);
  REQUIRE(!out.empty());
  for (WordId n : out) {
    CHECK(n != occ.center);
    CHECK(std::find(ctx.begin(), ctx.end(), n) == ctx.end());
  }
}

TEST_CASE("sampler distribution tracks frequency^0.75 within 3 sigma") {
  auto v = tiny_vocab(25, 40);
  NegativeSampler sampler(v, 5);
  std::vector<double> weight(std::size_t(v.size()));
  double total = 0;
  for (WordId w = 0; w < v.size(); ++w) {
    weight[std::size_t(w)] = std::pow(double(v.frequency(w)), 0.75);
    total += weight[std::size_t(w)];
  }
  const int n = 1000000;
  std::vector<int> counts(std::size_t(v.size()), 0);
  auto rng = make_rng(12345);
  for (int i = 0; i < n; ++i) ++counts[std::size_t(sampler.draw(rng))];
  for (WordId w = 0; w < v.size(); ++w) {
    const double p = weight[std::size_t(w)] / total;
    const double sigma = std::sqrt(p * (1 - p) * n);
    CHECK(std::abs(counts[std::size_t(w)] - p * n) <= 3.0 * sigma);
  }
}

TEST_CASE("train_pass validates its preconditions") {
  auto v = tiny_vocab(4);
  auto tc = TextCorpus::from_string("wa wb wc wd");
  auto store = extract_occurrences(tc, v, 2, std::numeric_limits<double>::infinity(), 1);
  SenseModel<float> m(v.size(), 4, 0.025f, 1);
  NegativeSampler sampler(v, 2);
  CHECK_THROWS_AS(train_pass(m, store, sampler, TrainOptions{0, 1, 1}), ConfigError);
  CHECK_THROWS_AS(train_pass(m, store, sampler, TrainOptions{1, 1, 0}), ConfigError);
}

TEST_CASE("one epoch performs exactly one sgd_step per occurrence") {
  synth::Options opt;
  opt.sentences = 50;
  auto corpus = synth::generate(opt);
  auto tc = TextCorpus::from_string(corpus.text);
  auto v = Vocabulary::build(tc, 1);
  auto store = extract_occurrences(tc, v, 2, std::numeric_limits<double>::infinity(), 1);
  SenseModel<float> m(v.size(), 8, 0.025f, 1);
  NegativeSampler sampler(v, 2);
  std::vector<std::uint64_t> counts;
  train_pass(m, store, sampler, TrainOptions{3, 9, 1},
             [&](int, const LossLedger& l) { counts.push_back(l.total_count()); });
  REQUIRE(counts.size() == 3);
  for (std::uint64_t c : counts) CHECK(c == store.size());
}

TEST_CASE("mean contextual loss falls after five epochs on a synthetic corpus") {
  synth::Options opt;
  opt.sentences = 5600;  // ~1e5 tokens
  opt.topic_words = 120;
  opt.pseudo_pairs = 0;
  auto corpus = synth::generate(opt);
  auto tc = TextCorpus::from_string(corpus.text);
  auto v = Vocabulary::build(tc, 5);
  auto store = extract_occurrences(tc, v, 3, 1e-2, 2);
  SenseModel<float> m(v.size(), 16, 0.025f, 3);
  NegativeSampler sampler(v, 3);

  std::vector<double> epoch_means;
  train_pass(m, store, sampler, TrainOptions{5, 4, 1}, [&](int, const LossLedger& l) {
    double sum = 0;
    std::uint64_t n = 0;
    for (WordId w = 0; w < l.word_count(); ++w) {
      if (!l.observed(w, 0)) continue;
      sum += l.average(w, 0) * double(l.count(w, 0));
      n += l.count(w, 0);
    }
    epoch_means.push_back(sum / double(n));
  });
  REQUIRE(epoch_means.size() == 5);
  CHECK(epoch_means.back() < epoch_means.front());
}

TEST_CASE("single-threaded training is reproducible") {
  synth::Options opt;
  opt.sentences = 120;
  auto corpus = synth::generate(opt);
  auto tc = TextCorpus::from_string(corpus.text);
  auto v = Vocabulary::build(tc, 2);
  auto store = extract_occurrences(tc, v, 2, 1e-2, 4);
  NegativeSampler sampler(v, 3);

  SenseModel<float> m1(v.size(), 12, 0.025f, 8);
  SenseModel<float> m2(v.size(), 12, 0.025f, 8);
  train_pass(m1, store, sampler, TrainOptions{2, 5, 1});
  train_pass(m2, store, sampler, TrainOptions{2, 5, 1});
  CHECK(model_bytes(m1, v) == model_bytes(m2, v));
}

TEST_CASE("multi-threaded training also lowers the loss") {
  // same construction as the single-threaded loss test, with two shards
  synth::Options opt;
  opt.sentences = 5600;
  opt.topic_words = 120;
  opt.pseudo_pairs = 0;
  auto corpus = synth::generate(opt);
  auto tc = TextCorpus::from_string(corpus.text);
  auto v = Vocabulary::build(tc, 5);
  auto store = extract_occurrences(tc, v, 3, 1e-2, 2);
  SenseModel<float> m(v.size(), 16, 0.025f, 3);
  NegativeSampler sampler(v, 3);
  std::vector<double> means;
  train_pass(m, store, sampler, TrainOptions{5, 4, 2}, [&](int, const LossLedger& l) {
    double sum = 0;
    std::uint64_t n = 0;
    for (WordId w = 0; w < l.word_count(); ++w) {
      if (!l.observed(w, 0)) continue;
      sum += l.average(w, 0) * double(l.count(w, 0));
      n += l.count(w, 0);
    }
    means.push_back(sum / double(n));
  });
  CHECK(means.back() < means.front());
}
