#include <catch2/catch_amalgamated.hpp>

#include <limits>
#include <sstream>
#include <vector>

#include "ldmi/occurrences.hpp"
#include "synthetic_corpus.hpp"

using namespace ldmi;

namespace {

constexpr double kNoSubsample = std::numeric_limits<double>::infinity();

std::vector<WordId> ids(std::span<const WordId> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST_CASE("window 1 over three tokens") {
  auto corpus = TextCorpus::from_string("a b c");
  auto v = Vocabulary::build(corpus, 1);
  auto store = extract_occurrences(corpus, v, 1, kNoSubsample, 1);
  REQUIRE(store.size() == 3);
  const WordId a = v.id_of("a"), b = v.id_of("b"), c = v.id_of("c");
  CHECK(store.center(0) == a);
  CHECK(ids(store.context(0)) == std::vector<WordId>{b});
  CHECK(store.center(1) == b);
  CHECK(ids(store.context(1)) == std::vector<WordId>{a, c});
  CHECK(store.center(2) == c);
  CHECK(ids(store.context(2)) == std::vector<WordId>{b});
}

TEST_CASE("window 2 on a five-token line gives the middle center four context ids") {
  auto corpus = TextCorpus::from_string("a b c d e");
  auto v = Vocabulary::build(corpus, 1);
  auto store = extract_occurrences(corpus, v, 2, kNoSubsample, 1);
  REQUIRE(store.size() == 5);
  CHECK(store.context(2).size() == 4);
  CHECK(store.sense(2) == 0);
  CHECK(store.position(2) == 2);
}

TEST_CASE("extraction is deterministic given the seed") {
  synth::Options opt;
  opt.sentences = 400;
  auto corpus = synth::generate(opt);
  auto tc = TextCorpus::from_string(corpus.text);
  auto v = Vocabulary::build(tc, 2);
  auto a = extract_occurrences(tc, v, 3, 1e-3, 99);
  auto b = extract_occurrences(tc, v, 3, 1e-3, 99);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.center(i) == b.center(i));
    CHECK(a.position(i) == b.position(i));
    CHECK(ids(a.context(i)) == ids(b.context(i)));
  }
  auto c = extract_occurrences(tc, v, 3, 1e-3, 100);
  bool same = c.size() == a.size();
  for (std::size_t i = 0; same && i < a.size(); ++i) {
    same = a.position(i) == c.position(i) && ids(a.context(i)) == ids(c.context(i));
  }
  CHECK_FALSE(same);  // a different seed drops different tokens
}

TEST_CASE("all context and center ids are valid vocabulary ids") {
  synth::Options opt;
  opt.sentences = 200;
  auto corpus = synth::generate(opt);
  auto tc = TextCorpus::from_string(corpus.text);
  auto v = Vocabulary::build(tc, 3);
  auto store = extract_occurrences(tc, v, 4, 1e-3, 5);
  REQUIRE(store.size() > 0);
  for (std::size_t i = 0; i < store.size(); ++i) {
    REQUIRE(store.center(i) >= 0);
    REQUIRE(store.center(i) < v.size());
    REQUIRE(store.context(i).size() >= 1);
    REQUIRE(store.context(i).size() <= 8);
    for (WordId w : store.context(i)) {
      REQUIRE(w >= 0);
      REQUIRE(w < v.size());
    }
  }
}

TEST_CASE("per-word occurrence count never exceeds vocabulary frequency") {
  synth::Options opt;
  opt.sentences = 300;
  auto corpus = synth::generate(opt);
  auto tc = TextCorpus::from_string(corpus.text);
  auto v = Vocabulary::build(tc, 2);
  auto store = extract_occurrences(tc, v, 3, 1e-3, 17);
  for (WordId w = 0; w < v.size(); ++w) {
    CHECK(store.count_for(w) <= v.frequency(w));
  }
}

TEST_CASE("without sub-sampling, centers are exactly the tokens with an in-vocab neighbor") {
  // min_count 2 leaves singleton tokens out of vocabulary, so some lines mix
  // kept and dropped tokens
  auto text = "a a b c d\nq\nb r b\na c c a zz\n";
  auto tc = TextCorpus::from_string(text);
  auto v = Vocabulary::build(tc, 2);

  // oracle: count in-vocab tokens on lines with >= 2 in-vocab tokens
  std::size_t expected = 0;
  std::istringstream lines{std::string(text)};
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream ls(line);
    std::string tok;
    std::size_t in_vocab = 0;
    while (ls >> tok) {
      if (v.id_of(tok) != kNoWord) ++in_vocab;
    }
    if (in_vocab >= 2) expected += in_vocab;
  }

  for (int window : {1, 2, 5}) {
    auto store = extract_occurrences(tc, v, window, kNoSubsample, 1);
    CHECK(store.size() == expected);
  }
}

TEST_CASE("of_center groups all occurrences of a word") {
  auto tc = TextCorpus::from_string("a b a b a");
  auto v = Vocabulary::build(tc, 1);
  auto store = extract_occurrences(tc, v, 1, kNoSubsample, 1);
  const WordId a = v.id_of("a");
  auto occs = store.of_center(a);
  REQUIRE(occs.size() == 3);
  for (std::uint32_t i : occs) CHECK(store.center(i) == a);
  CHECK(store.count_for(a) == 3);
}

TEST_CASE("sense labels start at zero and are mutable") {
  auto tc = TextCorpus::from_string("a b c");
  auto v = Vocabulary::build(tc, 1);
  auto store = extract_occurrences(tc, v, 1, kNoSubsample, 1);
  CHECK(store.sense(1) == 0);
  store.set_sense(1, 3);
  CHECK(store.sense(1) == 3);
  CHECK(store.view(1).sense == 3);
}
