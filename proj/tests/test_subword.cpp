#include <random>
#include <sstream>

#include "doctest.h"
#include "memrw/error.hpp"
#include "memrw/subword.hpp"

using namespace memrw;
using namespace memrw::subword;

namespace {

std::vector<std::string> pieces(const SubwordVocab& v, const std::string& word) {
  std::vector<std::string> out;
  for (int id : v.encode_word(word)) out.push_back(v.symbol(id));
  return out;
}

std::vector<std::vector<std::string>> words(std::initializer_list<const char*> ws) {
  std::vector<std::vector<std::string>> c;
  for (const char* w : ws) c.push_back({w});
  return c;
}

}  // namespace

TEST_CASE("single character corpus learns nothing") {
  SubwordVocab v = learn_bpe(words({"a"}), 10);
  CHECK(v.merges().empty());
  CHECK(v.id("a</w>") >= kNumSpecials);
  CHECK(v.encode_word("a") == std::vector<int>{v.id("a</w>")});
}

TEST_CASE("most frequent pair is merged first") {
  // a a a b</w>: (a,a) occurs twice, (a,b</w>) once.
  SubwordVocab v = learn_bpe(words({"aaab"}), 1);
  REQUIRE(v.merges().size() == 1);
  CHECK(v.merges()[0] == MergeRule{"a", "a", 0});
}

TEST_CASE("hand trace on low low lower") {
  // Pair counts: (l,o)=3, (o,w</w>)=2, (o,w)=1, (w,e)=1, (e,r</w>)=1.
  // Merge 0: (l,o). Recount: (lo,w</w>)=2, others 1. Merge 1: (lo,w</w>).
  SubwordVocab v = learn_bpe(words({"low", "low", "lower"}), 2);
  REQUIRE(v.merges().size() == 2);
  CHECK(v.merges()[0] == MergeRule{"l", "o", 0});
  CHECK(v.merges()[1] == MergeRule{"lo", "w</w>", 1});
  CHECK(pieces(v, "low") == std::vector<std::string>{"low</w>"});
  CHECK(pieces(v, "lower") == std::vector<std::string>{"lo", "w", "e", "r</w>"});
}

TEST_CASE("ties break toward the lexicographically smallest pair") {
  // Every pair occurs once: (a,b), (b,c</w>), (x,y</w>).
  SubwordVocab v = learn_bpe(words({"abc", "xy"}), 1);
  REQUIRE(v.merges().size() == 1);
  CHECK(v.merges()[0] == MergeRule{"a", "b", 0});
}

TEST_CASE("merge count is capped by available pairs") {
  SubwordVocab v = learn_bpe(words({"ab", "ab"}), 50);
  CHECK(v.merges().size() == 1);
}

TEST_CASE("unknown characters map to one UNK each") {
  SubwordVocab v = learn_bpe(words({"low", "lower"}), 3);
  CHECK(v.encode_word("zz") == std::vector<int>{kUnk, kUnk});
  auto mixed = v.encode_word("lzw");
  CHECK(mixed.size() == 3);
  CHECK(mixed[1] == kUnk);
}

TEST_CASE("errors and specials") {
  CHECK_THROWS_AS(learn_bpe({}, 3), Error);
  CHECK_THROWS_AS(learn_bpe({{}}, 3), Error);
  SubwordVocab v = learn_bpe(words({"abc"}), 1);
  CHECK_THROWS_AS(v.encode_word(""), std::invalid_argument);
  CHECK(v.encode_word("</s>") == std::vector<int>{kEos});
  CHECK(v.encode_word("<sep>") == std::vector<int>{kSep});
}

TEST_CASE("learned vocab properties on a random corpus") {
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> len(1, 8), letter(0, 5);
  std::vector<std::vector<std::string>> corpus;
  for (int s = 0; s < 60; ++s) {
    std::vector<std::string> seq;
    for (int w = 0; w < 4; ++w) {
      std::string word;
      for (int k = len(rng); k > 0; --k) word += static_cast<char>('a' + letter(rng));
      seq.push_back(word);
    }
    corpus.push_back(seq);
  }
  SubwordVocab a = learn_bpe(corpus, 40);
  SubwordVocab b = learn_bpe(corpus, 40);
  CHECK(a.merges() == b.merges());
  CHECK(a.symbols() == b.symbols());
  for (const auto& seq : corpus) {
    for (const auto& w : seq) {
      auto ids = a.encode_word(w);
      CHECK(ids.size() <= w.size() + 1);
      CHECK(std::find(ids.begin(), ids.end(), kUnk) == ids.end());
      CHECK(a.decode(ids) == w);
    }
  }
  std::ostringstream text;
  a.save_merges(text);
  std::istringstream in(text.str());
  CHECK(load_merges(in) == a.merges());
}

TEST_CASE("word embedding sums rows") {
  nn::ParamStore store;
  EmbeddingTable t = EmbeddingTable::create(store, "emb", 3, 10);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> d(-1, 1);
  for (nn::Index c = 0; c < 10; ++c)
    for (nn::Index r = 0; r < 3; ++r) store.value(t.table)(r, c) = d(rng);
  store.value(t.table).col(3) << 1, 0, 0;
  store.value(t.table).col(7) << 0, 2, 0;
  nn::Graph g(store);
  const std::vector<int> k{5}, kk{5, 5}, pair{3, 7};
  CHECK(g.value(t.word_embedding(g, k)).isApprox(store.value(t.table).col(5)));
  CHECK(g.value(t.word_embedding(g, kk)).isApprox(2.0 * store.value(t.table).col(5)));
  nn::Matrix expect(3, 1);
  expect << 1, 2, 0;
  CHECK(g.value(t.word_embedding(g, pair)) == expect);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<int> id(0, 9);
    std::vector<int> a{id(rng), id(rng)}, b{id(rng)};
    std::vector<int> ab = a;
    ab.insert(ab.end(), b.begin(), b.end());
    nn::Matrix lhs = g.value(t.word_embedding(g, ab));
    nn::Matrix rhs = g.value(t.word_embedding(g, a)) + g.value(t.word_embedding(g, b));
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
  const std::vector<int> bad{10};
  CHECK_THROWS_AS(t.word_embedding(g, bad), Error);
}
