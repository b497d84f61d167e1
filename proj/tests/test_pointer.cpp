#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "memrw/error.hpp"
#include "memrw/nn/gradcheck.hpp"
#include "memrw/pointer.hpp"
#include "reference.hpp"

using namespace memrw;
using namespace memrw::pointer;
using memrw::testing::randomize;
using nn::Matrix;

namespace {

corpus::NBest nbest(std::vector<std::string> hyps) {
  corpus::NBest nb;
  double s = 0.0;
  for (const auto& h : hyps) {
    nb.hyps.push_back(corpus::split_words(h));
    nb.scores.push_back(s);
    s -= 1.0;
  }
  return nb;
}

corpus::UserMemory memory_of(std::vector<std::pair<std::string, int>> entries) {
  corpus::UserMemory m;
  m.user_id = "u";
  for (const auto& [text, f] : entries) m.entries.push_back({{corpus::split_words(text), "X", {}}, f});
  return m;
}

subword::SubwordVocab small_vocab() {
  std::vector<corpus::Tokens> text;
  for (const char* s : {"turn on the laundry room", "turn off the fan", "set the lamp to white",
                        "launch room on", "bedroom bathroom off", "a b c d"}) {
    text.push_back(corpus::split_words(s));
  }
  return subword::learn_bpe(text, 25);
}

PointerConfig small_config() {
  PointerConfig c;
  c.embedding_dim = 4;
  c.hidden_dim = 3;
  c.attention_dim = 3;
  return c;
}

double sum_of(const Matrix& m) { return m.sum(); }

}  // namespace

TEST_CASE("rewrite probability is the nested geometric mean") {
  const std::vector<double> ones{1.0, 1.0, 1.0};
  CHECK(rewrite_probability(ones, ones) == 1.0);
  const std::vector<double> w{0.9, 0.8};
  const std::vector<double> r{0.95};
  CHECK(rewrite_probability(w, r) == doctest::Approx(0.8978).epsilon(1e-4));
  CHECK(rewrite_probability(w, r) ==
        doctest::Approx(std::sqrt(std::sqrt(0.72) * 0.95)).epsilon(1e-14));
  const std::vector<double> w2{0.8, 0.9};
  CHECK(rewrite_probability(w2, r) == rewrite_probability(w, r));
  const std::vector<double> w3{0.8, 0.91};
  CHECK(rewrite_probability(w3, r) > rewrite_probability(w2, r));
  const std::vector<double> zero{0.0, 0.9};
  CHECK(rewrite_probability(zero, r) == 0.0);
  CHECK_THROWS_AS(rewrite_probability({}, r), Error);
  CHECK_THROWS_AS(rewrite_probability(w, {}), Error);
}

TEST_CASE("source encoding shapes and the frequency feature") {
  PointerModel m(small_vocab(), small_config());
  m.initialize(1);
  nn::Graph g(m.params());
  const auto mem = memory_of({{"laundry room on", 1}, {"turn off the fan", 3}});
  const Sources s = m.encode_sources(g, nbest({"launch room on", "laundry room"}), &mem);
  // Each hypothesis is encoded with EOS appended.
  CHECK(s.nbest.offsets == std::vector<nn::Index>{0, 4, 7});
  CHECK(g.value(s.nbest.keys).cols() == 7);
  CHECK(g.value(s.nbest.keys).rows() == 6);
  REQUIRE(s.memory.has_value());
  CHECK(s.memory->offsets == std::vector<nn::Index>{0, 3, 7});
  CHECK(s.words[static_cast<std::size_t>(s.nbest.word_ids[3])] == kEosWord);

  const Matrix x = g.value(m.memory_inputs(g, mem.entries[0]));
  CHECK(x.rows() == 5);
  for (nn::Index t = 0; t < x.cols(); ++t) CHECK(x(4, t) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(g.value(m.memory_inputs(g, mem.entries[1]))(4, 0) == doctest::Approx(std::log(4.0)));

  const Sources none = m.encode_sources(g, nbest({"fan off"}), nullptr);
  CHECK_FALSE(none.memory.has_value());
  PointerConfig c = small_config();
  c.no_memory = true;
  PointerModel nm(small_vocab(), c);
  nn::Graph g2(nm.params());
  CHECK_FALSE(nm.encode_sources(g2, nbest({"fan off"}), &mem).memory.has_value());
}

TEST_CASE("hierarchical attention copy distribution") {
  PointerModel m(small_vocab(), small_config());
  std::mt19937_64 rng(4);
  randomize(m.params(), rng, 0.8);
  nn::Graph g(m.params());

  SUBCASE("single utterance with one token") {
    const auto mem = memory_of({{"fan", 2}});
    const Sources s = m.encode_sources(g, nbest({"a"}), &mem);
    const HierarchicalOutput h = m.attend_memory(g, g.constant(Matrix::Constant(9, 1, 0.3)), s);
    const Matrix copy = g.value(h.copy);
    CHECK(copy(s.word_index.at("fan"), 0) == 1.0);
    CHECK(sum_of(copy) == 1.0);
  }

  SUBCASE("2 x 2 memory matches scalar arithmetic") {
    const auto mem = memory_of({{"a b", 1}, {"b c", 2}});
    const Sources s = m.encode_sources(g, nbest({"d"}), &mem);
    const Matrix q = Matrix::Constant(9, 1, 0.5);
    const HierarchicalOutput h = m.attend_memory(g, g.constant(q), s);
    const Matrix keys = g.value(s.memory->keys);
    const auto& p = m.params();
    const auto& wa = m.memory_word_attention();
    const auto& ua = m.memory_utt_attention();
    auto additive = [&](const nn::Attention& a, const Matrix& key) {
      const Matrix pre = p.value(a.w_query) * q + p.value(a.w_key) * key;
      return (p.value(a.v) * pre.array().tanh().matrix())(0, 0);
    };
    double word_w[4];
    for (int u = 0; u < 2; ++u) {
      const double s0 = std::exp(additive(wa, keys.col(2 * u)));
      const double s1 = std::exp(additive(wa, keys.col(2 * u + 1)));
      word_w[2 * u] = s0 / (s0 + s1);
      word_w[2 * u + 1] = s1 / (s0 + s1);
    }
    Matrix summary(6, 2);
    for (int u = 0; u < 2; ++u) summary.col(u) = word_w[2 * u] * keys.col(2 * u) + word_w[2 * u + 1] * keys.col(2 * u + 1);
    const double e0 = std::exp(additive(ua, summary.col(0)));
    const double e1 = std::exp(additive(ua, summary.col(1)));
    const double u0 = e0 / (e0 + e1);
    const double u1 = e1 / (e0 + e1);
    const Matrix copy = g.value(h.copy);
    CHECK(copy(s.word_index.at("a"), 0) == doctest::Approx(u0 * word_w[0]).epsilon(1e-12));
    CHECK(copy(s.word_index.at("b"), 0) == doctest::Approx(u0 * word_w[1] + u1 * word_w[2]).epsilon(1e-12));
    CHECK(copy(s.word_index.at("c"), 0) == doctest::Approx(u1 * word_w[3]).epsilon(1e-12));
    CHECK(copy(s.word_index.at("d"), 0) == 0.0);
    const Matrix ctx = u0 * summary.col(0) + u1 * summary.col(1);
    CHECK((g.value(h.context) - ctx).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(g.value(h.utt_weights).sum() == doctest::Approx(1.0).epsilon(1e-15));
  }

  SUBCASE("repeated words accumulate") {
    const auto mem = memory_of({{"fan fan", 1}, {"a fan", 1}});
    const Sources s = m.encode_sources(g, nbest({"d"}), &mem);
    const HierarchicalOutput h = m.attend_memory(g, g.constant(Matrix::Constant(9, 1, -0.2)), s);
    const Matrix ww = g.value(h.word_weights);
    const Matrix uw = g.value(h.utt_weights);
    const double fan = uw(0, 0) * (ww(0, 0) + ww(1, 0)) + uw(1, 0) * ww(3, 0);
    CHECK(g.value(h.copy)(s.word_index.at("fan"), 0) == doctest::Approx(fan).epsilon(1e-14));
    CHECK(g.value(h.copy).sum() == doctest::Approx(1.0).epsilon(1e-14));
  }
}

TEST_CASE("decode step mixture contracts") {
  PointerModel m(small_vocab(), small_config());
  std::mt19937_64 rng(8);
  randomize(m.params(), rng, 0.8);
  const auto mem = memory_of({{"laundry room on", 2}, {"turn off the fan", 1}});
  const auto nb = nbest({"launch room on", "lunch room on"});

  SUBCASE("forced n-best gate returns the n-best copy distribution") {
    m.params().value(m.gate().w).setZero();
    m.params().value(m.gate().b) << 1000.0, -1000.0;
    nn::Graph g(m.params());
    const Sources s = m.encode_sources(g, nb, &mem);
    const StepOutput out = m.decode_step(g, s, m.initial_state(s), kBosWord);
    const HierarchicalOutput h = m.attend_nbest(g, out.state.h, s);
    CHECK((g.value(out.word_dist) - g.value(h.copy)).cwiseAbs().maxCoeff() == 0.0);
    // Support is a subset of n-best words.
    const Matrix d = g.value(out.word_dist);
    CHECK(d(s.word_index.at("laundry"), 0) == 0.0);
    CHECK(d(s.word_index.at("fan"), 0) == 0.0);
  }

  SUBCASE("forced memory gate keeps mass on memory words") {
    m.params().value(m.gate().w).setZero();
    m.params().value(m.gate().b) << -1000.0, 1000.0;
    nn::Graph g(m.params());
    const Sources s = m.encode_sources(g, nb, &mem);
    const Matrix d = g.value(m.decode_step(g, s, m.initial_state(s), kBosWord).word_dist);
    CHECK(d(s.word_index.at("launch"), 0) == 0.0);
    CHECK(d(s.word_index.at("lunch"), 0) == 0.0);
  }

  SUBCASE("memory-only words are bounded by the memory gate") {
    nn::Graph g(m.params());
    const Sources s = m.encode_sources(g, nb, &mem);
    const StepOutput out = m.decode_step(g, s, m.initial_state(s), kBosWord);
    const Matrix d = g.value(out.word_dist);
    const Matrix gates = g.value(out.gates);
    REQUIRE(gates.rows() == 2);
    for (const char* w : {"laundry", "turn", "off", "the", "fan"}) {
      CHECK(d(s.word_index.at(w), 0) <= gates(1, 0) + 1e-15);
    }
    CHECK(d.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(gates.sum() == doctest::Approx(1.0).epsilon(1e-12));
    const double rw = g.scalar(out.rewritable);
    CHECK(rw > 0.0);
    CHECK(rw < 1.0);
  }
}

TEST_CASE("randomized steps stay normalized") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    PointerConfig c = small_config();
    c.generation_vocab = trial % 2 == 1;
    c.attention_kind = trial % 4 < 2 ? nn::AttentionKind::kAdditive : nn::AttentionKind::kMultiplicative;
    PointerModel m(small_vocab(), c, {"lamp", "white", kEosWord});
    randomize(m.params(), rng, 1.5);
    nn::Graph g(m.params());
    const auto mem = memory_of({{"laundry room on", 2}, {"turn off the fan", 1}, {"a b", 4}});
    const Sources s = m.encode_sources(g, nbest({"launch room on", "c d", "room"}), trial % 3 ? &mem : nullptr);
    nn::LstmState st = m.initial_state(s);
    for (const char* prev : {"<s>", "laundry", "room"}) {
      const StepOutput out = m.decode_step(g, s, st, prev);
      const Matrix d = g.value(out.word_dist);
      CHECK(std::abs(d.sum() - 1.0) < 1e-6);
      CHECK(d.minCoeff() >= 0.0);
      const Matrix gates = g.value(out.gates);
      CHECK(std::abs(gates.sum() - 1.0) < 1e-6);
      CHECK(gates.minCoeff() >= 0.0);
      st = out.state;
    }
  }
}

TEST_CASE("greedy decoding boundaries") {
  PointerConfig c = small_config();
  c.max_len = 3;
  PointerModel m(small_vocab(), c);
  std::mt19937_64 rng(2);
  randomize(m.params(), rng, 0.5);
  SUBCASE("EOS only source stops immediately") {
    const DecodeResult r = m.greedy_decode(nbest({"</s>"}), nullptr);
    CHECK(r.words.empty());
    CHECK(r.word_probs == std::vector<double>{1.0});
    CHECK(r.rw_probs.size() == 1);
    const RewriteDecision d = m.rewrite(nbest({"</s>"}), nullptr, 0.0);
    CHECK_FALSE(d.rewrite);
    CHECK_FALSE(d.candidate.has_value());
  }
  SUBCASE("output never exceeds max_len") {
    // EOS cannot win when every hypothesis is long and attention is flat.
    m.params().value(m.gate().w).setZero();
    for (std::size_t i = 0; i < m.params().size(); ++i) {
      const std::string& name = m.params().name(nn::ParamId{i});
      if (name.find("_att.") != std::string::npos) m.params().value(nn::ParamId{i}).setZero();
    }
    const DecodeResult r = m.greedy_decode(nbest({"a b a b"}), nullptr);
    CHECK(r.words.size() == 3);
    CHECK(r.word_probs.size() == 3);
    // Flat attention puts 2/5 on "a" and on "b"; ties go to the smaller word.
    CHECK(r.words == corpus::Tokens{"a", "a", "a"});
    CHECK(r.word_probs[0] == doctest::Approx(0.4).epsilon(1e-12));
  }
}

TEST_CASE("pointer loss arithmetic and masking") {
  PointerConfig c = small_config();
  c.no_memory = true;
  PointerModel m(small_vocab(), c);
  m.initialize(3);
  // Flat attention over "a </s>" gives each word 1/2; a zero head gives 1/2.
  for (std::size_t i = 0; i < m.params().size(); ++i) {
    const std::string& name = m.params().name(nn::ParamId{i});
    if (name.find("_att.") != std::string::npos || name.rfind("rewritable", 0) == 0) {
      m.params().value(nn::ParamId{i}).setZero();
    }
  }
  corpus::RephrasePair pair{"u", nbest({"a"}), {{"a"}, "X", {}}, true};
  nn::Graph g(m.params());
  CHECK(g.scalar(m.loss(g, pair, nullptr)) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  pair.rewritable = false;
  nn::Graph g2(m.params());
  // Only the BCE term is left: 0.5 * ln 2.
  CHECK(g2.scalar(m.loss(g2, pair, nullptr)) == doctest::Approx(0.5 * std::log(2.0)).epsilon(1e-12));

  PointerConfig c0 = c;
  c0.lambda = 0.0;
  PointerModel m0(small_vocab(), c0);
  m0.initialize(3);
  corpus::RephrasePair eos_only{"u", nbest({"</s>"}), {{}, "X", {}}, true};
  nn::Graph g3(m0.params());
  // Probabilities are clamped below 1, so the loss is zero up to the clamp.
  CHECK(g3.scalar(m0.loss(g3, eos_only, nullptr)) < 1e-11);
  eos_only.rewritable = false;
  nn::Graph g4(m0.params());
  CHECK(g4.scalar(m0.loss(g4, eos_only, nullptr)) == 0.0);
}

TEST_CASE("unknown targets are clamped, not dropped") {
  PointerModel m(small_vocab(), small_config());
  m.initialize(3);
  corpus::RephrasePair pair{"u", nbest({"a"}), {{"zebra"}, "X", {}}, true};
  nn::Graph g(m.params());
  const double l = g.scalar(m.loss(g, pair, nullptr));
  CHECK(std::isfinite(l));
  // Half of the CE mass comes from the floored step: 0.5 * -log(1e-12) / 2.
  CHECK(l > 0.25 * -std::log(nn::kProbFloor));
}

TEST_CASE("lambda one leaves the word side untouched") {
  PointerConfig c = small_config();
  c.lambda = 1.0;
  PointerModel m(small_vocab(), c);
  std::mt19937_64 rng(5);
  randomize(m.params(), rng);
  const auto mem = memory_of({{"laundry room on", 2}});
  corpus::RephrasePair pair{"u", nbest({"launch room on"}), {{"laundry", "room", "on"}, "X", {}}, true};
  nn::Gradients grads(m.params());
  m.pair_loss(m.params(), pair, &mem, &grads);
  CHECK(grads[m.gate().w].cwiseAbs().maxCoeff() == 0.0);
  CHECK(grads[m.gate().b].cwiseAbs().maxCoeff() == 0.0);
  CHECK(grads[m.rewritable_head().w].cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("no-memory mode equals an empty memory") {
  PointerConfig a = small_config();
  a.no_memory = true;
  PointerConfig b = small_config();
  PointerModel with_flag(small_vocab(), a);
  PointerModel empty(small_vocab(), b);
  with_flag.initialize(9);
  empty.initialize(9);
  const auto mem = memory_of({{"laundry room on", 2}});
  const corpus::UserMemory none;
  const auto nb = nbest({"launch room on", "laundry room on"});
  const DecodeResult r1 = with_flag.greedy_decode(nb, &mem);
  const DecodeResult r2 = empty.greedy_decode(nb, &none);
  CHECK(r1.words == r2.words);
  CHECK(r1.word_probs == r2.word_probs);
  CHECK(r1.rw_probs == r2.rw_probs);
  corpus::RephrasePair pair{"u", nb, {{"laundry", "room", "on"}, "X", {}}, true};
  nn::Gradients g1(with_flag.params());
  nn::Gradients g2(empty.params());
  CHECK(with_flag.pair_loss(with_flag.params(), pair, &mem, &g1).loss_sum ==
        empty.pair_loss(empty.params(), pair, &none, &g2).loss_sum);
  for (std::size_t i = 0; i < with_flag.params().size(); ++i) {
    CHECK(g1[nn::ParamId{i}] == g2[nn::ParamId{i}]);
  }
}

TEST_CASE("pointer loss gradients match finite differences") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 6; ++trial) {
    PointerConfig c = small_config();
    c.embedding_dim = 2;
    c.hidden_dim = 2;
    c.attention_dim = 2;
    c.generation_vocab = trial % 2 == 1;
    c.attention_kind = trial < 3 ? nn::AttentionKind::kAdditive : nn::AttentionKind::kMultiplicative;
    PointerModel m(small_vocab(), c, {"a", "fan", kEosWord});
    randomize(m.params(), rng, 0.7);
    const auto mem = memory_of({{"fan on", 3}, {"a b", 1}});
    corpus::RephrasePair pair{"u", nbest({"fan", "a"}), {{"fan", "on"}, "X", {}}, trial != 2};
    const auto res = nn::grad_check(
        m.params(),
        [&](const nn::ParamStore& ps, nn::Gradients* grads) {
          return m.pair_loss(ps, pair, &mem, grads).loss_sum;
        },
        1e-5, 6, static_cast<std::uint64_t>(trial + 1));
    INFO("worst " << res.worst_param);
    CHECK(res.max_rel_error < 1e-4);
  }
}

TEST_CASE("learns to rerank without memory") {
  // The rephrase is always the second hypothesis; the first one contains a
  // word that never appears in a rephrase.
  const std::vector<std::string> devices{"fan", "lamp", "tv", "den", "attic"};
  const std::vector<std::string> bad{"fun", "lump", "tea", "then", "addict"};
  corpus::DatasetSplit split;
  std::vector<corpus::Tokens> text;
  for (int i = 0; i < 20; ++i) {
    const std::string verb = i % 2 ? "on" : "off";
    const std::size_t d = static_cast<std::size_t>(i) % devices.size();
    const std::size_t o = static_cast<std::size_t>(i * 3 + 1) % devices.size();
    corpus::NBest nb;
    nb.hyps = {{"turn", verb, "the", bad[d]}, {"turn", verb, "the", devices[d]},
               {"turn", verb, devices[o]}};
    nb.scores = {0.0, -1.0, -2.0};
    corpus::RephrasePair p{"u" + std::to_string(i), nb,
                           {nb.hyps[1], "TurnOn", {{"device", devices[d]}}}, true};
    for (const auto& h : nb.hyps) text.push_back(h);
    split.train.push_back(p);
  }
  PointerConfig c = small_config();
  c.no_memory = true;
  c.embedding_dim = 16;
  c.hidden_dim = 16;
  c.attention_dim = 16;
  PointerModel m(subword::learn_bpe(text, 30), c);
  m.initialize(2);
  nn::Adam adam(m.params(), {.lr = 0.01});
  PointerTrainConfig tc;
  tc.options.epochs = 60;
  tc.options.batch_size = 4;
  tc.options.seed = 1;
  train_pointer(m, adam, split, tc);
  int hits = 0;
  for (const auto& p : split.train) {
    if (m.greedy_decode(p.first_turn, nullptr).words == p.first_turn.hyps[1]) ++hits;
  }
  CHECK(hits >= 18);
}

TEST_CASE("training is deterministic and independent of thread count") {
  corpus::DatasetSplit split;
  const auto mem = memory_of({{"laundry room on", 2}, {"turn off the fan", 1}});
  split.memories["u"] = mem;
  for (int i = 0; i < 6; ++i) {
    split.train.push_back({"u", nbest({"launch room on", "lunch room on"}),
                           {{"laundry", "room", "on"}, "X", {}}, i % 3 != 0});
  }
  auto run = [&](int threads) {
    PointerModel m(small_vocab(), small_config());
    m.initialize(12);
    nn::Adam adam(m.params());
    PointerTrainConfig tc;
    tc.options.epochs = 3;
    tc.options.batch_size = 4;
    tc.options.seed = 5;
    tc.options.threads = threads;
    const auto loss = train_pointer(m, adam, split, tc).epoch_loss;
    std::vector<Matrix> values;
    for (std::size_t i = 0; i < m.params().size(); ++i) values.push_back(m.params().value(nn::ParamId{i}));
    return std::make_pair(loss, values);
  };
  const auto a = run(1);
  CHECK(a == run(1));
  CHECK(a == run(2));
  CHECK(a == run(3));
}

TEST_CASE("pointer config validation") {
  PointerConfig c;
  c.lambda = 1.5;
  CHECK_THROWS_AS(c.validate(), Error);
  c = PointerConfig{};
  c.max_len = 0;
  CHECK_THROWS_AS(c.validate(), Error);
  c = PointerConfig{};
  c.nbest_size = 0;
  CHECK_THROWS_AS(c.validate(), Error);
}
