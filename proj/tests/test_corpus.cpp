#include <filesystem>
#include <set>

#include "doctest.h"
#include "memrw/corpus_io.hpp"
#include "memrw/error.hpp"
#include "memrw/grammar.hpp"
#include "memrw/synthetic.hpp"

using namespace memrw;
using namespace memrw::corpus;

namespace {

Utterance utt(const char* text, const char* intent, Slots slots) {
  return Utterance{split_words(text), intent, std::move(slots)};
}

GenConfig small_config() {
  GenConfig cfg;
  cfg.n_users = 20;
  cfg.n_pairs = 300;
  return cfg;
}

}  // namespace

TEST_CASE("semantic match ignores wording") {
  auto a = utt("turn on the light", "TurnOn", {{"device", "light"}});
  auto b = utt("can you turn on light", "TurnOn", {{"device", "light"}});
  CHECK(semantic_match(a, b));
  CHECK(semantic_match(a, a));
  CHECK_FALSE(semantic_match(utt("turn on fan", "TurnOn", {{"device", "fan"}}),
                             utt("turn off fan", "TurnOff", {{"device", "fan"}})));
  CHECK_FALSE(semantic_match(utt("set lamp to red", "SetColor", {{"device", "lamp"}, {"color", "red"}}),
                             utt("set lamp to blue", "SetColor", {{"device", "lamp"}, {"color", "blue"}})));
}

TEST_CASE("memory aggregation counts and orders entries") {
  CHECK(aggregate_memory({}).empty());
  auto fan = utt("turn on fan", "TurnOn", {{"device", "fan"}});
  auto m = aggregate_memory({{"u", fan}, {"u", fan}});
  REQUIRE(m.at("u").entries.size() == 1);
  CHECK(m.at("u").entries[0].frequency == 2);

  auto a = utt("turn on tv", "TurnOn", {{"device", "tv"}});
  auto b = utt("a b", "X", {});
  auto c = utt("a a", "X", {});
  auto m2 = aggregate_memory({{"u", a}, {"u", b}, {"u", a}, {"v", b}, {"u", c}});
  const auto& e = m2.at("u").entries;
  REQUIRE(e.size() == 3);
  CHECK(e[0].utterance == a);
  CHECK(e[0].frequency == 2);
  // Ties on frequency fall back to token order: "a a" < "a b".
  CHECK(e[1].utterance == c);
  CHECK(e[2].utterance == b);
  CHECK(m2.at("v").entries.size() == 1);
}

TEST_CASE("grammar annotates everything it renders") {
  const Grammar g = Grammar::smart_home();
  for (const auto& intent : g.intents) {
    for (std::size_t t = 0; t < intent.templates.size(); ++t) {
      for (const auto& d : g.devices) {
        Slots slots{{"device", d.name}, {"level", "forty"}, {"color", "pink"}, {"temperature", "seventy"}};
        Utterance u = g.render(intent.name, slots, t);
        auto ann = g.annotate(u.tokens);
        REQUIRE(ann.has_value());
        CHECK(semantic_match(*ann, u));
      }
    }
  }
  CHECK_FALSE(g.annotate(split_words("turn on no turn off the fan")).has_value());
  CHECK_FALSE(g.annotate(split_words("launch room on")).has_value());
  auto laundry = g.annotate(split_words("laundry room on"));
  REQUIRE(laundry);
  CHECK(laundry->intent == "TurnOn");
  CHECK(laundry->slots.at("device") == "laundry room");
  auto color = g.annotate(split_words("set the laundry room to white"));
  REQUIRE(color);
  CHECK(color->intent == "SetColor");
  CHECK(color->slots == Slots{{"device", "laundry room"}, {"color", "white"}});
}

TEST_CASE("generation is deterministic") {
  const GenConfig cfg = small_config();
  CHECK(generate_synthetic(cfg, 7) == generate_synthetic(cfg, 7));
  CHECK_FALSE(generate_synthetic(cfg, 7) == generate_synthetic(cfg, 8));
}

TEST_CASE("generated data invariants") {
  const GenConfig cfg = small_config();
  const DatasetSplit d = generate_synthetic(cfg, 3);
  std::set<std::string> train_users, test_users;
  for (const auto& p : d.train) train_users.insert(p.user_id);
  for (const auto& p : d.test) test_users.insert(p.user_id);
  for (const auto& u : train_users) CHECK_FALSE(test_users.contains(u));
  CHECK(d.train.size() + d.test.size() == 300);
  for (const auto* side : {&d.train, &d.test}) {
    for (const auto& p : *side) {
      REQUIRE(d.memories.contains(p.user_id));
      CHECK_NOTHROW(p.first_turn.validate());
      CHECK(p.first_turn.hyps.size() <= 5);
      CHECK(p.rewritable == memory_contains(d.memories.at(p.user_id), p.rephrase));
      // The rank-1 hypothesis never carries the rephrase's meaning.
      auto ann = cfg.grammar.annotate(p.first_turn.hyps[0]);
      CHECK((!ann || !semantic_match(*ann, p.rephrase)));
    }
  }
  for (const auto& [u, m] : d.memories) {
    std::set<Tokens> seen;
    for (const auto& e : m.entries) {
      CHECK(e.frequency >= 1);
      CHECK(seen.insert(e.utterance.tokens).second);
    }
  }
}

TEST_CASE("heavy word drops never empty a hypothesis") {
  GenConfig cfg = small_config();
  cfg.p_drop = 0.9;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    DatasetSplit d;
    REQUIRE_NOTHROW(d = generate_synthetic(cfg, seed));
    for (const auto* side : {&d.train, &d.test})
      for (const auto& p : *side)
        for (const auto& h : p.first_turn.hyps) CHECK_FALSE(h.empty());
  }
}

TEST_CASE("non-rewritable fraction boundaries") {
  GenConfig cfg = small_config();
  cfg.p_nr = 0.0;
  for (const auto& p : generate_synthetic(cfg, 1).train) CHECK(p.rewritable);

  GenConfig full;
  full.p_nr = 0.3;
  const DatasetSplit d = generate_synthetic(full, 7);
  double rewritable = 0;
  for (const auto* side : {&d.train, &d.test})
    for (const auto& p : *side) rewritable += p.rewritable;
  const double frac = rewritable / static_cast<double>(d.train.size() + d.test.size());
  CHECK(frac == doctest::Approx(0.7).epsilon(0.02 / 0.7));
}

TEST_CASE("laundry room confusion yields the motivating pair") {
  GenConfig cfg;
  cfg.grammar.devices = {{"laundry room", true, true}};
  cfg.grammar.intents = {{"TurnOn", {"{device} on"}}};
  cfg.confusions = {{"laundry", {"launch"}}};
  cfg.devices_min = cfg.devices_max = 1;
  cfg.n_users = 4;
  cfg.n_pairs = 20;
  cfg.p_nr = 0.0;
  cfg.p_drop = 0.0;
  cfg.p_self_correction = 0.0;
  const DatasetSplit d = generate_synthetic(cfg, 5);
  REQUIRE_FALSE(d.train.empty());
  const RephrasePair& p = d.train.front();
  CHECK(join(p.first_turn.hyps[0]) == "launch room on");
  CHECK(join(p.rephrase.tokens) == "laundry room on");
  CHECK(p.rewritable);
}

TEST_CASE("config validation") {
  GenConfig cfg;
  cfg.grammar.devices.clear();
  CHECK_THROWS_WITH_AS(generate_synthetic(cfg, 1), doctest::Contains("config error"), Error);
  GenConfig bad;
  bad.p_nr = 1.5;
  try {
    bad.validate();
    FAIL("expected a config error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
  }
}

TEST_CASE("user split") {
  std::vector<RephrasePair> pairs;
  for (int u = 0; u < 10; ++u) {
    for (int k = 0; k < 3; ++k) {
      RephrasePair p;
      p.user_id = "user" + std::to_string(u);
      pairs.push_back(p);
    }
  }
  auto a = split_by_user(pairs, {}, 0.8, 42);
  auto b = split_by_user(pairs, {}, 0.8, 42);
  CHECK(a == b);
  std::set<std::string> tr, te;
  for (const auto& p : a.train) tr.insert(p.user_id);
  for (const auto& p : a.test) te.insert(p.user_id);
  CHECK(tr.size() == 8);
  CHECK(te.size() == 2);
  for (const auto& u : te) CHECK_FALSE(tr.contains(u));
  CHECK(a.memories.size() == 10);
  CHECK_THROWS_AS(split_by_user({pairs[0]}, {}, 0.8, 1), Error);
  CHECK_THROWS_AS(split_by_user(pairs, {}, 1.0, 1), Error);
  CHECK_THROWS_AS(split_by_user(pairs, {}, 0.0, 1), Error);
}

TEST_CASE("dataset files round-trip") {
  const DatasetSplit d = generate_synthetic(small_config(), 11);
  const auto dir = std::filesystem::temp_directory_path() / "memrw_test_corpus";
  std::filesystem::remove_all(dir);
  write_dataset(dir, d);
  CHECK(read_dataset(dir) == d);

  GenConfig cfg = small_config();
  cfg.p_nr = 0.25;
  GenConfig back = json(cfg).get<GenConfig>();
  CHECK(back == cfg);
  CHECK_THROWS_AS(json::parse(R"({"n_users": 3, "bogus": 1})").get<GenConfig>(), Error);
  CHECK_THROWS_AS(json::parse(R"({"hyps": [], "scores": []})").get<NBest>(), Error);
  CHECK_THROWS_AS(json::parse(R"({"hyps": [["a"],["b"]], "scores": [0, 1]})").get<NBest>(), Error);
  std::filesystem::remove_all(dir);
}
