#include "memrw/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <optional>

#include "memrw/error.hpp"
#include "memrw/rng.hpp"

namespace memrw::corpus {
namespace {

struct Habit {
  std::string intent;
  Slots slots;
  double weight = 1.0;
  std::size_t preferred_template = 0;
};

struct UserProfile {
  std::string id;
  std::vector<const DeviceSpec*> inventory;
  std::vector<Habit> habits;
};

std::vector<std::string> intents_for(const DeviceSpec& d) {
  std::vector<std::string> out{"TurnOn", "TurnOff"};
  if (d.dimmable) out.emplace_back("SetBrightness");
  if (d.colorable) out.emplace_back("SetColor");
  return out;
}

class Generator {
 public:
  Generator(const GenConfig& cfg, std::uint64_t seed)
      : cfg_(cfg),
        g_(cfg.grammar),
        users_rng_(Rng::stream(seed, "users")),
        memory_rng_(Rng::stream(seed, "memory")),
        pair_rng_(Rng::stream(seed, "pairs")) {}

  DatasetSplit run(std::uint64_t seed) {
    make_users();
    std::vector<std::pair<std::string, Utterance>> successes;
    for (const UserProfile& u : users_) {
      const int n = memory_rng_.range(cfg_.successes_min, cfg_.successes_max);
      std::vector<double> w;
      for (const Habit& h : u.habits) w.push_back(h.weight);
      for (int i = 0; i < n; ++i) {
        const Habit& h = u.habits[memory_rng_.weighted(w)];
        successes.emplace_back(u.id, render_habit(h, memory_rng_));
      }
    }
    MemoryMap memories = aggregate_memory(successes);
    for (const UserProfile& u : users_) memories.try_emplace(u.id, UserMemory{u.id, {}});

    std::vector<RephrasePair> pairs;
    pairs.reserve(static_cast<std::size_t>(cfg_.n_pairs));
    for (int i = 0; i < cfg_.n_pairs; ++i) {
      const UserProfile& u = users_[pair_rng_.index(users_.size())];
      pairs.push_back(make_pair(u, memories.at(u.id)));
    }
    return split_by_user(std::move(pairs), std::move(memories), cfg_.train_ratio, seed);
  }

 private:
  void make_users() {
    const int catalog = static_cast<int>(g_.devices.size());
    for (int i = 0; i < cfg_.n_users; ++i) {
      UserProfile u;
      char buf[16];
      std::snprintf(buf, sizeof buf, "u%03d", i);
      u.id = buf;
      std::vector<std::size_t> order(g_.devices.size());
      for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
      users_rng_.shuffle(order);
      const int k = users_rng_.range(std::min(cfg_.devices_min, catalog),
                                     std::min(cfg_.devices_max, catalog));
      for (int d = 0; d < k; ++d) u.inventory.push_back(&g_.devices[order[static_cast<std::size_t>(d)]]);
      for (const DeviceSpec* d : u.inventory) {
        add_habit(u, "TurnOn", {{"device", d->name}});
        add_habit(u, "TurnOff", {{"device", d->name}});
        if (d->dimmable && has_intent("SetBrightness")) {
          add_habit(u, "SetBrightness", {{"device", d->name}, {"level", users_rng_.pick(g_.levels)}});
        }
        if (d->colorable && has_intent("SetColor")) {
          const int n_colors = users_rng_.bernoulli(0.5) ? 2 : 1;
          std::vector<std::string> colors = g_.colors;
          users_rng_.shuffle(colors);
          for (int c = 0; c < n_colors && c < static_cast<int>(colors.size()); ++c) {
            add_habit(u, "SetColor", {{"device", d->name}, {"color", colors[static_cast<std::size_t>(c)]}});
          }
        }
      }
      if (has_intent("SetTemperature") && users_rng_.bernoulli(cfg_.thermostat_rate)) {
        add_habit(u, "SetTemperature", {{"temperature", users_rng_.pick(g_.temperatures)}});
      }
      users_.push_back(std::move(u));
    }
  }

  bool has_intent(const std::string& name) const {
    return std::any_of(g_.intents.begin(), g_.intents.end(),
                       [&](const IntentSpec& i) { return i.name == name; });
  }

  void add_habit(UserProfile& u, const std::string& intent, Slots slots) {
    if (!has_intent(intent)) return;
    Habit h{intent, std::move(slots), users_rng_.exponential(1.0) + 0.05,
            users_rng_.index(g_.intent(intent).templates.size())};
    u.habits.push_back(std::move(h));
  }

  Utterance render_habit(const Habit& h, Rng& rng) const {
    const std::size_t n = g_.intent(h.intent).templates.size();
    const std::size_t t = rng.bernoulli(cfg_.p_preferred_template) ? h.preferred_template : rng.index(n);
    return g_.render(h.intent, h.slots, t);
  }

  Utterance render_any(const std::string& intent, const Slots& slots) {
    return g_.render(intent, slots, pair_rng_.index(g_.intent(intent).templates.size()));
  }

  // A command whose semantics are absent from the user's memory.
  Utterance new_command(const UserProfile& u, const UserMemory& memory) {
    for (int attempt = 0; attempt < 200; ++attempt) {
      const double r = pair_rng_.uniform();
      std::string intent;
      Slots slots;
      if (r < 0.35 && !memory.entries.empty()) {
        const Utterance& m = pair_rng_.pick(memory.entries).utterance;
        if (m.intent != "TurnOn" && m.intent != "TurnOff") continue;
        intent = m.intent == "TurnOn" ? "TurnOff" : "TurnOn";
        slots = m.slots;
      } else if (r < 0.55) {
        const DeviceSpec* d = pair_rng_.pick(u.inventory);
        if (!d->colorable || !has_intent("SetColor")) continue;
        intent = "SetColor";
        slots = {{"device", d->name}, {"color", pair_rng_.pick(g_.colors)}};
      } else if (r < 0.8) {
        const DeviceSpec* d = pair_rng_.pick(u.inventory);
        intent = pair_rng_.pick(intents_for(*d));
        slots = {{"device", d->name}};
        if (intent == "SetBrightness") slots["level"] = pair_rng_.pick(g_.levels);
        if (intent == "SetColor") slots["color"] = pair_rng_.pick(g_.colors);
      } else {
        const DeviceSpec& d = pair_rng_.pick(g_.devices);
        intent = pair_rng_.bernoulli(0.5) ? "TurnOn" : "TurnOff";
        slots = {{"device", d.name}};
      }
      if (!has_intent(intent)) continue;
      Utterance cand{{}, intent, slots};
      if (!memory_contains(memory, cand)) return render_any(intent, slots);
    }
    throw Error(ErrorCode::kConfig,
                "config error: cannot sample a command outside user " + u.id + "'s memory");
  }

  // Per spoken position: the heard word, or nothing when it was dropped.
  using Aligned = std::vector<std::optional<std::string>>;

  static Tokens flatten(const Aligned& a) {
    Tokens out;
    for (const auto& w : a) {
      if (w) out.push_back(*w);
    }
    return out;
  }

  std::optional<std::string> confuse(const std::string& word, double p_confuse) {
    auto it = cfg_.confusions.find(word);
    if (it != cfg_.confusions.end() && !it->second.empty() && pair_rng_.bernoulli(p_confuse)) {
      return pair_rng_.pick(it->second);
    }
    return word;
  }

  Aligned corrupt(const Tokens& spoken, double p_confuse) {
    Aligned out;
    std::size_t kept = 0;
    for (std::size_t i = 0; i < spoken.size(); ++i) {
      const std::size_t remaining = spoken.size() - i;
      if (kept + remaining > 1 && pair_rng_.bernoulli(cfg_.p_drop)) {
        out.emplace_back();
        continue;
      }
      out.push_back(confuse(spoken[i], p_confuse));
      ++kept;
    }
    return out;
  }

  // A lower-ranked hypothesis: the rank-1 errors persist (a confused word
  // may take another confusion, a dropped word stays dropped) and the
  // remaining words are corrupted afresh.
  Tokens alternative(const Tokens& spoken, const Aligned& first) {
    Tokens out;
    std::size_t remaining = flatten(first).size();
    for (std::size_t i = 0; i < spoken.size(); ++i) {
      if (!first[i]) continue;
      --remaining;
      if (*first[i] != spoken[i]) {
        out.push_back(pair_rng_.pick(cfg_.confusions.at(spoken[i])));
      } else if (!pair_rng_.bernoulli(cfg_.p_drop) || out.size() + remaining == 0) {
        out.push_back(*confuse(spoken[i], cfg_.p_confuse));
      }
    }
    return out;
  }

  bool defective(const Tokens& hyp, const std::optional<Utterance>& spoken,
                 const Utterance& rephrase) const {
    const auto ann = g_.annotate(hyp);
    if (!ann) return true;
    if (semantic_match(*ann, rephrase)) return false;
    if (spoken && semantic_match(*ann, *spoken)) return false;
    return true;
  }

  NBest make_nbest(const Tokens& spoken, const Utterance& rephrase) {
    const auto spoken_ann = g_.annotate(spoken);
    Aligned first;
    bool found = false;
    for (int attempt = 0; attempt < 60 && !found; ++attempt) {
      first = corrupt(spoken, std::max(cfg_.p_confuse, 0.8));
      found = defective(flatten(first), spoken_ann, rephrase);
    }
    if (!found) {
      // No confusable word produced a defect: drop a word instead.
      first.assign(spoken.begin(), spoken.end());
      if (first.size() > 1) first[pair_rng_.index(first.size())].reset();
    }
    std::vector<Tokens> hyps{flatten(first)};
    const std::size_t target = static_cast<std::size_t>(std::max(cfg_.nbest_size, 1));
    const bool include_truth = target > 1 && hyps[0] != spoken && pair_rng_.bernoulli(cfg_.p_truth_in_nbest);
    const std::size_t others = target - 1 - (include_truth ? 1 : 0);
    for (int attempt = 0; attempt < 40 && hyps.size() < 1 + others; ++attempt) {
      Tokens h = alternative(spoken, first);
      if (h == spoken) continue;
      if (std::find(hyps.begin(), hyps.end(), h) == hyps.end()) hyps.push_back(std::move(h));
    }
    if (include_truth) {
      const std::size_t pos = 1 + pair_rng_.index(hyps.size());
      hyps.insert(hyps.begin() + static_cast<long>(pos), spoken);
    }
    NBest nb;
    nb.hyps = std::move(hyps);
    double s = -pair_rng_.uniform(0.05, 0.5);
    for (std::size_t i = 0; i < nb.hyps.size(); ++i) {
      nb.scores.push_back(s);
      s -= pair_rng_.exponential(2.0) + 1e-3;
    }
    return nb;
  }

  RephrasePair make_pair(const UserProfile& u, const UserMemory& memory) {
    const bool non_rewritable = memory.entries.empty() || pair_rng_.bernoulli(cfg_.p_nr);
    Utterance rephrase;
    Tokens spoken;
    if (!non_rewritable) {
      std::vector<double> freq;
      for (const auto& e : memory.entries) freq.push_back(e.frequency);
      const Utterance& m = memory.entries[pair_rng_.weighted(freq)].utterance;
      rephrase = pair_rng_.bernoulli(cfg_.p_same_surface) ? m : render_any(m.intent, m.slots);
      spoken = rephrase.tokens;
    } else {
      rephrase = new_command(u, memory);
      spoken = rephrase.tokens;
      if (pair_rng_.bernoulli(cfg_.p_changed_mind) && !u.habits.empty()) {
        const Habit& h = pair_rng_.pick(u.habits);
        spoken = render_any(h.intent, h.slots).tokens;
      }
    }
    if ((rephrase.intent == "TurnOn" || rephrase.intent == "TurnOff") &&
        spoken == rephrase.tokens && pair_rng_.bernoulli(cfg_.p_self_correction)) {
      const std::string other = rephrase.intent == "TurnOn" ? "TurnOff" : "TurnOn";
      const Tokens wrong = g_.render(other, rephrase.slots, 0).tokens;
      Tokens s(wrong.begin(), wrong.begin() + std::min<long>(2, static_cast<long>(wrong.size())));
      s.push_back("no");
      s.insert(s.end(), spoken.begin(), spoken.end());
      spoken = std::move(s);
    }
    RephrasePair p;
    p.user_id = u.id;
    p.first_turn = make_nbest(spoken, rephrase);
    p.rephrase = std::move(rephrase);
    p.rewritable = memory_contains(memory, p.rephrase);
    if (cfg_.label_noise > 0.0 && pair_rng_.bernoulli(cfg_.label_noise)) p.rewritable = !p.rewritable;
    return p;
  }

  const GenConfig& cfg_;
  const Grammar& g_;
  Rng users_rng_;
  Rng memory_rng_;
  Rng pair_rng_;
  std::vector<UserProfile> users_;
};

}  // namespace

ConfusionTable default_confusions() {
  return {
      {"laundry", {"launch", "landry"}},  {"bedroom", {"bathroom", "bed"}},
      {"bathroom", {"bedroom", "bath"}},  {"living", {"dining", "leaving"}},
      {"dining", {"living", "diving"}},   {"kitchen", {"chicken", "kitten"}},
      {"hallway", {"highway", "hallmark"}}, {"office", {"officer", "offense"}},
      {"garage", {"garbage", "mirage"}},  {"porch", {"torch", "porsche"}},
      {"nursery", {"nursing", "mercy"}},  {"basement", {"casement", "payment"}},
      {"attic", {"addict", "antic"}},     {"patio", {"ratio", "pistachio"}},
      {"den", {"then", "pen"}},           {"study", {"steady", "buddy"}},
      {"fan", {"van", "fun"}},            {"heater", {"theater", "eater"}},
      {"tv", {"tea", "tb"}},              {"lamp", {"lamb", "camp"}},
      {"coffee", {"toffee", "copy"}},     {"purifier", {"pacifier", "putter"}},
      {"closet", {"closed", "cosset"}},   {"guest", {"quest", "gust"}},
  };
}

void GenConfig::validate() const {
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kConfig, "config error: " + what);
  };
  grammar.validate();
  auto prob = [&](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) fail(std::string(name) + " must lie in [0, 1]");
  };
  prob(p_nr, "p_nr");
  prob(p_changed_mind, "p_changed_mind");
  prob(p_truth_in_nbest, "p_truth_in_nbest");
  prob(p_confuse, "p_confuse");
  prob(p_drop, "p_drop");
  prob(p_self_correction, "p_self_correction");
  prob(p_preferred_template, "p_preferred_template");
  prob(p_same_surface, "p_same_surface");
  prob(label_noise, "label_noise");
  prob(thermostat_rate, "thermostat_rate");
  if (n_users < 2) fail("n_users must be at least 2");
  if (n_pairs < 1) fail("n_pairs must be positive");
  if (devices_min < 1 || devices_max < devices_min) fail("bad devices-per-user range");
  if (successes_min < 0 || successes_max < successes_min) fail("bad successes-per-user range");
  if (nbest_size < 1 || nbest_size > static_cast<int>(kMaxNBest)) fail("nbest_size must be 1..5");
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) fail("train_ratio must lie in (0, 1)");
  for (const auto& [word, alts] : confusions) {
    for (const auto& a : alts) {
      if (a.empty() || a.find(' ') != std::string::npos) fail("confusions must be single words");
    }
  }
}

DatasetSplit generate_synthetic(const GenConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  return Generator(cfg, seed).run(seed);
}

}  // namespace memrw::corpus
