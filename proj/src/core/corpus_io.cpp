#include "memrw/corpus_io.hpp"

#include <fstream>
#include <set>

#include "memrw/error.hpp"

namespace memrw::corpus {
namespace {

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  return out;
}

template <class T>
std::vector<T> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in = open_in(path);
  std::vector<T> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line).get<T>());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kFormat,
                  path.filename().string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

void require_known_keys(const json& j, std::initializer_list<const char*> allowed,
                        const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::kFormat, where + " must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw Error(ErrorCode::kFormat, "unknown key '" + it.key() + "' in " + where);
  }
}

void to_json(json& j, const Utterance& u) {
  j = json{{"tokens", u.tokens}, {"intent", u.intent}, {"slots", u.slots}};
}

void from_json(const json& j, Utterance& u) {
  require_known_keys(j, {"tokens", "intent", "slots"}, "utterance");
  j.at("tokens").get_to(u.tokens);
  u.intent = j.value("intent", std::string());
  u.slots = j.value("slots", Slots{});
  if (u.tokens.empty()) throw Error(ErrorCode::kFormat, "utterance has no tokens");
}

void to_json(json& j, const NBest& n) { j = json{{"hyps", n.hyps}, {"scores", n.scores}}; }

void from_json(const json& j, NBest& n) {
  require_known_keys(j, {"hyps", "scores"}, "nbest");
  j.at("hyps").get_to(n.hyps);
  if (j.contains("scores")) {
    j.at("scores").get_to(n.scores);
  } else {
    n.scores.clear();
    for (std::size_t i = 0; i < n.hyps.size(); ++i) n.scores.push_back(-static_cast<double>(i));
  }
  n.validate();
}

void to_json(json& j, const MemoryEntry& e) {
  j = json{{"utterance", e.utterance}, {"frequency", e.frequency}};
}

void from_json(const json& j, MemoryEntry& e) {
  require_known_keys(j, {"utterance", "frequency"}, "memory entry");
  j.at("utterance").get_to(e.utterance);
  e.frequency = j.value("frequency", 1);
  if (e.frequency < 1) throw Error(ErrorCode::kFormat, "memory frequency must be >= 1");
}

void to_json(json& j, const UserMemory& m) {
  j = json{{"user_id", m.user_id}, {"entries", m.entries}};
}

void from_json(const json& j, UserMemory& m) {
  require_known_keys(j, {"user_id", "entries"}, "user memory");
  m.user_id = j.value("user_id", std::string());
  j.at("entries").get_to(m.entries);
  std::set<Tokens> seen;
  for (const auto& e : m.entries) {
    if (!seen.insert(e.utterance.tokens).second) {
      throw Error(ErrorCode::kFormat, "duplicate memory entry '" + join(e.utterance.tokens) + "'");
    }
  }
}

void to_json(json& j, const RephrasePair& p) {
  j = json{{"user_id", p.user_id},
           {"first_turn", p.first_turn},
           {"rephrase", p.rephrase},
           {"rewritable", p.rewritable}};
}

void from_json(const json& j, RephrasePair& p) {
  require_known_keys(j, {"user_id", "first_turn", "rephrase", "rewritable"}, "rephrase pair");
  j.at("user_id").get_to(p.user_id);
  j.at("first_turn").get_to(p.first_turn);
  j.at("rephrase").get_to(p.rephrase);
  j.at("rewritable").get_to(p.rewritable);
}

void to_json(json& j, const GenConfig& c) {
  json intents = json::array();
  for (const auto& i : c.grammar.intents) intents.push_back({{"name", i.name}, {"templates", i.templates}});
  json devices = json::array();
  for (const auto& d : c.grammar.devices) {
    devices.push_back({{"name", d.name}, {"dimmable", d.dimmable}, {"colorable", d.colorable}});
  }
  j = json{{"intents", intents},
           {"devices", devices},
           {"colors", c.grammar.colors},
           {"levels", c.grammar.levels},
           {"temperatures", c.grammar.temperatures},
           {"confusions", c.confusions},
           {"n_users", c.n_users},
           {"n_pairs", c.n_pairs},
           {"devices_min", c.devices_min},
           {"devices_max", c.devices_max},
           {"successes_min", c.successes_min},
           {"successes_max", c.successes_max},
           {"thermostat_rate", c.thermostat_rate},
           {"p_nr", c.p_nr},
           {"p_changed_mind", c.p_changed_mind},
           {"p_truth_in_nbest", c.p_truth_in_nbest},
           {"p_confuse", c.p_confuse},
           {"p_drop", c.p_drop},
           {"p_self_correction", c.p_self_correction},
           {"p_preferred_template", c.p_preferred_template},
           {"p_same_surface", c.p_same_surface},
           {"label_noise", c.label_noise},
           {"nbest_size", c.nbest_size},
           {"train_ratio", c.train_ratio}};
}

void from_json(const json& j, GenConfig& c) {
  require_known_keys(j,
                     {"intents", "devices", "colors", "levels", "temperatures", "confusions",
                      "n_users", "n_pairs", "devices_min", "devices_max", "successes_min",
                      "successes_max", "thermostat_rate", "p_nr", "p_changed_mind",
                      "p_truth_in_nbest", "p_confuse", "p_drop", "p_self_correction",
                      "p_preferred_template", "p_same_surface", "label_noise", "nbest_size",
                      "train_ratio"},
                     "gen config");
  if (auto it = j.find("intents"); it != j.end()) {
    c.grammar.intents.clear();
    for (const auto& i : *it) {
      require_known_keys(i, {"name", "templates"}, "intent");
      c.grammar.intents.push_back({i.at("name").get<std::string>(),
                                   i.at("templates").get<std::vector<std::string>>()});
    }
  }
  if (auto it = j.find("devices"); it != j.end()) {
    c.grammar.devices.clear();
    for (const auto& d : *it) {
      require_known_keys(d, {"name", "dimmable", "colorable"}, "device");
      c.grammar.devices.push_back(
          {d.at("name").get<std::string>(), d.value("dimmable", false), d.value("colorable", false)});
    }
  }
  read_opt(j, "colors", c.grammar.colors);
  read_opt(j, "levels", c.grammar.levels);
  read_opt(j, "temperatures", c.grammar.temperatures);
  read_opt(j, "confusions", c.confusions);
  read_opt(j, "n_users", c.n_users);
  read_opt(j, "n_pairs", c.n_pairs);
  read_opt(j, "devices_min", c.devices_min);
  read_opt(j, "devices_max", c.devices_max);
  read_opt(j, "successes_min", c.successes_min);
  read_opt(j, "successes_max", c.successes_max);
  read_opt(j, "thermostat_rate", c.thermostat_rate);
  read_opt(j, "p_nr", c.p_nr);
  read_opt(j, "p_changed_mind", c.p_changed_mind);
  read_opt(j, "p_truth_in_nbest", c.p_truth_in_nbest);
  read_opt(j, "p_confuse", c.p_confuse);
  read_opt(j, "p_drop", c.p_drop);
  read_opt(j, "p_self_correction", c.p_self_correction);
  read_opt(j, "p_preferred_template", c.p_preferred_template);
  read_opt(j, "p_same_surface", c.p_same_surface);
  read_opt(j, "label_noise", c.label_noise);
  read_opt(j, "nbest_size", c.nbest_size);
  read_opt(j, "train_ratio", c.train_ratio);
}

void write_pairs(const std::filesystem::path& path, const std::vector<RephrasePair>& pairs) {
  std::ofstream out = open_out(path);
  for (const auto& p : pairs) out << json(p).dump() << '\n';
}

std::vector<RephrasePair> read_pairs(const std::filesystem::path& path) {
  return read_jsonl<RephrasePair>(path);
}

void write_memories(const std::filesystem::path& path, const MemoryMap& memories) {
  std::ofstream out = open_out(path);
  for (const auto& [user, m] : memories) out << json(m).dump() << '\n';
}

MemoryMap read_memories(const std::filesystem::path& path) {
  MemoryMap out;
  for (auto& m : read_jsonl<UserMemory>(path)) {
    const std::string id = m.user_id;
    if (!out.emplace(id, std::move(m)).second) {
      throw Error(ErrorCode::kFormat, "duplicate memory for user " + id);
    }
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const DatasetSplit& split) {
  std::filesystem::create_directories(dir);
  std::vector<RephrasePair> all = split.train;
  all.insert(all.end(), split.test.begin(), split.test.end());
  write_pairs(dir / "pairs.jsonl", all);
  write_memories(dir / "memories.jsonl", split.memories);
  std::set<std::string> train_users, test_users;
  for (const auto& p : split.train) train_users.insert(p.user_id);
  for (const auto& p : split.test) test_users.insert(p.user_id);
  // Users without pairs are recorded on the test side.
  for (const auto& [u, m] : split.memories) {
    if (!train_users.contains(u)) test_users.insert(u);
  }
  std::ofstream out = open_out(dir / "split.json");
  out << json{{"train_users", train_users}, {"test_users", test_users}}.dump(1) << '\n';
}

DatasetSplit read_dataset(const std::filesystem::path& dir) {
  DatasetSplit split;
  split.memories = read_memories(dir / "memories.jsonl");
  json sj;
  try {
    std::ifstream in = open_in(dir / "split.json");
    sj = json::parse(in);
    require_known_keys(sj, {"train_users", "test_users"}, "split.json");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("split.json: ") + e.what());
  }
  const auto train_users = sj.at("train_users").get<std::set<std::string>>();
  const auto test_users = sj.at("test_users").get<std::set<std::string>>();
  for (auto& p : read_pairs(dir / "pairs.jsonl")) {
    if (train_users.contains(p.user_id)) {
      split.train.push_back(std::move(p));
    } else if (test_users.contains(p.user_id)) {
      split.test.push_back(std::move(p));
    } else {
      throw Error(ErrorCode::kFormat, "pair user " + p.user_id + " is in neither split");
    }
  }
  for (const auto* side : {&split.train, &split.test}) {
    for (const auto& p : *side) split.memories.try_emplace(p.user_id, UserMemory{p.user_id, {}});
  }
  return split;
}

}  // namespace memrw::corpus
