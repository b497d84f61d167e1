#include "memrw/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>

#include "memrw/corpus_io.hpp"
#include "memrw/error.hpp"

namespace memrw {
namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& what) {
  throw Error(ErrorCode::kConfig, "config error: " + what);
}

template <class T>
void read_opt(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) it->get_to(out);
}

void known_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  try {
    corpus::require_known_keys(j, allowed, where);
  } catch (const Error& e) {
    config_error(e.what());
  }
}

json retrieval_json(const RetrievalRunConfig& r) {
  return json{{"encoder_kind", retrieval::to_string(r.model.encoder_kind)},
              {"attention_kind", nn::to_string(r.model.attention_kind)},
              {"embedding_dim", r.model.embedding_dim},
              {"hidden_dim", r.model.hidden_dim},
              {"attention_dim", r.model.attention_dim},
              {"dense_dim", r.model.dense_dim},
              {"nbest_size", r.model.nbest_size},
              {"epochs", r.epochs},
              {"batch_size", r.batch_size},
              {"learning_rate", r.learning_rate},
              {"negatives_per_positive", r.negatives_per_positive}};
}

void read_retrieval(const json& j, RetrievalRunConfig& r) {
  known_keys(j,
             {"encoder_kind", "attention_kind", "embedding_dim", "hidden_dim", "attention_dim",
              "dense_dim", "nbest_size", "epochs", "batch_size", "learning_rate",
              "negatives_per_positive"},
             "retrieval");
  if (auto it = j.find("encoder_kind"); it != j.end()) {
    r.model.encoder_kind = retrieval::parse_encoder_kind(it->get<std::string>());
  }
  if (auto it = j.find("attention_kind"); it != j.end()) {
    r.model.attention_kind = nn::parse_attention_kind(it->get<std::string>());
  }
  read_opt(j, "embedding_dim", r.model.embedding_dim);
  read_opt(j, "hidden_dim", r.model.hidden_dim);
  read_opt(j, "attention_dim", r.model.attention_dim);
  read_opt(j, "dense_dim", r.model.dense_dim);
  read_opt(j, "nbest_size", r.model.nbest_size);
  read_opt(j, "epochs", r.epochs);
  read_opt(j, "batch_size", r.batch_size);
  read_opt(j, "learning_rate", r.learning_rate);
  read_opt(j, "negatives_per_positive", r.negatives_per_positive);
}

json pointer_json(const PointerRunConfig& p) {
  return json{{"attention_kind", nn::to_string(p.model.attention_kind)},
              {"embedding_dim", p.model.embedding_dim},
              {"hidden_dim", p.model.hidden_dim},
              {"attention_dim", p.model.attention_dim},
              {"no_memory", p.model.no_memory},
              {"generation_vocab", p.model.generation_vocab},
              {"nbest_size", p.model.nbest_size},
              {"max_len", p.model.max_len},
              {"lambda", p.model.lambda},
              {"epochs", p.epochs},
              {"batch_size", p.batch_size},
              {"learning_rate", p.learning_rate}};
}

void read_pointer(const json& j, PointerRunConfig& p) {
  known_keys(j,
             {"attention_kind", "embedding_dim", "hidden_dim", "attention_dim", "no_memory",
              "generation_vocab", "nbest_size", "max_len", "lambda", "epochs", "batch_size",
              "learning_rate"},
             "pointer");
  if (auto it = j.find("attention_kind"); it != j.end()) {
    p.model.attention_kind = nn::parse_attention_kind(it->get<std::string>());
  }
  read_opt(j, "embedding_dim", p.model.embedding_dim);
  read_opt(j, "hidden_dim", p.model.hidden_dim);
  read_opt(j, "attention_dim", p.model.attention_dim);
  read_opt(j, "no_memory", p.model.no_memory);
  read_opt(j, "generation_vocab", p.model.generation_vocab);
  read_opt(j, "nbest_size", p.model.nbest_size);
  read_opt(j, "max_len", p.model.max_len);
  read_opt(j, "lambda", p.model.lambda);
  read_opt(j, "epochs", p.epochs);
  read_opt(j, "batch_size", p.batch_size);
  read_opt(j, "learning_rate", p.learning_rate);
}

void check_training(int epochs, double batch_size, double lr, const std::string& where) {
  if (epochs < 0) config_error(where + ".epochs must be >= 0");
  if (!(batch_size >= 1.0) || !std::isfinite(batch_size)) {
    config_error(where + ".batch_size must be >= 1");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) config_error(where + ".learning_rate must be positive");
}

}  // namespace

void RunConfig::validate() const {
  if (threads < 1) config_error("threads must be >= 1");
  if (num_merges < 0) config_error("subword.num_merges must be >= 0");
  data.validate();
  retrieval.model.validate();
  pointer.model.validate();
  check_training(retrieval.epochs, retrieval.batch_size, retrieval.learning_rate, "retrieval");
  check_training(pointer.epochs, pointer.batch_size, pointer.learning_rate, "pointer");
  if (!(retrieval.negatives_per_positive > 0.0)) {
    config_error("retrieval.negatives_per_positive must be positive");
  }
}

json to_json(const RunConfig& c) {
  json data;
  corpus::to_json(data, c.data);
  return json{{"seed", c.seed},
              {"threads", c.threads},
              {"data", data},
              {"subword", {{"num_merges", c.num_merges}}},
              {"retrieval", retrieval_json(c.retrieval)},
              {"pointer", pointer_json(c.pointer)}};
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  try {
    known_keys(j, {"seed", "threads", "data", "subword", "retrieval", "pointer"}, "run config");
    read_opt(j, "seed", c.seed);
    read_opt(j, "threads", c.threads);
    if (auto it = j.find("data"); it != j.end()) corpus::from_json(*it, c.data);
    if (auto it = j.find("subword"); it != j.end()) {
      known_keys(*it, {"num_merges"}, "subword");
      read_opt(*it, "num_merges", c.num_merges);
    }
    if (auto it = j.find("retrieval"); it != j.end()) read_retrieval(*it, c.retrieval);
    if (auto it = j.find("pointer"); it != j.end()) read_pointer(*it, c.pointer);
  } catch (const json::exception& e) {
    config_error(e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfig) throw;
    config_error(e.what());
  }
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    config_error(path.filename().string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

void apply_env_overrides(RunConfig& c) {
  const char* env = std::getenv("MEMRW_SEED");
  if (env == nullptr) return;
  const std::string_view s(env);
  std::uint64_t seed = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), seed);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    config_error("MEMRW_SEED must be an unsigned integer");
  }
  c.seed = seed;
}

}  // namespace memrw
