#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "memrw/checkpoint.hpp"
#include "memrw/config.hpp"
#include "memrw/error.hpp"
#include "memrw/rewriter.hpp"
#include "memrw/synthetic.hpp"

using namespace memrw;
using nlohmann::json;

namespace {

RunConfig tiny_config() {
  RunConfig c;
  c.seed = 3;
  c.data.n_users = 12;
  c.data.n_pairs = 80;
  c.num_merges = 40;
  for (auto* m : {&c.retrieval.model.embedding_dim, &c.retrieval.model.hidden_dim,
                  &c.retrieval.model.attention_dim, &c.retrieval.model.dense_dim,
                  &c.pointer.model.embedding_dim, &c.pointer.model.hidden_dim,
                  &c.pointer.model.attention_dim}) {
    *m = 6;
  }
  c.retrieval.batch_size = 64;
  c.pointer.batch_size = 8;
  return c;
}

const corpus::DatasetSplit& tiny_split() {
  static const corpus::DatasetSplit split = corpus::generate_synthetic(tiny_config().data, 3);
  return split;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

std::string bytes_of(const Checkpoint& c) {
  std::ostringstream out;
  write_checkpoint(out, c);
  return out.str();
}

std::vector<double> probe(const Rewriter& r) {
  std::vector<double> out;
  const auto& split = tiny_split();
  for (const auto& p : split.test) {
    auto it = split.memories.find(p.user_id);
    const RewriteDecision d = r.rewrite(p.first_turn, &it->second, 0.5);
    out.push_back(d.probability);
  }
  return out;
}

}  // namespace

TEST_CASE("run config json round trip keeps every field") {
  RunConfig c = tiny_config();
  c.pointer.model.lambda = 0.25;
  c.pointer.model.generation_vocab = true;
  c.retrieval.model.encoder_kind = retrieval::EncoderKind::kBilstmSelfAttention;
  c.retrieval.model.attention_kind = nn::AttentionKind::kMultiplicative;
  c.data.p_nr = 0.5;
  CHECK(run_config_from_json(to_json(c)) == c);
  CHECK(run_config_from_json(json::object()) == RunConfig{});
}

TEST_CASE("run config defaults") {
  const RunConfig c;
  CHECK(c.retrieval.model.embedding_dim == 100);
  CHECK(c.pointer.model.embedding_dim == 100);
  CHECK(c.retrieval.batch_size == 64);
  CHECK(c.retrieval.epochs == 12);
  CHECK(c.pointer.batch_size == 32);
  CHECK(c.pointer.epochs == 8);
  CHECK(c.retrieval.model.nbest_size == 5);
  CHECK(c.pointer.model.nbest_size == 5);
  CHECK(c.data.train_ratio == 0.8);
  CHECK(c.data.n_users == 200);
  CHECK(c.data.n_pairs == 5000);
}

TEST_CASE("run config rejects unknown keys and bad values as config errors") {
  for (const char* text :
       {R"({"sed": 1})", R"({"pointer": {"lamda": 0.5}})", R"({"subword": {"merges": 3}})",
        R"({"data": {"n_user": 3}})", R"({"retrieval": {"encoder_kind": "cnn"}})",
        R"({"pointer": {"nbest_size": 7}})", R"({"threads": 0})", R"({"seed": "x"})",
        R"({"data": {"devices": []}})", R"({"data": {"p_nr": 1.5}})",
        R"({"pointer": {"batch_size": 0}})", R"([1, 2])"}) {
    CAPTURE(text);
    CHECK(code_of([&] { run_config_from_json(json::parse(text)); }) == ErrorCode::kConfig);
  }
}

TEST_CASE("MEMRW_SEED overrides the seed") {
  RunConfig c;
  ::setenv("MEMRW_SEED", "41", 1);
  apply_env_overrides(c);
  CHECK(c.seed == 41);
  ::setenv("MEMRW_SEED", "4x", 1);
  CHECK(code_of([&] { apply_env_overrides(c); }) == ErrorCode::kConfig);
  ::unsetenv("MEMRW_SEED");
  c.seed = 5;
  apply_env_overrides(c);
  CHECK(c.seed == 5);
}

TEST_CASE("model kind names") {
  for (ModelKind k : {ModelKind::kRetrieval, ModelKind::kPointer, ModelKind::kPointerNoMemory}) {
    CHECK(parse_model_kind(to_string(k)) == k);
  }
  CHECK(code_of([] { parse_model_kind("seq2seq"); }) == ErrorCode::kConfig);
}

TEST_CASE("checkpoint container layout and validation") {
  Checkpoint c;
  c.kind = ModelKind::kPointer;
  c.seed = 0x0102030405060708ULL;
  c.config_json = "{}";
  c.symbols = {"<pad>"};
  c.arrays.push_back({"w", nn::Matrix{{1.0, 2.0}, {3.0, 4.0}}});
  const std::string bytes = bytes_of(c);
  CHECK(bytes.substr(0, 5) == "MEMRW");
  CHECK(static_cast<unsigned char>(bytes[5]) == 1);  // version, little-endian
  CHECK(static_cast<unsigned char>(bytes[9]) == 1);  // kind
  CHECK(static_cast<unsigned char>(bytes[13]) == 0x08);
  CHECK(static_cast<unsigned char>(bytes[20]) == 0x01);

  std::istringstream in(bytes);
  const Checkpoint back = read_checkpoint(in);
  CHECK(bytes_of(back) == bytes);
  CHECK(back.find("w")->value == c.arrays[0].value);
  CHECK(back.find("w")->value(0, 1) == 2.0);
  CHECK(back.find("v") == nullptr);

  for (std::size_t cut : {std::size_t{3}, std::size_t{12}, bytes.size() - 1}) {
    std::istringstream t(bytes.substr(0, cut));
    CHECK(code_of([&] { read_checkpoint(t); }) == ErrorCode::kFormat);
  }
  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream b1(bad);
  CHECK(code_of([&] { read_checkpoint(b1); }) == ErrorCode::kFormat);
  bad = bytes;
  bad[5] = 9;
  std::istringstream b2(bad);
  CHECK(code_of([&] { read_checkpoint(b2); }) == ErrorCode::kFormat);
  std::istringstream b3(bytes + "x");
  CHECK(code_of([&] { read_checkpoint(b3); }) == ErrorCode::kFormat);
}

TEST_CASE("checkpoint round trip reproduces outputs bit for bit") {
  for (ModelKind kind : {ModelKind::kRetrieval, ModelKind::kPointer, ModelKind::kPointerNoMemory}) {
    CAPTURE(to_string(kind));
    Rewriter r = Rewriter::create(kind, tiny_config(), tiny_split());
    r.train(tiny_split(), 1);
    const auto path = std::filesystem::temp_directory_path() / "memrw_test_roundtrip.ckpt";
    r.save(path);
    const Rewriter back = Rewriter::load(path);
    std::filesystem::remove(path);
    CHECK(back.kind() == kind);
    CHECK(back.epochs_completed() == 1);
    CHECK(back.config() == r.config());
    CHECK(back.trace().epoch_loss == r.trace().epoch_loss);
    CHECK(bytes_of(back.checkpoint()) == bytes_of(r.checkpoint()));
    CHECK(probe(back) == probe(r));
  }
}

TEST_CASE("resumed training matches uninterrupted training exactly") {
  for (ModelKind kind : {ModelKind::kRetrieval, ModelKind::kPointer}) {
    CAPTURE(to_string(kind));
    Rewriter straight = Rewriter::create(kind, tiny_config(), tiny_split());
    straight.train(tiny_split(), 2);

    Rewriter first = Rewriter::create(kind, tiny_config(), tiny_split());
    first.train(tiny_split(), 1);
    Rewriter resumed = Rewriter::from_checkpoint(first.checkpoint());
    std::vector<int> epochs;
    resumed.train(tiny_split(), 2, [&](int e, double) { epochs.push_back(e); });
    CHECK(epochs == std::vector<int>{2});
    CHECK(resumed.trace().epoch_loss == straight.trace().epoch_loss);
    CHECK(bytes_of(resumed.checkpoint()) == bytes_of(straight.checkpoint()));
    CHECK(code_of([&] { resumed.train(tiny_split(), 1); }) == ErrorCode::kConfig);
  }
}

TEST_CASE("mismatched checkpoints are rejected") {
  const Rewriter r = Rewriter::create(ModelKind::kPointer, tiny_config(), tiny_split());
  Checkpoint c = r.checkpoint();
  c.arrays[0].value.resize(1, 1);
  CHECK(code_of([&] { Rewriter::from_checkpoint(c); }) == ErrorCode::kMismatch);

  c = r.checkpoint();
  c.arrays.push_back({"extra", nn::Matrix::Zero(1, 1)});
  CHECK(code_of([&] { Rewriter::from_checkpoint(c); }) == ErrorCode::kMismatch);

  c = r.checkpoint();
  c.symbols.push_back("zzz");
  CHECK(code_of([&] { Rewriter::from_checkpoint(c); }) == ErrorCode::kMismatch);

  c = r.checkpoint();
  c.kind = ModelKind::kRetrieval;
  CHECK(code_of([&] { Rewriter::from_checkpoint(c); }) == ErrorCode::kMismatch);
}

TEST_CASE("kind and no_memory flag agree") {
  RunConfig cfg = tiny_config();
  CHECK(Rewriter::create(ModelKind::kPointerNoMemory, cfg, tiny_split()).config().pointer.model.no_memory);
  cfg.pointer.model.no_memory = true;
  CHECK(Rewriter::create(ModelKind::kPointer, cfg, tiny_split()).kind() == ModelKind::kPointerNoMemory);
}

TEST_CASE("retrieval abstains on empty memory and threshold 1 abstains") {
  const Rewriter r = Rewriter::create(ModelKind::kRetrieval, tiny_config(), tiny_split());
  const auto& p = tiny_split().test.front();
  corpus::UserMemory empty;
  const RewriteDecision d = r.rewrite(p.first_turn, &empty, 0.0);
  CHECK_FALSE(d.rewrite);
  CHECK(d.probability == 0.0);
  CHECK_FALSE(r.rewrite(p.first_turn, nullptr, 0.0).rewrite);
  const auto& mem = tiny_split().memories.at(p.user_id);
  const RewriteDecision at_one = r.rewrite(p.first_turn, &mem, 1.0);
  CHECK(at_one.rewrite == (at_one.probability >= 1.0));
}

TEST_CASE("evaluation is deterministic and independent of thread count") {
  Rewriter r = Rewriter::create(ModelKind::kPointer, tiny_config(), tiny_split());
  r.train(tiny_split(), 1);
  const EvalResult a = r.evaluate(tiny_split());
  r.set_threads(3);
  const EvalResult b = r.evaluate(tiny_split());
  CHECK(eval::to_json(a.metrics).dump() == eval::to_json(b.metrics).dump());
  CHECK(a.metrics.n_eval == static_cast<long>(tiny_split().test.size()));
}

TEST_CASE("generation report") {
  const auto report = generation_report(tiny_split(), 3);
  const long n = report["n_pairs"].get<long>();
  CHECK(n == static_cast<long>(tiny_split().train.size() + tiny_split().test.size()));
  CHECK(report["rewritable_fraction"].get<double>() ==
        doctest::Approx(report["n_rewritable"].get<double>() / static_cast<double>(n)));
}
