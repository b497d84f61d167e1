#include "memrw/memrw.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <string>

#include "json.hpp"
#include "memrw/config.hpp"
#include "memrw/corpus_io.hpp"
#include "memrw/error.hpp"
#include "memrw/rewriter.hpp"
#include "memrw/synthetic.hpp"

using nlohmann::json;

struct memrw_config {
  memrw::RunConfig value;
};

struct memrw_dataset {
  memrw::corpus::DatasetSplit value;
};

struct memrw_model {
  memrw::Rewriter value;
  std::string kind_name;
};

namespace {

thread_local std::string last_error;

memrw_status fail(memrw_status status, const std::string& message) {
  last_error = message;
  return status;
}

template <class Fn>
memrw_status guarded(Fn&& fn) {
  try {
    fn();
    last_error.clear();
    return MEMRW_OK;
  } catch (const memrw::Error& e) {
    return fail(static_cast<memrw_status>(e.code()), e.what());
  } catch (const json::exception& e) {
    return fail(MEMRW_FORMAT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(MEMRW_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(MEMRW_INTERNAL, e.what());
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw memrw::Error(memrw::ErrorCode::kInvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw memrw::Error(memrw::ErrorCode::kIo, "cannot write " + path.string());
  out << text;
  if (!out) throw memrw::Error(memrw::ErrorCode::kIo, "write failed: " + path.string());
}

template <class T>
T parse_input(const char* text, const char* what) {
  try {
    return json::parse(text).get<T>();
  } catch (const json::exception& e) {
    throw memrw::Error(memrw::ErrorCode::kFormat, std::string(what) + ": " + e.what());
  } catch (const memrw::Error& e) {
    throw memrw::Error(memrw::ErrorCode::kFormat, std::string(what) + ": " + e.what());
  }
}

std::string join(const memrw::corpus::Tokens& tokens) {
  std::string s;
  for (const auto& t : tokens) s += (s.empty() ? "" : " ") + t;
  return s;
}

json* lookup(json& j, const std::string& path) {
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string part = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (!node->is_object() || !node->contains(part)) {
      throw memrw::Error(memrw::ErrorCode::kConfig, "config error: unknown key '" + path + "'");
    }
    node = &(*node)[part];
    if (dot == std::string::npos) return node;
    start = dot + 1;
  }
}

}  // namespace

extern "C" {

const char* memrw_version(void) { return "0.1.0"; }

const char* memrw_last_error(void) { return last_error.c_str(); }

const char* memrw_status_name(memrw_status status) {
  switch (status) {
    case MEMRW_OK: return "OK";
    case MEMRW_INVALID_ARGUMENT: return "INVALID_ARGUMENT";
    case MEMRW_CONFIG: return "CONFIG";
    case MEMRW_IO: return "IO";
    case MEMRW_FORMAT: return "FORMAT";
    case MEMRW_DIVERGENCE: return "DIVERGENCE";
    case MEMRW_MISMATCH: return "MISMATCH";
    case MEMRW_INTERNAL: return "INTERNAL";
  }
  return "UNKNOWN";
}

void memrw_string_free(char* s) { std::free(s); }

memrw_status memrw_config_load(const char* path, memrw_config** out) {
  return guarded([&] {
    require(out != nullptr, "out is null");
    auto c = std::make_unique<memrw_config>();
    if (path != nullptr) c->value = memrw::load_run_config(path);
    memrw::apply_env_overrides(c->value);
    *out = c.release();
  });
}

memrw_status memrw_config_from_json(const char* text, memrw_config** out) {
  return guarded([&] {
    require(text != nullptr && out != nullptr, "null argument");
    json j;
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw memrw::Error(memrw::ErrorCode::kConfig, std::string("config error: ") + e.what());
    }
    auto c = std::make_unique<memrw_config>();
    c->value = memrw::run_config_from_json(j);
    memrw::apply_env_overrides(c->value);
    *out = c.release();
  });
}

memrw_status memrw_config_set(memrw_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config != nullptr && key != nullptr && value != nullptr, "null argument");
    json j = memrw::to_json(config->value);
    json parsed = json::parse(value, nullptr, false);
    *lookup(j, key) = parsed.is_discarded() ? json(value) : parsed;
    config->value = memrw::run_config_from_json(j);
  });
}

memrw_status memrw_config_get(const memrw_config* config, const char* key, char** out) {
  return guarded([&] {
    require(config != nullptr && key != nullptr && out != nullptr, "null argument");
    json j = memrw::to_json(config->value);
    *out = dup_string(lookup(j, key)->dump());
  });
}

memrw_status memrw_config_to_json(const memrw_config* config, char** out) {
  return guarded([&] {
    require(config != nullptr && out != nullptr, "null argument");
    *out = dup_string(memrw::to_json(config->value).dump(2));
  });
}

void memrw_config_free(memrw_config* config) { delete config; }

memrw_status memrw_generate(const memrw_config* config, const char* out_dir, memrw_dataset** out,
                            char** report_json) {
  return guarded([&] {
    require(config != nullptr, "config is null");
    auto d = std::make_unique<memrw_dataset>();
    d->value = memrw::corpus::generate_synthetic(config->value.data, config->value.seed);
    const std::string report = memrw::generation_report(d->value, config->value.seed).dump(2);
    if (out_dir != nullptr) {
      std::filesystem::create_directories(out_dir);
      memrw::corpus::write_dataset(out_dir, d->value);
      write_text(std::filesystem::path(out_dir) / "gen_report.json", report + "\n");
    }
    if (report_json != nullptr) *report_json = dup_string(report);
    if (out != nullptr) *out = d.release();
  });
}

memrw_status memrw_dataset_load(const char* dir, memrw_dataset** out) {
  return guarded([&] {
    require(dir != nullptr && out != nullptr, "null argument");
    auto d = std::make_unique<memrw_dataset>();
    d->value = memrw::corpus::read_dataset(dir);
    *out = d.release();
  });
}

void memrw_dataset_free(memrw_dataset* dataset) { delete dataset; }

memrw_status memrw_model_create(const char* kind, const memrw_config* config,
                                const memrw_dataset* dataset, memrw_model** out) {
  return guarded([&] {
    require(kind != nullptr && config != nullptr && dataset != nullptr && out != nullptr,
            "null argument");
    auto r = memrw::Rewriter::create(memrw::parse_model_kind(kind), config->value, dataset->value);
    auto m = std::unique_ptr<memrw_model>(new memrw_model{std::move(r), {}});
    m->kind_name = memrw::to_string(m->value.kind());
    *out = m.release();
  });
}

memrw_status memrw_model_load(const char* path, memrw_model** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "null argument");
    auto m = std::unique_ptr<memrw_model>(new memrw_model{memrw::Rewriter::load(path), {}});
    m->kind_name = memrw::to_string(m->value.kind());
    *out = m.release();
  });
}

memrw_status memrw_model_save(const memrw_model* model, const char* path) {
  return guarded([&] {
    require(model != nullptr && path != nullptr, "null argument");
    model->value.save(path);
  });
}

void memrw_model_free(memrw_model* model) { delete model; }

const char* memrw_model_kind(const memrw_model* model) {
  return model == nullptr ? "" : model->kind_name.c_str();
}

int memrw_model_epochs(const memrw_model* model) {
  return model == nullptr ? 0 : model->value.epochs_completed();
}

memrw_status memrw_model_set_threads(memrw_model* model, int threads) {
  return guarded([&] {
    require(model != nullptr, "model is null");
    model->value.set_threads(threads);
  });
}

memrw_status memrw_model_trace(const memrw_model* model, char** out) {
  return guarded([&] {
    require(model != nullptr && out != nullptr, "null argument");
    const auto& t = model->value.trace();
    *out = dup_string(json{{"epoch_loss", t.epoch_loss}, {"batch_loss", t.batch_loss}}.dump());
  });
}

memrw_status memrw_model_train(memrw_model* model, const memrw_dataset* dataset,
                               int target_epochs, memrw_epoch_fn on_epoch, void* user_data) {
  return guarded([&] {
    require(model != nullptr && dataset != nullptr, "null argument");
    memrw::EpochCallback cb;
    if (on_epoch != nullptr) {
      cb = [&](int epoch, double loss) { on_epoch(epoch, loss, user_data); };
    }
    model->value.train(dataset->value, target_epochs, cb);
  });
}

memrw_status memrw_model_evaluate(const memrw_model* model, const memrw_dataset* dataset,
                                  const char* out_dir, char** metrics_json) {
  return guarded([&] {
    require(model != nullptr && dataset != nullptr, "null argument");
    const memrw::EvalResult r = model->value.evaluate(dataset->value);
    const std::string metrics = memrw::eval::to_json(r.metrics).dump(2);
    if (out_dir != nullptr) {
      std::filesystem::create_directories(out_dir);
      write_text(std::filesystem::path(out_dir) / "metrics.json", metrics + "\n");
      std::ofstream csv(std::filesystem::path(out_dir) / "prcurve.csv",
                        std::ios::binary | std::ios::trunc);
      if (!csv) throw memrw::Error(memrw::ErrorCode::kIo, "cannot write prcurve.csv");
      memrw::eval::write_prcurve_csv(csv, r.curve);
    }
    if (metrics_json != nullptr) *metrics_json = dup_string(metrics);
  });
}

memrw_status memrw_model_rewrite(const memrw_model* model, const char* nbest_json,
                                 const char* memory_json, double threshold,
                                 char** decision_json) {
  return guarded([&] {
    require(model != nullptr && nbest_json != nullptr && decision_json != nullptr,
            "null argument");
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
      throw memrw::Error(memrw::ErrorCode::kInvalidArgument, "threshold must be in [0, 1]");
    }
    const auto nbest = parse_input<memrw::corpus::NBest>(nbest_json, "n-best");
    try {
      nbest.validate();
    } catch (const memrw::Error& e) {
      throw memrw::Error(memrw::ErrorCode::kFormat, std::string("n-best: ") + e.what());
    }
    std::optional<memrw::corpus::UserMemory> memory;
    if (memory_json != nullptr) {
      memory = parse_input<memrw::corpus::UserMemory>(memory_json, "memory");
    }
    const memrw::RewriteDecision d =
        model->value.rewrite(nbest, memory ? &*memory : nullptr, threshold);
    nlohmann::ordered_json out;
    out["rewrite"] = d.rewrite;
    out["utterance"] = d.rewrite && d.candidate ? json(join(*d.candidate)) : json(nullptr);
    out["candidate"] = d.candidate ? json(join(*d.candidate)) : json(nullptr);
    out["probability"] = d.probability;
    *decision_json = dup_string(out.dump());
  });
}

}  // extern "C"
