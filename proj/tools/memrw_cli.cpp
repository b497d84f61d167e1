// memrw: generate data, train, evaluate and rewrite from the command line.

#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "memrw/memrw.h"

namespace {

// Non-OK status from the C API, carried to main.
struct Failure {
  memrw_status status;
  std::string message;
};

void check(memrw_status status) {
  if (status != MEMRW_OK) throw Failure{status, memrw_last_error()};
}

std::string one_line(std::string s) {
  for (char& c : s) {
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

int exit_code(memrw_status status) {
  switch (status) {
    case MEMRW_CONFIG:
    case MEMRW_FORMAT:
    case MEMRW_INVALID_ARGUMENT:
      return 2;
    default:
      return 1;
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Failure{MEMRW_IO, "cannot open " + path};
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out || !(out << text)) throw Failure{MEMRW_IO, "cannot write " + path};
}

std::string take(char* s) {
  std::string out = s == nullptr ? "" : s;
  memrw_string_free(s);
  return out;
}

template <class T, void (*Free)(T*)>
struct Handle {
  T* ptr = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(ptr); }
};

using Config = Handle<memrw_config, memrw_config_free>;
using Dataset = Handle<memrw_dataset, memrw_dataset_free>;
using Model = Handle<memrw_model, memrw_model_free>;

struct ConfigFlags {
  std::string path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;

  void add_to(CLI::App* cmd) {
    cmd->add_option("-c,--config", path, "Run config JSON file")->check(CLI::ExistingFile);
    cmd->add_option("--set", sets, "Override a config key, e.g. pointer.epochs=3");
    cmd->add_option("--seed", seed, "Seed (overrides config and MEMRW_SEED)");
    cmd->add_option("--threads", threads, "Worker threads");
  }

  void load(Config& c) const {
    check(memrw_config_load(path.empty() ? nullptr : path.c_str(), &c.ptr));
    for (const auto& s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) {
        throw Failure{MEMRW_CONFIG, "config error: --set expects key=value, got '" + s + "'"};
      }
      check(memrw_config_set(c.ptr, s.substr(0, eq).c_str(), s.substr(eq + 1).c_str()));
    }
    if (seed) check(memrw_config_set(c.ptr, "seed", std::to_string(*seed).c_str()));
    if (threads) check(memrw_config_set(c.ptr, "threads", std::to_string(*threads).c_str()));
  }
};

void on_epoch(int epoch, double loss, void*) {
  std::fprintf(stderr, "epoch %d loss %.6f\n", epoch, loss);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Memory-grounded query rewriting"};
  app.require_subcommand(1);
  app.set_version_flag("--version", memrw_version());

  ConfigFlags gen_flags;
  std::string gen_out;
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_flags.add_to(gen);
  gen->add_option("-o,--out", gen_out, "Output directory")->required();

  ConfigFlags train_flags;
  std::string train_kind = "pointer";
  std::string train_data;
  std::string train_out;
  std::string train_resume;
  std::string train_trace;
  std::optional<int> train_epochs;
  auto* train = app.add_subcommand("train", "Train a model and write a checkpoint");
  train_flags.add_to(train);
  train->add_option("-k,--kind", train_kind, "retrieval, pointer or pointer_no_memory");
  train->add_option("-d,--data", train_data, "Dataset directory")->required();
  train->add_option("-o,--out", train_out, "Output checkpoint")->required();
  train->add_option("--resume", train_resume, "Continue training this checkpoint")
      ->check(CLI::ExistingFile);
  train->add_option("--epochs", train_epochs, "Total epochs to reach");
  train->add_option("--trace", train_trace, "Loss trace file (default <out>.loss.json)");

  std::string eval_ckpt;
  std::string eval_data;
  std::string eval_out;
  std::optional<int> eval_threads;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  ev->add_option("-m,--checkpoint", eval_ckpt, "Checkpoint")->required();
  ev->add_option("-d,--data", eval_data, "Dataset directory")->required();
  ev->add_option("-o,--out", eval_out, "Output directory")->required();
  ev->add_option("--threads", eval_threads, "Worker threads");

  std::string rw_ckpt;
  std::string rw_nbest;
  std::string rw_memory;
  double rw_threshold = 0.5;
  auto* rw = app.add_subcommand("rewrite", "Rewrite one query");
  rw->add_option("-m,--checkpoint", rw_ckpt, "Checkpoint")->required();
  rw->add_option("-n,--nbest", rw_nbest, "N-best JSON file")->required();
  rw->add_option("--memory", rw_memory, "User memory JSON file");
  rw->add_option("-t,--threshold", rw_threshold, "Rewrite threshold");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: USAGE: %s\n", one_line(e.what()).c_str());
    return 2;
  }

  try {
    if (gen->parsed()) {
      Config config;
      gen_flags.load(config);
      char* report = nullptr;
      check(memrw_generate(config.ptr, gen_out.c_str(), nullptr, &report));
      std::printf("%s\n", take(report).c_str());
    } else if (train->parsed()) {
      Dataset data;
      check(memrw_dataset_load(train_data.c_str(), &data.ptr));
      Model model;
      int target = 0;
      if (!train_resume.empty()) {
        check(memrw_model_load(train_resume.c_str(), &model.ptr));
        if (train_flags.threads) check(memrw_model_set_threads(model.ptr, *train_flags.threads));
        target = train_epochs.value_or(memrw_model_epochs(model.ptr));
      } else {
        Config config;
        train_flags.load(config);
        const std::string section = train_kind == "retrieval" ? "retrieval" : "pointer";
        if (train_epochs) {
          check(memrw_config_set(config.ptr, (section + ".epochs").c_str(),
                                 std::to_string(*train_epochs).c_str()));
        }
        check(memrw_model_create(train_kind.c_str(), config.ptr, data.ptr, &model.ptr));
        char* epochs = nullptr;
        check(memrw_config_get(config.ptr, (section + ".epochs").c_str(), &epochs));
        target = std::stoi(take(epochs));
      }
      check(memrw_model_train(model.ptr, data.ptr, target, on_epoch, nullptr));
      check(memrw_model_save(model.ptr, train_out.c_str()));
      char* trace = nullptr;
      check(memrw_model_trace(model.ptr, &trace));
      write_file(train_trace.empty() ? train_out + ".loss.json" : train_trace, take(trace) + "\n");
      std::printf("{\"checkpoint\": \"%s\", \"kind\": \"%s\", \"epochs\": %d}\n", train_out.c_str(),
                  memrw_model_kind(model.ptr), memrw_model_epochs(model.ptr));
    } else if (ev->parsed()) {
      const auto start = std::chrono::steady_clock::now();
      Model model;
      check(memrw_model_load(eval_ckpt.c_str(), &model.ptr));
      if (eval_threads) check(memrw_model_set_threads(model.ptr, *eval_threads));
      Dataset data;
      check(memrw_dataset_load(eval_data.c_str(), &data.ptr));
      char* metrics = nullptr;
      check(memrw_model_evaluate(model.ptr, data.ptr, eval_out.c_str(), &metrics));
      const double seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      write_file(eval_out + "/timing.json",
                 "{\n  \"eval_seconds\": " + std::to_string(seconds) + "\n}\n");
      std::printf("%s\n", take(metrics).c_str());
    } else if (rw->parsed()) {
      Model model;
      check(memrw_model_load(rw_ckpt.c_str(), &model.ptr));
      const std::string nbest = read_file(rw_nbest);
      const std::string memory = rw_memory.empty() ? "" : read_file(rw_memory);
      char* decision = nullptr;
      check(memrw_model_rewrite(model.ptr, nbest.c_str(),
                                rw_memory.empty() ? nullptr : memory.c_str(), rw_threshold,
                                &decision));
      std::printf("%s\n", take(decision).c_str());
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s: %s\n", memrw_status_name(f.status),
                 one_line(f.message).c_str());
    return exit_code(f.status);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: INTERNAL: %s\n", one_line(e.what()).c_str());
    return 1;
  }
  return 0;
}
