#pragma once

// Binary checkpoint container. Layout, all integers and floats little-endian:
//
//   magic      5 bytes "MEMRW"
//   version    u32
//   kind       u32  (0 retrieval, 1 pointer, 2 pointer_no_memory)
//   seed       u64
//   epochs     u32  completed training epochs
//   config     str  run config as JSON
//   trace      str  loss trace as JSON
//   merges     u64 count, then (str left, str right) per merge in rank order
//   symbols    u64 count, then str per sub-word id (specials included)
//   gen words  u64 count, then str per word
//   arrays     u64 count, then per array: str name, u64 rows, u64 cols,
//              rows * cols f64 in column-major order
//
// A str is a u64 byte length followed by the bytes. Optimizer state is
// stored as the arrays "adam.step" (1 x 1), "adam.m.<param>" and
// "adam.v.<param>".

#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "memrw/subword.hpp"

namespace memrw {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class ModelKind : std::uint32_t { kRetrieval = 0, kPointer = 1, kPointerNoMemory = 2 };

ModelKind parse_model_kind(const std::string& s);  // throws Error(kConfig)
std::string to_string(ModelKind kind);

struct NamedArray {
  std::string name;
  Eigen::MatrixXd value;
};

struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  ModelKind kind = ModelKind::kRetrieval;
  std::uint64_t seed = 0;
  std::uint32_t epochs_completed = 0;
  std::string config_json;
  std::string trace_json;
  std::vector<subword::MergeRule> merges;
  std::vector<std::string> symbols;
  std::vector<std::string> generation_words;
  std::vector<NamedArray> arrays;

  // nullptr when absent.
  const NamedArray* find(const std::string& name) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& ckpt);
// Throws Error(kFormat) on a bad magic, unknown version or truncated data.
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace memrw
