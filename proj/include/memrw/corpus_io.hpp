#pragma once

// JSON forms of the corpus types. Field names match the struct members.
// Readers reject unknown keys.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "memrw/corpus.hpp"
#include "memrw/synthetic.hpp"

namespace memrw::corpus {

using nlohmann::json;

void to_json(json& j, const Utterance& u);
void from_json(const json& j, Utterance& u);
void to_json(json& j, const NBest& n);
void from_json(const json& j, NBest& n);
void to_json(json& j, const MemoryEntry& e);
void from_json(const json& j, MemoryEntry& e);
void to_json(json& j, const UserMemory& m);
void from_json(const json& j, UserMemory& m);
void to_json(json& j, const RephrasePair& p);
void from_json(const json& j, RephrasePair& p);
void to_json(json& j, const GenConfig& c);
// Missing keys keep their defaults.
void from_json(const json& j, GenConfig& c);

// Throws Error(kFormat) naming the first key of `j` not in `allowed`.
void require_known_keys(const json& j, std::initializer_list<const char*> allowed,
                        const std::string& where);

void write_pairs(const std::filesystem::path& path, const std::vector<RephrasePair>& pairs);
std::vector<RephrasePair> read_pairs(const std::filesystem::path& path);
void write_memories(const std::filesystem::path& path, const MemoryMap& memories);
MemoryMap read_memories(const std::filesystem::path& path);

// Dataset directory: pairs.jsonl, memories.jsonl and split.json (the
// train/test user lists).
void write_dataset(const std::filesystem::path& dir, const DatasetSplit& split);
DatasetSplit read_dataset(const std::filesystem::path& dir);

}  // namespace memrw::corpus
