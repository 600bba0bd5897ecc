#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cardiospike/model/config.hpp"
#include "cardiospike/model/detector.hpp"

namespace cardiospike::model {

// Binary container, all integers little-endian:
//
//   "CSPKCKPT"  u32 version  u32 entry_count
//   entry:   str key, u64 x 11 config fields
//            (k C H S L F T P M se_reduction padding), u32 tensor_count
//   tensor:  str name, u32 rank, u64 dims[rank], f64 payload (row-major)
//   str:     u32 byte length, bytes
//
// Entries are keyed by training position, e.g. "fold3_epoch50".

struct CheckpointEntry {
    std::string key;
    DetectorConfig config;
    DetectorParams params;
};

struct Checkpoint {
    std::vector<CheckpointEntry> entries;

    /// Throws std::out_of_range when `key` is absent.
    const CheckpointEntry& find(std::string_view key) const;
    const CheckpointEntry& last() const;
};

std::string checkpoint_key(std::size_t fold, std::size_t epoch);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(std::string_view bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cardiospike::model
