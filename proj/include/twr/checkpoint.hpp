#pragma once

// Checkpoints are two files sharing a stem:
//   <stem>.manifest  JSON text: format version, model/run config, vocab hash,
//                    tensor table (name, rows, cols, dtype, offset, bytes),
//                    optimizer step, rng state, trainer state
//   <stem>.bin       contiguous little-endian raw values, row-major per tensor
// The tensor table lists parameters, then Adam first moments ("adam.m/<name>"),
// then second moments ("adam.v/<name>"). Offsets tile the blob exactly.

#include <filesystem>
#include <string>

#include "json.hpp"
#include "twr/optim.hpp"
#include "twr/params.hpp"
#include "twr/rng.hpp"

namespace twr {

inline constexpr const char* kCheckpointFormat = "twrvae-checkpoint";
inline constexpr int kCheckpointVersion = 1;

enum class StoragePrecision { F64, F32 };

struct Checkpoint {
  nlohmann::json config;         // model and run settings, free-form
  std::uint64_t vocab_hash = 0;
  ParameterSet params;
  AdamState adam;
  RngState rng;
  nlohmann::json trainer;        // epoch counters, best value, log so far
};

/// F32 storage rounds every value to float; reload widens back to double.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& stem,
                     StoragePrecision precision = StoragePrecision::F64);

/// Throws std::runtime_error on version mismatch (both versions named) or when
/// the blob size disagrees with the manifest (expected and actual byte counts
/// named).
Checkpoint load_checkpoint(const std::filesystem::path& stem);

std::filesystem::path manifest_path(const std::filesystem::path& stem);
std::filesystem::path blob_path(const std::filesystem::path& stem);

}  // namespace twr
