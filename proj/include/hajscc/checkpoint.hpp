#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "hajscc/config.hpp"
#include "hajscc/models.hpp"

namespace hajscc {

inline constexpr char kCheckpointMagic[4] = {'H', 'A', 'J', '1'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Little-endian layout:
//   "HAJ1" | u32 version | u64 model digest | f64 omega gain | f64 omega offset
//   u32 config length | config text (RunConfig::canonical)
//   u32 tensor count | per tensor: u32 name length, name, u32 rank, u32 dims[rank], f32 values
//   u64 FNV-1a of every preceding byte
//
// The embedded config lets a checkpoint rebuild its own model.

struct LoadedCheckpoint {
  RunConfig config;
  HyperAJSCCModel model;
};

std::string serialize_checkpoint(HyperAJSCCModel& model, const RunConfig& config);
void save_checkpoint(const std::filesystem::path& file, HyperAJSCCModel& model,
                     const RunConfig& config);

/// Throws FormatError on any truncation, checksum, magic, version, name or
/// shape mismatch. When `expected` is given its model digest must match the
/// stored one unless `force`, else ConfigError.
LoadedCheckpoint parse_checkpoint(const std::string& bytes, const RunConfig* expected = nullptr,
                                  bool force = false);
LoadedCheckpoint load_checkpoint(const std::filesystem::path& file,
                                 const RunConfig* expected = nullptr, bool force = false);

}  // namespace hajscc
