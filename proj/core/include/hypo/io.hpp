// SPDX-License-Identifier: Apache-2.0
//
// On-disk formats. All files are versioned, carry the experiment config hash and seed, and
// are byte-stable for identical inputs (doubles are written in shortest round-trip form).
//
//   dataset  (JSON lines)  header line, then one {prompt_id, chosen_id, rejected_id,
//                          ref_margin[, weight]} object per record
//   world    (JSON)        config, true rewards, reference policy checkpoint
//   checkpoint (JSON)      policy class, vocabulary sizes, parameters, seed lineage
//   run log  (JSON lines)  header line, then one object per evaluation point
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "hypo/datagen.hpp"
#include "hypo/policies.hpp"
#include "hypo/trainer.hpp"

namespace hypo {

inline constexpr int kFormatVersion = 1;

/// 64-bit FNV-1a of `text`, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view text);

struct FileProvenance {
  std::string config_hash;
  std::uint64_t seed = 0;
};

void write_dataset(const PreferenceDataset& dataset, const FileProvenance& provenance,
                   const std::filesystem::path& path);
PreferenceDataset read_dataset(const std::filesystem::path& path,
                               FileProvenance* provenance = nullptr);

void write_world(const SyntheticWorld& world, const FileProvenance& provenance,
                 const std::filesystem::path& path);
SyntheticWorld read_world(const std::filesystem::path& path,
                          FileProvenance* provenance = nullptr);

struct CheckpointInfo {
  FileProvenance provenance;
  /// Seeds that produced this policy, outermost first (world, data, training).
  std::vector<std::uint64_t> seed_lineage;
  std::size_t epoch = 0;
};

void write_checkpoint(const Policy& policy, const CheckpointInfo& info,
                      const std::filesystem::path& path);
std::unique_ptr<Policy> read_checkpoint(const std::filesystem::path& path,
                                        CheckpointInfo* info = nullptr);

void write_run_log(const RunLog& log, const FileProvenance& provenance,
                   const std::filesystem::path& path);
RunLog read_run_log(const std::filesystem::path& path, FileProvenance* provenance = nullptr);

/// Whole file as a string; throws IoError when unreadable.
std::string read_file(const std::filesystem::path& path);

}  // namespace hypo
