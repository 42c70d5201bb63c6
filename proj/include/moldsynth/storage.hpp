#pragma once

#include "moldsynth/core_types.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace moldsynth {

namespace fs = std::filesystem;

/// Manifest format version written into every manifest.
inline constexpr int kManifestVersion = 1;

struct ManifestEntry {
  std::string cycle_id;
  std::string file;  // relative to the manifest directory
  Label label;
  Source source = Source::Synthetic;
  int sample_period_ms = 10;
  long long length = 0;
  std::optional<std::string> split;
  std::optional<QualityIndicators> quality;
};

struct DatasetManifest {
  std::string name;
  std::string schema_fingerprint;
  std::vector<ManifestEntry> entries;
};

/// Shortest decimal that parses back to exactly `v`.
std::string format_double(double v);

/// CSV with the canonical header and one row per sample, LF line endings.
void write_cycle(const CycleRecord& record, const fs::path& path);

/// Samples and setpoints only; label, source and period come from the
/// manifest. Parse errors cite the line and column.
CycleRecord read_cycle(const fs::path& path, const FeatureSchema& schema = FeatureSchema::canonical());

/// Writes <dir>/cycles/<cycle_id>.csv for every record plus
/// <dir>/manifest.json, and returns the manifest.
DatasetManifest write_dataset(const Dataset& dataset, const fs::path& dir,
                              const std::optional<std::string>& split = std::nullopt);

void write_manifest(const DatasetManifest& manifest, const fs::path& dir);
DatasetManifest read_manifest(const fs::path& dir);

/// Loads every cycle referenced by <dir>/manifest.json in manifest order.
Dataset read_dataset(const fs::path& dir, const FeatureSchema& schema = FeatureSchema::canonical());

/// Write `text` to `path` atomically (temp file + rename).
void write_text_file(const fs::path& path, const std::string& text);
std::string read_text_file(const fs::path& path);

}  // namespace moldsynth
