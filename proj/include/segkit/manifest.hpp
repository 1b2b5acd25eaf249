#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace segkit::io {

namespace fs = std::filesystem;

inline constexpr int kManifestFormatVersion = 1;

enum class DatasetRole { Train, Valid, Test, Qa };

std::string to_string(DatasetRole role);
// Accepts train, valid, test, qa. Throws InvalidInput otherwise.
DatasetRole parse_role(std::string_view text);

struct SampleEntry {
  std::string id;
  std::string image;           // paths relative to the manifest directory
  std::string label;
  std::string instance_mask;   // optional, empty when absent
  std::string semantic_mask;   // optional, empty when absent
  std::optional<std::uint64_t> seed;
  std::string domain;
  bool negative = false;
  nlohmann::json extra = nlohmann::json::object();  // unknown fields
};

struct DatasetManifest {
  int format_version = kManifestFormatVersion;
  std::string name;
  DatasetRole role = DatasetRole::Train;
  nlohmann::json generator = nlohmann::json::object();
  std::vector<SampleEntry> samples;
  nlohmann::json extra = nlohmann::json::object();  // unknown fields
};

nlohmann::json to_json(const DatasetManifest& manifest);
// Throws UnsupportedVersion for another format_version, Parse for schema
// errors and duplicate sample ids.
DatasetManifest manifest_from_json(const nlohmann::json& doc);

// Canonical form: sorted keys, two-space indent, trailing newline.
std::string serialize_manifest(const DatasetManifest& manifest);

// Referenced files missing relative to `base_dir`, in sample order.
std::vector<std::string> missing_files(const DatasetManifest& manifest,
                                       const fs::path& base_dir);

// Validates that every referenced file exists next to `path` (Validation
// error listing the missing paths) and writes the canonical form.
void write_manifest(const DatasetManifest& manifest, const fs::path& path);
DatasetManifest read_manifest(const fs::path& path);

}  // namespace segkit::io
