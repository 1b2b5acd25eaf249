#include "segkit/manifest.hpp"

#include <algorithm>
#include <set>

#include "segkit/error.hpp"
#include "segkit/labels_io.hpp"

namespace segkit::io {

using nlohmann::json;

std::string to_string(DatasetRole role) {
  switch (role) {
    case DatasetRole::Train: return "train";
    case DatasetRole::Valid: return "valid";
    case DatasetRole::Test: return "test";
    case DatasetRole::Qa: return "qa";
  }
  return "train";
}

DatasetRole parse_role(std::string_view text) {
  if (text == "train") return DatasetRole::Train;
  if (text == "valid") return DatasetRole::Valid;
  if (text == "test") return DatasetRole::Test;
  if (text == "qa") return DatasetRole::Qa;
  throw Error(ErrorCode::InvalidInput,
              "unknown dataset role '" + std::string(text) +
                  "' (expected train, valid, test or qa)");
}

namespace {

const char* const kSampleKeys[] = {"id",     "image",  "label",
                                   "instance_mask", "semantic_mask", "seed",
                                   "domain", "negative"};
const char* const kTopKeys[] = {"format_version", "name", "role", "generator",
                                "samples"};

[[noreturn]] void bad(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::Parse, "manifest field " + field + ": " + why);
}

std::string get_string(const json& obj, const char* key, const std::string& at,
                       bool required) {
  const auto it = obj.find(key);
  if (it == obj.end()) {
    if (required) bad(at + "." + key, "missing");
    return {};
  }
  if (!it->is_string()) bad(at + "." + key, "expected a string");
  return it->get<std::string>();
}

json sample_json(const SampleEntry& s) {
  json j = s.extra.is_object() ? s.extra : json::object();
  j["id"] = s.id;
  j["image"] = s.image;
  j["label"] = s.label;
  if (!s.instance_mask.empty()) j["instance_mask"] = s.instance_mask;
  if (!s.semantic_mask.empty()) j["semantic_mask"] = s.semantic_mask;
  if (s.seed) j["seed"] = *s.seed;
  if (!s.domain.empty()) j["domain"] = s.domain;
  if (s.negative) j["negative"] = true;
  return j;
}

}  // namespace

json to_json(const DatasetManifest& m) {
  json j = m.extra.is_object() ? m.extra : json::object();
  j["format_version"] = m.format_version;
  j["name"] = m.name;
  j["role"] = to_string(m.role);
  j["generator"] = m.generator;
  json samples = json::array();
  for (const auto& s : m.samples) samples.push_back(sample_json(s));
  j["samples"] = std::move(samples);
  return j;
}

DatasetManifest manifest_from_json(const json& doc) {
  if (!doc.is_object()) bad("<root>", "expected an object");
  DatasetManifest m;
  const auto version = doc.find("format_version");
  if (version == doc.end() || !version->is_number_integer()) {
    bad("format_version", "missing or not an integer");
  }
  m.format_version = version->get<int>();
  if (m.format_version != kManifestFormatVersion) {
    throw Error(ErrorCode::UnsupportedVersion,
                "manifest format_version " + std::to_string(m.format_version) +
                    " is not supported (expected " +
                    std::to_string(kManifestFormatVersion) + ")");
  }
  m.name = get_string(doc, "name", "<root>", true);
  try {
    m.role = parse_role(get_string(doc, "role", "<root>", true));
  } catch (const Error& e) {
    bad("role", e.what());
  }
  if (const auto g = doc.find("generator"); g != doc.end()) m.generator = *g;

  const auto samples = doc.find("samples");
  if (samples == doc.end() || !samples->is_array()) {
    bad("samples", "missing or not an array");
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < samples->size(); ++i) {
    const json& sj = (*samples)[i];
    const std::string at = "samples[" + std::to_string(i) + "]";
    if (!sj.is_object()) bad(at, "expected an object");
    SampleEntry s;
    s.id = get_string(sj, "id", at, true);
    s.image = get_string(sj, "image", at, true);
    s.label = get_string(sj, "label", at, true);
    s.instance_mask = get_string(sj, "instance_mask", at, false);
    s.semantic_mask = get_string(sj, "semantic_mask", at, false);
    s.domain = get_string(sj, "domain", at, false);
    if (const auto seed = sj.find("seed"); seed != sj.end()) {
      if (!seed->is_number_unsigned() && !seed->is_number_integer()) {
        bad(at + ".seed", "expected an integer");
      }
      s.seed = seed->get<std::uint64_t>();
    }
    if (const auto neg = sj.find("negative"); neg != sj.end()) {
      if (!neg->is_boolean()) bad(at + ".negative", "expected a boolean");
      s.negative = neg->get<bool>();
    }
    for (const auto& [key, value] : sj.items()) {
      if (std::find(std::begin(kSampleKeys), std::end(kSampleKeys), key) ==
          std::end(kSampleKeys)) {
        s.extra[key] = value;
      }
    }
    if (!ids.insert(s.id).second) bad(at + ".id", "duplicate sample id '" + s.id + "'");
    m.samples.push_back(std::move(s));
  }
  for (const auto& [key, value] : doc.items()) {
    if (std::find(std::begin(kTopKeys), std::end(kTopKeys), key) ==
        std::end(kTopKeys)) {
      m.extra[key] = value;
    }
  }
  return m;
}

std::string serialize_manifest(const DatasetManifest& manifest) {
  return to_json(manifest).dump(2) + "\n";
}

std::vector<std::string> missing_files(const DatasetManifest& manifest,
                                       const fs::path& base_dir) {
  std::vector<std::string> missing;
  for (const auto& s : manifest.samples) {
    for (const std::string* p :
         {&s.image, &s.label, &s.instance_mask, &s.semantic_mask}) {
      if (p->empty()) continue;
      if (!fs::exists(base_dir / *p)) missing.push_back(*p);
    }
  }
  return missing;
}

void write_manifest(const DatasetManifest& manifest, const fs::path& path) {
  const auto missing = missing_files(manifest, path.parent_path());
  if (!missing.empty()) {
    std::string list;
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) {
      list += (i ? ", " : "") + missing[i];
    }
    if (missing.size() > 20) list += ", ...";
    throw Error(ErrorCode::Validation,
                "manifest references " + std::to_string(missing.size()) +
                    " missing file(s): " + list);
  }
  write_text_file(path, serialize_manifest(manifest));
}

DatasetManifest read_manifest(const fs::path& path) {
  json doc;
  try {
    doc = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse,
                "invalid JSON in '" + path.string() + "': " + e.what());
  }
  return manifest_from_json(doc);
}

}  // namespace segkit::io
