#include "segkit/rotation_dataset.hpp"

#include <cstdio>
#include <set>

#include "segkit/error.hpp"
#include "segkit/parallel.hpp"

namespace segkit::aug {

void RotationSweep::validate() const {
  if (step <= 0 || start >= end) {
    throw Error(ErrorCode::Config,
                "rotation sweep needs step > 0 and start < end (got start " +
                    std::to_string(start) + ", end " + std::to_string(end) +
                    ", step " + std::to_string(step) + ")");
  }
}

std::vector<int> RotationSweep::degrees() const {
  validate();
  std::vector<int> out;
  for (int d = start; d < end; d += step) out.push_back(d);
  return out;
}

std::string rotated_sample_id(const std::string& pair_id, int degrees) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "_r%03d", degrees);
  return pair_id + buf;
}

io::DatasetManifest expand_rotation_dataset(
    const std::vector<io::AnnotatedImage>& pairs, const fs::path& out_dir,
    const RotationOptions& options) {
  if (pairs.empty()) {
    throw Error(ErrorCode::InvalidInput, "rotation expansion needs at least one pair");
  }
  std::set<std::string> ids;
  for (const auto& p : pairs) {
    if (!ids.insert(p.id).second) {
      throw Error(ErrorCode::InvalidInput, "duplicate pair id '" + p.id + "'");
    }
  }
  const std::vector<int> angles = options.sweep.degrees();
  io::prepare_dataset_dirs(out_dir, options.write);

  const std::size_t per_pair = angles.size();
  std::vector<io::SampleEntry> entries(pairs.size() * per_pair);
  parallel_for(entries.size(), options.jobs, [&](std::size_t i) {
    const auto& pair = pairs[i / per_pair];
    const int deg = angles[i % per_pair];
    auto [image, instances] =
        rotate_pair(pair.image, pair.instances, deg, options.rule);
    const std::string id = rotated_sample_id(pair.id, deg);
    instances.image_id = id;
    io::SampleEntry e = io::write_sample(out_dir, id, image, instances, options.write);
    e.extra["pair"] = pair.id;
    e.extra["degrees"] = deg;
    e.extra["instance_count"] = instances.instances.size();
    entries[i] = std::move(e);
  });

  io::DatasetManifest m;
  m.name = options.name;
  m.role = options.role;
  nlohmann::json sources = nlohmann::json::array();
  for (const auto& p : pairs) sources.push_back(p.id);
  m.generator = {
      {"tool", "rotaug"},
      {"sweep", {{"start", options.sweep.start},
                 {"end", options.sweep.end},
                 {"step", options.sweep.step}}},
      {"drop_rule", {{"min_fraction", options.rule.min_fraction},
                     {"min_pixels", options.rule.min_pixels}}},
      {"pairs", std::move(sources)},
  };
  m.samples = std::move(entries);
  io::write_manifest(m, out_dir / io::kManifestFile);
  return m;
}

}  // namespace segkit::aug
