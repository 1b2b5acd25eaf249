#include "segkit/labels_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "segkit/contour.hpp"
#include "segkit/error.hpp"

namespace segkit::io {

using nlohmann::json;

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
}

namespace {

// Degenerate rings (a single pixel, a one-pixel-wide stroke) repeat vertices
// so every written polygon has at least three.
Polygon padded(Polygon poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; poly.size() < 3; ++i) poly.push_back(poly[i % n]);
  return poly;
}

Polygon encode_instance(const InstanceAnnotation& inst,
                        const std::string& image_id) {
  auto poly = mask_to_polygon(inst.mask);
  if (!poly) {
    throw Error(ErrorCode::Validation,
                "instance " + std::to_string(inst.id) + " of '" + image_id +
                    "' cannot be written as a single polygon");
  }
  return padded(std::move(*poly));
}

void append_fixed6(std::string& out, double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof(buf), "%.6f", v);
  out.append(buf, static_cast<std::size_t>(n));
}

}  // namespace

std::optional<YoloSegRecord> to_yolo_record(const InstanceAnnotation& inst,
                                            int width, int height) {
  auto poly = mask_to_polygon(inst.mask);
  if (!poly) return std::nullopt;
  YoloSegRecord rec;
  rec.class_id = inst.class_id;
  rec.confidence = inst.confidence;
  const double w = width;
  const double h = height;
  for (const auto& p : padded(std::move(*poly))) {
    rec.vertices.push_back({p.x / w, p.y / h});
  }
  return rec;
}

std::vector<YoloSegRecord> to_yolo_records(const InstanceSet& instances) {
  std::vector<YoloSegRecord> records;
  records.reserve(instances.instances.size());
  for (const auto& inst : instances.instances) {
    auto rec = to_yolo_record(inst, instances.width, instances.height);
    if (!rec) {
      throw Error(ErrorCode::Validation,
                  "instance " + std::to_string(inst.id) + " of '" +
                      instances.image_id +
                      "' cannot be written as a single polygon");
    }
    records.push_back(std::move(*rec));
  }
  return records;
}

std::string format_yolo_seg(std::span<const YoloSegRecord> records) {
  std::string out;
  for (const auto& rec : records) {
    out += std::to_string(rec.class_id);
    for (const auto& p : rec.vertices) {
      out += ' ';
      append_fixed6(out, p.x);
      out += ' ';
      append_fixed6(out, p.y);
    }
    if (rec.confidence) {
      out += ' ';
      append_fixed6(out, *rec.confidence);
    }
    out += '\n';
  }
  return out;
}

std::string format_yolo_seg(const InstanceSet& instances) {
  return format_yolo_seg(to_yolo_records(instances));
}

void write_yolo_seg(const InstanceSet& instances, const fs::path& path) {
  write_text_file(path, format_yolo_seg(instances));
}

std::vector<YoloSegRecord> parse_yolo_seg(std::string_view text,
                                          std::string_view source) {
  std::vector<YoloSegRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    auto fail = [&](const std::string& why) {
      return Error(ErrorCode::Parse, std::string(source) + ":" +
                                         std::to_string(line_no) + ": " + why);
    };

    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      const std::size_t start = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\t') ++i;
      if (i > start) tokens.push_back(line.substr(start, i - start));
    }
    if (tokens.empty()) continue;

    YoloSegRecord rec;
    {
      const auto tok = tokens[0];
      const auto [ptr, ec] =
          std::from_chars(tok.data(), tok.data() + tok.size(), rec.class_id);
      if (ec != std::errc{} || ptr != tok.data() + tok.size() ||
          rec.class_id < 0) {
        throw fail("invalid class id '" + std::string(tok) + "'");
      }
    }
    std::vector<double> values;
    for (std::size_t t = 1; t < tokens.size(); ++t) {
      double v = 0.0;
      const auto tok = tokens[t];
      const auto [ptr, ec] =
          std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc{} || ptr != tok.data() + tok.size() ||
          !std::isfinite(v)) {
        throw fail("invalid number '" + std::string(tok) + "'");
      }
      if (v < 0.0 || v > 1.0) {
        throw fail("value " + std::string(tok) + " outside [0,1]");
      }
      values.push_back(v);
    }
    if (values.size() % 2 == 1) {
      rec.confidence = values.back();
      values.pop_back();
    }
    if (values.size() < 6) {
      throw fail("polygon needs at least 3 vertices");
    }
    for (std::size_t k = 0; k < values.size(); k += 2) {
      rec.vertices.push_back({values[k], values[k + 1]});
    }
    records.push_back(std::move(rec));
  }
  return records;
}

InstanceSet records_to_instances(std::span<const YoloSegRecord> records,
                                 std::string image_id, int width, int height) {
  InstanceSet set{std::move(image_id), width, height, {}};
  int next_id = 1;
  for (const auto& rec : records) {
    Polygon poly;
    poly.reserve(rec.vertices.size());
    for (const auto& v : rec.vertices) {
      const double x = std::min(std::round(v.x * width), width - 1.0);
      const double y = std::min(std::round(v.y * height), height - 1.0);
      poly.push_back({x, y});
    }
    std::vector<Polygon> polys{std::move(poly)};
    InstanceAnnotation inst;
    inst.id = next_id++;
    inst.class_id = rec.class_id;
    inst.mask = contours_to_mask(polys, width, height).tightened();
    inst.confidence = rec.confidence;
    set.instances.push_back(std::move(inst));
  }
  return set;
}

InstanceSet read_yolo_seg(const fs::path& path, int width, int height) {
  const auto records = parse_yolo_seg(read_text_file(path), path.string());
  return records_to_instances(records, path.stem().string(), width, height);
}

// ---------------------------------------------------------------------------
// COCO
// ---------------------------------------------------------------------------

std::vector<Category> default_categories() { return {{1, "wheat_head"}}; }

namespace {

json number(double v) {
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    return json(static_cast<long long>(v));
  }
  return json(v);
}

json annotation_json(const InstanceAnnotation& inst, const std::string& image_id,
                     long long ann_id, long long image_number,
                     const std::vector<Category>& categories) {
  if (inst.class_id < 0 ||
      static_cast<std::size_t>(inst.class_id) >= categories.size()) {
    throw Error(ErrorCode::Validation,
                "instance " + std::to_string(inst.id) + " of '" + image_id +
                    "' has class " + std::to_string(inst.class_id) +
                    " without a category");
  }
  json flat = json::array();
  for (const auto& p : encode_instance(inst, image_id)) {
    flat.push_back(number(p.x));
    flat.push_back(number(p.y));
  }
  const Rect box = inst.mask.bounds();
  json ann = {
      {"id", ann_id},
      {"image_id", image_number},
      {"category_id", categories[static_cast<std::size_t>(inst.class_id)].id},
      {"segmentation", json::array({flat})},
      {"area", inst.mask.count()},
      {"bbox", {box.x, box.y, box.width, box.height}},
      {"iscrowd", 0},
  };
  if (inst.confidence) ann["score"] = *inst.confidence;
  return ann;
}

long long image_number(const CocoDataset& dataset, std::size_t index) {
  return index < dataset.numeric_ids.size()
             ? dataset.numeric_ids[index]
             : static_cast<long long>(index) + 1;
}

[[noreturn]] void schema_error(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::Parse, "COCO schema violation at " + field + ": " + why);
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) schema_error(where, "expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) schema_error(where + "." + key, "missing field");
  return *it;
}

long long require_int(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  if (!v.is_number_integer()) {
    schema_error(where + "." + key, "expected an integer");
  }
  return v.get<long long>();
}

BinaryMask decode_segmentation(const json& seg, int width, int height,
                               const std::string& where) {
  if (seg.is_object()) {
    BinaryMask m = decode_coco_rle(seg);
    if (m.width() != width || m.height() != height) {
      schema_error(where, "RLE size does not match the image");
    }
    return m;
  }
  if (!seg.is_array()) schema_error(where, "expected polygons or RLE");
  std::vector<Polygon> polys;
  for (std::size_t k = 0; k < seg.size(); ++k) {
    const json& flat = seg[k];
    const std::string at = where + "[" + std::to_string(k) + "]";
    if (!flat.is_array() || flat.size() % 2 != 0) {
      schema_error(at, "expected an even-length coordinate list");
    }
    Polygon poly;
    for (std::size_t i = 0; i < flat.size(); i += 2) {
      if (!flat[i].is_number() || !flat[i + 1].is_number()) {
        schema_error(at, "non-numeric coordinate");
      }
      poly.push_back({flat[i].get<double>(), flat[i + 1].get<double>()});
    }
    if (!poly.empty()) polys.push_back(std::move(poly));
  }
  try {
    return contours_to_mask(polys, width, height);
  } catch (const Error& e) {
    schema_error(where, e.what());
  }
}

struct ImageIndex {
  std::map<long long, std::size_t> by_number;
  std::map<int, std::size_t> category_index;
};

void add_annotation(const json& ann, const std::string& where,
                    std::vector<InstanceSet>& images, const ImageIndex& index,
                    bool want_score) {
  const long long img = require_int(ann, "image_id", where);
  const auto it = index.by_number.find(img);
  if (it == index.by_number.end()) {
    schema_error(where + ".image_id", "unknown image " + std::to_string(img));
  }
  const long long cat = require_int(ann, "category_id", where);
  const auto ct = index.category_index.find(static_cast<int>(cat));
  if (ct == index.category_index.end()) {
    schema_error(where + ".category_id",
                 "unknown category " + std::to_string(cat));
  }
  InstanceSet& set = images[it->second];
  InstanceAnnotation inst;
  inst.id = static_cast<int>(set.instances.size()) + 1;
  inst.class_id = static_cast<int>(ct->second);
  inst.mask = decode_segmentation(require(ann, "segmentation", where), set.width,
                                  set.height, where + ".segmentation")
                  .tightened();
  if (!inst.mask.any()) {
    schema_error(where + ".segmentation", "decodes to an empty mask");
  }
  const auto score = ann.find("score");
  if (score != ann.end()) {
    if (!score->is_number() || score->get<double>() < 0.0 ||
        score->get<double>() > 1.0) {
      schema_error(where + ".score", "expected a number in [0,1]");
    }
    inst.confidence = score->get<double>();
  } else if (want_score) {
    schema_error(where + ".score", "missing field");
  }
  set.instances.push_back(std::move(inst));
}

ImageIndex build_index(const CocoDataset& dataset) {
  ImageIndex index;
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    index.by_number[image_number(dataset, i)] = i;
  }
  for (std::size_t c = 0; c < dataset.categories.size(); ++c) {
    index.category_index[dataset.categories[c].id] = c;
  }
  return index;
}

}  // namespace

json to_coco_json(const CocoDataset& dataset) {
  json images = json::array();
  json annotations = json::array();
  json categories = json::array();
  long long ann_id = 1;
  for (std::size_t i = 0; i < dataset.images.size(); ++i) {
    const InstanceSet& set = dataset.images[i];
    const long long number_i = image_number(dataset, i);
    images.push_back({{"id", number_i},
                      {"file_name", set.image_id + ".png"},
                      {"width", set.width},
                      {"height", set.height}});
    for (const auto& inst : set.instances) {
      annotations.push_back(annotation_json(inst, set.image_id, ann_id++,
                                            number_i, dataset.categories));
    }
  }
  for (const auto& c : dataset.categories) {
    categories.push_back({{"id", c.id}, {"name", c.name}});
  }
  return {{"images", images},
          {"annotations", annotations},
          {"categories", categories}};
}

CocoDataset from_coco_json(const json& doc) {
  if (!doc.is_object()) schema_error("<root>", "expected an object");
  CocoDataset out;
  out.categories.clear();

  const json& cats = require(doc, "categories", "<root>");
  if (!cats.is_array()) schema_error("categories", "expected an array");
  for (std::size_t c = 0; c < cats.size(); ++c) {
    const std::string where = "categories[" + std::to_string(c) + "]";
    Category cat;
    cat.id = static_cast<int>(require_int(cats[c], "id", where));
    const json& name = require(cats[c], "name", where);
    if (!name.is_string()) schema_error(where + ".name", "expected a string");
    cat.name = name.get<std::string>();
    out.categories.push_back(std::move(cat));
  }

  const json& images = require(doc, "images", "<root>");
  if (!images.is_array()) schema_error("images", "expected an array");
  for (std::size_t i = 0; i < images.size(); ++i) {
    const std::string where = "images[" + std::to_string(i) + "]";
    const long long number_i = require_int(images[i], "id", where);
    const long long w = require_int(images[i], "width", where);
    const long long h = require_int(images[i], "height", where);
    if (w < 1 || h < 1) schema_error(where, "non-positive dimensions");
    std::string name = std::to_string(number_i);
    const auto fn = images[i].find("file_name");
    if (fn != images[i].end()) {
      if (!fn->is_string()) schema_error(where + ".file_name", "expected a string");
      name = fs::path(fn->get<std::string>()).stem().string();
    }
    out.images.push_back({name, static_cast<int>(w), static_cast<int>(h), {}});
    out.numeric_ids.push_back(number_i);
  }

  const ImageIndex index = build_index(out);
  if (index.by_number.size() != out.images.size()) {
    schema_error("images", "duplicate image ids");
  }
  const json& anns = require(doc, "annotations", "<root>");
  if (!anns.is_array()) schema_error("annotations", "expected an array");
  for (std::size_t a = 0; a < anns.size(); ++a) {
    add_annotation(anns[a], "annotations[" + std::to_string(a) + "]", out.images,
                   index, false);
  }
  return out;
}

void write_coco_json(const CocoDataset& dataset, const fs::path& path) {
  write_text_file(path, to_coco_json(dataset).dump(2) + "\n");
}

namespace {

json parse_json_file(const fs::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::Parse,
                "invalid JSON in '" + path.string() + "': " + e.what());
  }
}

}  // namespace

CocoDataset read_coco_json(const fs::path& path) {
  return from_coco_json(parse_json_file(path));
}

json to_coco_results(std::span<const InstanceSet> predictions,
                     const CocoDataset& reference) {
  std::map<std::string, long long> numbers;
  for (std::size_t i = 0; i < reference.images.size(); ++i) {
    numbers[reference.images[i].image_id] = image_number(reference, i);
  }
  json out = json::array();
  for (const auto& set : predictions) {
    const auto it = numbers.find(set.image_id);
    if (it == numbers.end()) {
      throw Error(ErrorCode::InvalidInput,
                  "prediction image '" + set.image_id +
                      "' is not in the reference dataset");
    }
    for (const auto& inst : set.instances) {
      if (!inst.confidence) {
        throw Error(ErrorCode::InvalidInput,
                    "prediction " + std::to_string(inst.id) + " of '" +
                        set.image_id + "' has no confidence");
      }
      json ann = annotation_json(inst, set.image_id, 0, it->second,
                                 reference.categories);
      out.push_back({{"image_id", ann["image_id"]},
                     {"category_id", ann["category_id"]},
                     {"segmentation", ann["segmentation"]},
                     {"score", *inst.confidence}});
    }
  }
  return out;
}

std::vector<InstanceSet> from_coco_results(const json& doc,
                                           const CocoDataset& reference) {
  if (!doc.is_array()) schema_error("<root>", "results must be an array");
  std::vector<InstanceSet> out;
  for (const auto& img : reference.images) {
    out.push_back({img.image_id, img.width, img.height, {}});
  }
  const ImageIndex index = build_index(reference);
  for (std::size_t a = 0; a < doc.size(); ++a) {
    add_annotation(doc[a], "[" + std::to_string(a) + "]", out, index, true);
  }
  return out;
}

std::vector<InstanceSet> read_coco_results(const fs::path& path,
                                           const CocoDataset& reference) {
  return from_coco_results(parse_json_file(path), reference);
}

BinaryMask decode_coco_rle(const json& rle) {
  const json& size = require(rle, "size", "segmentation");
  if (!size.is_array() || size.size() != 2 || !size[0].is_number_integer() ||
      !size[1].is_number_integer()) {
    schema_error("segmentation.size", "expected [height, width]");
  }
  const int h = size[0].get<int>();
  const int w = size[1].get<int>();
  if (w < 1 || h < 1) schema_error("segmentation.size", "non-positive size");
  const json& counts_json = require(rle, "counts", "segmentation");

  std::vector<long long> counts;
  if (counts_json.is_array()) {
    for (const auto& c : counts_json) {
      if (!c.is_number_integer() || c.get<long long>() < 0) {
        schema_error("segmentation.counts", "expected non-negative integers");
      }
      counts.push_back(c.get<long long>());
    }
  } else if (counts_json.is_string()) {
    // LEB128-like string form of the run lengths, delta-coded after index 2.
    const std::string s = counts_json.get<std::string>();
    std::size_t p = 0;
    while (p < s.size()) {
      long long x = 0;
      int k = 0;
      bool more = true;
      while (more) {
        if (p >= s.size()) schema_error("segmentation.counts", "truncated RLE");
        const long long c = static_cast<long long>(s[p]) - 48;
        x |= (c & 0x1f) << (5 * k);
        more = (c & 0x20) != 0;
        ++p;
        ++k;
        if (!more && (c & 0x10)) x |= -1LL << (5 * k);
      }
      if (counts.size() > 2) x += counts[counts.size() - 2];
      counts.push_back(x);
    }
  } else {
    schema_error("segmentation.counts", "expected an array or string");
  }

  std::vector<std::uint8_t> dense(static_cast<std::size_t>(w) * h, 0);
  long long pos = 0;
  const long long total = static_cast<long long>(w) * h;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] < 0 || pos + counts[i] > total) {
      schema_error("segmentation.counts", "runs exceed the mask size");
    }
    if (i % 2 == 1) {
      for (long long k = pos; k < pos + counts[i]; ++k) {
        const long long x = k / h;  // column-major
        const long long y = k % h;
        dense[static_cast<std::size_t>(y * w + x)] = 1;
      }
    }
    pos += counts[i];
  }
  return BinaryMask::from_dense(w, h, dense);
}

// ---------------------------------------------------------------------------
// Mask rasters
// ---------------------------------------------------------------------------

void write_mask_png(const BinaryMask& mask, const fs::path& path,
                    int compression) {
  write_png(Raster(mask.width(), mask.height(), 1, mask.to_dense()), path,
            compression);
}

BinaryMask read_mask_png(const fs::path& path) {
  const PngInfo info = read_png_info(path);
  if (info.bit_depth != 8 || info.channels > 2) {
    throw Error(ErrorCode::Parse,
                "mask '" + path.string() +
                    "' must be an 8-bit single-channel PNG (got " +
                    std::to_string(info.channels) + " channels, " +
                    std::to_string(info.bit_depth) + "-bit)");
  }
  const Raster r = read_png(path);
  return BinaryMask::from_dense(r.width(), r.height(), r.data());
}

void write_instance_map(const InstanceSet& instances, const fs::path& path,
                        int compression) {
  Gray16 map{instances.width, instances.height,
             std::vector<std::uint16_t>(
                 static_cast<std::size_t>(instances.width) * instances.height, 0)};
  for (const auto& inst : instances.instances) {
    if (inst.id < 1 || inst.id > 65535) {
      throw Error(ErrorCode::Validation,
                  "instance id " + std::to_string(inst.id) +
                      " does not fit a 16-bit id map");
    }
    const Rect& r = inst.mask.roi();
    for (int y = r.y; y < r.bottom(); ++y) {
      const std::uint8_t* src = inst.mask.roi_row(y);
      for (int i = 0; i < r.width; ++i) {
        if (!src[i]) continue;
        auto& cell = map.data[static_cast<std::size_t>(y) * map.width + r.x + i];
        if (cell != 0) {
          throw Error(ErrorCode::Validation,
                      "instances " + std::to_string(cell) + " and " +
                          std::to_string(inst.id) + " of '" +
                          instances.image_id + "' overlap");
        }
        cell = static_cast<std::uint16_t>(inst.id);
      }
    }
  }
  write_png16(map, path, compression);
}

InstanceSet read_instance_map(const fs::path& path, std::string image_id) {
  const Gray16 map = read_png16(path);
  std::map<int, Rect> boxes;
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const int id = map.data[static_cast<std::size_t>(y) * map.width + x];
      if (id == 0) continue;
      auto [it, inserted] = boxes.try_emplace(id, Rect{x, y, 1, 1});
      if (!inserted) it->second = unite(it->second, Rect{x, y, 1, 1});
    }
  }
  InstanceSet set{std::move(image_id), map.width, map.height, {}};
  for (const auto& [id, box] : boxes) {
    InstanceAnnotation inst;
    inst.id = id;
    inst.mask = BinaryMask(map.width, map.height, box);
    for (int y = box.y; y < box.bottom(); ++y) {
      for (int x = box.x; x < box.right(); ++x) {
        if (map.data[static_cast<std::size_t>(y) * map.width + x] == id) {
          inst.mask.set(x, y, true);
        }
      }
    }
    set.instances.push_back(std::move(inst));
  }
  return set;
}

void write_glmask_png(const color::GLMaskImage& image, const fs::path& path,
                      int compression) {
  write_png(image.pixels, path, compression);
}

}  // namespace segkit::io
