#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "segkit/augmentation.hpp"
#include "segkit/cli.hpp"
#include "segkit/colorspace.hpp"
#include "segkit/contour.hpp"
#include "segkit/error.hpp"
#include "segkit/eval.hpp"
#include "segkit/labels_io.hpp"
#include "segkit/manifest.hpp"
#include "segkit/png_io.hpp"
#include "segkit/pseudo.hpp"

namespace py = pybind11;
using namespace segkit;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

// (H, W) or (H, W, C) uint8 array to Raster.
Raster to_raster(const U8Array& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw py::value_error("expected an (H, W) or (H, W, C) array");
  const int h = static_cast<int>(a.shape(0)), w = static_cast<int>(a.shape(1));
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(2)) : 1;
  return Raster(w, h, c, std::vector<std::uint8_t>(a.data(), a.data() + a.size()));
}

py::array_t<std::uint8_t> from_raster(const Raster& r) {
  std::vector<py::ssize_t> shape = {r.height(), r.width()};
  if (r.channels() > 1) shape.push_back(r.channels());
  py::array_t<std::uint8_t> out(shape);
  std::copy(r.data().begin(), r.data().end(), out.mutable_data());
  return out;
}

BinaryMask to_mask(const U8Array& a) {
  if (a.ndim() != 2) throw py::value_error("masks must be 2-D");
  return BinaryMask::from_dense(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)),
                                std::span(a.data(), static_cast<std::size_t>(a.size())));
}

py::array_t<bool> from_mask(const BinaryMask& m) {
  py::array_t<bool> out({m.height(), m.width()});
  const auto dense = m.to_dense();
  bool* dst = out.mutable_data();
  for (std::size_t i = 0; i < dense.size(); ++i) dst[i] = dense[i] != 0;
  return out;
}

// Instance set from parallel lists; ids run 1.. in list order.
InstanceSet to_instances(const std::string& id, int width, int height, const py::list& masks,
                         const std::optional<std::vector<int>>& classes,
                         const std::optional<std::vector<double>>& scores) {
  InstanceSet s{id, width, height, {}};
  const std::size_t n = masks.size();
  if (classes && classes->size() != n) throw py::value_error("classes and masks differ in length");
  if (scores && scores->size() != n) throw py::value_error("scores and masks differ in length");
  for (std::size_t i = 0; i < n; ++i) {
    BinaryMask m = to_mask(masks[i].cast<U8Array>());
    if (m.width() != width || m.height() != height) {
      throw py::value_error("mask " + std::to_string(i) + " does not match the image size");
    }
    std::optional<double> conf;
    if (scores) conf = (*scores)[i];
    s.instances.push_back({static_cast<int>(i) + 1, classes ? (*classes)[i] : 0, std::move(m), conf});
  }
  return s;
}

// Dataset entry: {"image_id", "masks", optional "classes", optional "scores"}.
InstanceSet entry_to_instances(const py::dict& d, int width, int height) {
  const auto id = d["image_id"].cast<std::string>();
  const py::list masks = d["masks"];
  int w = width, h = height;
  if (!masks.empty()) {
    const auto first = masks[0].cast<U8Array>();
    h = static_cast<int>(first.shape(0));
    w = static_cast<int>(first.shape(1));
  }
  if (d.contains("width")) w = d["width"].cast<int>();
  if (d.contains("height")) h = d["height"].cast<int>();
  std::optional<std::vector<int>> classes;
  std::optional<std::vector<double>> scores;
  if (d.contains("classes")) classes = d["classes"].cast<std::vector<int>>();
  if (d.contains("scores")) scores = d["scores"].cast<std::vector<double>>();
  return to_instances(id, w, h, masks, classes, scores);
}

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_segkit, m) {
  m.doc() = "Instance-segmentation dataset synthesis, conversion and scoring";
  m.attr("__version__") = cli::kVersion;
  m.attr("MANIFEST_FORMAT_VERSION") = io::kManifestFormatVersion;

  static py::exception<Error> segkit_error(m, "SegkitError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string msg = std::string(to_string(e.code())) + ": " + e.what();
      PyErr_SetString(segkit_error.ptr(), msg.c_str());
    }
  });

  m.def("read_png", [](const std::filesystem::path& p) { return from_raster(io::read_png(p)); },
        py::arg("path"), "Read an 8-bit gray or RGB PNG as an (H, W[, 3]) uint8 array.");
  m.def("write_png",
        [](const U8Array& a, const std::filesystem::path& p, int compression) {
          io::write_png(to_raster(a), p, compression);
        },
        py::arg("image"), py::arg("path"), py::arg("compression") = io::kDefaultPngCompression);

  m.def("grayscale", [](const U8Array& rgb) { return from_raster(color::to_grayscale(to_raster(rgb))); },
        py::arg("rgb"));
  m.def("lab_lightness", [](const U8Array& rgb) { return from_raster(color::to_lab_l(to_raster(rgb))); },
        py::arg("rgb"), "CIELAB L* scaled to 0..255.");
  m.def("glmask",
        [](const U8Array& rgb, const U8Array& mask) {
          return from_raster(color::assemble_glmask(to_raster(rgb), to_mask(mask)).pixels);
        },
        py::arg("rgb"), py::arg("mask"), "Stack grayscale, L* and the binary mask (0/255).");

  m.def("mask_to_polygon",
        [](const U8Array& mask) -> py::object {
          const auto poly = mask_to_polygon(to_mask(mask));
          if (!poly) return py::none();
          py::array_t<double> out({static_cast<py::ssize_t>(poly->size()), py::ssize_t{2}});
          auto v = out.mutable_unchecked<2>();
          for (std::size_t i = 0; i < poly->size(); ++i) {
            v(i, 0) = (*poly)[i].x;
            v(i, 1) = (*poly)[i].y;
          }
          return out;
        },
        py::arg("mask"), "Single polygon through pixel centers that rasterizes back to the mask.");
  m.def("polygon_to_mask",
        [](const py::array_t<double, py::array::c_style | py::array::forcecast>& pts, int width,
           int height) {
          if (pts.ndim() != 2 || pts.shape(1) != 2) throw py::value_error("points must be (N, 2)");
          Polygon poly;
          for (py::ssize_t i = 0; i < pts.shape(0); ++i) poly.push_back({pts.at(i, 0), pts.at(i, 1)});
          return from_mask(contours_to_mask(std::span(&poly, 1), width, height));
        },
        py::arg("points"), py::arg("width"), py::arg("height"));
  m.def("mask_iou", [](const U8Array& a, const U8Array& b) { return mask_iou(to_mask(a), to_mask(b)); },
        py::arg("a"), py::arg("b"));

  m.def("format_yolo",
        [](const py::list& masks, int width, int height, std::optional<std::vector<int>> classes,
           std::optional<std::vector<double>> scores) {
          return io::format_yolo_seg(to_instances("", width, height, masks, classes, scores));
        },
        py::arg("masks"), py::arg("width"), py::arg("height"), py::arg("classes") = py::none(),
        py::arg("scores") = py::none(), "YOLO-seg label text for a list of masks.");
  m.def("parse_yolo",
        [](const std::string& text, int width, int height) {
          const auto set = io::records_to_instances(io::parse_yolo_seg(text), std::string{}, width, height);
          py::list out;
          for (const auto& a : set.instances) {
            py::dict d;
            d["class"] = a.class_id;
            d["score"] = a.confidence ? py::cast(*a.confidence) : py::none();
            d["mask"] = from_mask(a.mask);
            out.append(d);
          }
          return out;
        },
        py::arg("text"), py::arg("width"), py::arg("height"));

  m.def("rotate_pair",
        [](const U8Array& image, const py::list& masks, int degrees, double min_fraction,
           std::int64_t min_pixels) {
          const Raster img = to_raster(image);
          const auto set = to_instances("", img.width(), img.height(), masks, std::nullopt, std::nullopt);
          const auto [ri, rs] = aug::rotate_pair(img, set, degrees, {min_fraction, min_pixels});
          py::list kept, out_masks;
          for (const auto& a : rs.instances) {
            kept.append(a.id - 1);
            out_masks.append(from_mask(a.mask));
          }
          return py::make_tuple(from_raster(ri), kept, out_masks);
        },
        py::arg("image"), py::arg("masks"), py::arg("degrees"), py::arg("min_fraction") = 0.2,
        py::arg("min_pixels") = 16,
        "Rotate clockwise about the center. Returns (image, kept indices, masks).");

  m.def("evaluate",
        [](const py::list& predictions, const py::list& ground_truths, const std::string& preset,
           std::optional<double> conf, std::optional<double> iou,
           std::optional<std::map<std::string, std::string>> domains, int jobs) {
          eval::EvalOptions opt;
          if (preset == "wheat") {
            opt = eval::EvalOptions::wheat();
          } else if (preset == "coco") {
            opt = eval::EvalOptions::coco();
          } else {
            throw py::value_error("preset must be 'wheat' or 'coco'");
          }
          if (conf) opt.conf_threshold = *conf;
          if (iou) opt.iou_threshold = *iou;
          opt.jobs = jobs;
          opt.validate();
          std::vector<InstanceSet> gts, preds;
          std::map<std::string, std::pair<int, int>> sizes;
          for (const auto& g : ground_truths) {
            gts.push_back(entry_to_instances(g.cast<py::dict>(), 0, 0));
            sizes[gts.back().image_id] = {gts.back().width, gts.back().height};
          }
          for (const auto& p : predictions) {
            const auto d = p.cast<py::dict>();
            const auto it = sizes.find(d["image_id"].cast<std::string>());
            const auto [w, h] = it == sizes.end() ? std::pair{0, 0} : it->second;
            preds.push_back(entry_to_instances(d, w, h));
          }
          return json_to_py(eval::to_json(eval::evaluate(preds, gts, domains.value_or(std::map<std::string, std::string>{}), opt)));
        },
        py::arg("predictions"), py::arg("ground_truths"), py::arg("preset") = "wheat",
        py::arg("conf") = py::none(), py::arg("iou") = py::none(), py::arg("domains") = py::none(),
        py::arg("jobs") = 1,
        "Score predictions. Entries are dicts with image_id, masks and, for predictions, scores.");

  m.def("filter_predictions",
        [](const py::list& masks, const std::vector<double>& scores, double conf, std::int64_t min_area) {
          if (masks.empty()) return std::vector<int>{};
          const auto first = masks[0].cast<U8Array>();
          const auto set = to_instances("", static_cast<int>(first.shape(1)), static_cast<int>(first.shape(0)),
                                        masks, std::nullopt, scores);
          pseudo::PseudoLabelConfig cfg;
          cfg.confidence_threshold = conf;
          cfg.min_instance_area = min_area;
          cfg.validate();
          std::vector<int> kept;
          for (const auto& a : pseudo::filter_predictions(set, cfg).instances) kept.push_back(a.id - 1);
          return kept;
        },
        py::arg("masks"), py::arg("scores"), py::arg("conf") = 0.25, py::arg("min_area") = 16,
        "Indices of the predictions kept as pseudo-labels.");

  m.def("run_cli",
        [](std::vector<std::string> args) {
          args.insert(args.begin(), "segkit");
          std::ostringstream out, err;
          int code;
          {
            py::gil_scoped_release release;
            code = cli::run_cli(args, out, err);
          }
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run a segkit command line. Returns (exit code, stdout, stderr).");
}
