#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <string>
#include <vector>

#include "mgd/anchors.hpp"
#include "mgd/decode.hpp"
#include "mgd/encode.hpp"
#include "mgd/error.hpp"
#include "mgd/eval.hpp"
#include "mgd/gradcheck.hpp"
#include "mgd/loss.hpp"
#include "mgd/manifest.hpp"
#include "mgd/roundtrip.hpp"

namespace py = pybind11;
using namespace mgd;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

std::vector<Anchor> to_anchors(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 2) throw ValidationError("anchors must have shape (k, 2)");
  std::vector<Anchor> out;
  const auto r = a.unchecked<2>();
  for (py::ssize_t i = 0; i < r.shape(0); ++i) out.push_back({r(i, 0), r(i, 1)});
  return out;
}

Array from_anchors(const std::vector<Anchor>& anchors) {
  Array out({static_cast<py::ssize_t>(anchors.size()), py::ssize_t{2}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    w(i, 0) = anchors[i].w;
    w(i, 1) = anchors[i].h;
  }
  return out;
}

Array to_array(const HeadTensor& t) {
  const GridSpec& g = t.grid();
  Array out({g.cells_y, g.cells_x, t.layout().channels()});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

template <typename T>
T to_tensor(const Array& a, int cell, int num_anchors) {
  if (a.ndim() != 3) throw ValidationError("head tensors must have shape (cells_y, cells_x, channels)");
  HeadLayout layout;
  layout.grid = GridSpec{cell, cell, static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0))};
  layout.num_anchors = num_anchors;
  layout.num_classes = static_cast<int>(a.shape(2)) - 5 - num_anchors;
  layout.validate();
  T t(layout);
  std::copy(a.data(), a.data() + a.size(), t.values().begin());
  return t;
}

// Rows of (x_min, y_min, x_max, y_max, score, class).
Array detections_array(const std::vector<Detection>& dets) {
  Array out({static_cast<py::ssize_t>(dets.size()), py::ssize_t{6}});
  auto w = out.mutable_unchecked<2>();
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const CornerBox c = to_corners(dets[i].box);
    w(i, 0) = c.x_min();
    w(i, 1) = c.y_min();
    w(i, 2) = c.x_max();
    w(i, 3) = c.y_max();
    w(i, 4) = dets[i].score;
    w(i, 5) = dets[i].class_id;
  }
  return out;
}

std::vector<Detection> detections_from(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 6) throw ValidationError("detections must have shape (n, 6)");
  const auto r = a.unchecked<2>();
  std::vector<Detection> out;
  for (py::ssize_t i = 0; i < r.shape(0); ++i) {
    Detection d{from_corners(CornerBox(r(i, 0), r(i, 1), r(i, 2), r(i, 3))), static_cast<int>(r(i, 5)), r(i, 4)};
    out.push_back(d);
  }
  return out;
}

std::vector<Annotation> annotations_from(const Array& a) {
  if (a.ndim() != 2 || a.shape(1) != 5) throw ValidationError("boxes must have shape (n, 5): x0, y0, x1, y1, class");
  const auto r = a.unchecked<2>();
  std::vector<Annotation> out;
  for (py::ssize_t i = 0; i < r.shape(0); ++i) {
    out.push_back({from_corners(CornerBox(r(i, 0), r(i, 1), r(i, 2), r(i, 3))), static_cast<int>(r(i, 4)), false});
  }
  return out;
}

py::list encode(const Array& boxes, int image_w, int image_h, const Array& anchors, int num_classes) {
  const auto anns = annotations_from(boxes);
  const auto anc = to_anchors(anchors);
  const auto grids = default_grids(image_w, image_h);
  const auto enc = encode_ground_truth(anns, grids, anc, num_classes);
  py::list out;
  for (const auto& s : enc.scales) out.append(to_array(s.target));
  return out;
}

std::vector<RawPrediction> raws_from(const py::list& raws, int k) {
  std::vector<RawPrediction> out;
  for (std::size_t s = 0; s < raws.size(); ++s) {
    out.push_back(to_tensor<RawPrediction>(raws[s].cast<Array>(), 8 << s, k));
  }
  return out;
}

py::list perfect_raw(const py::list& targets, int num_anchors_per_scale, double beta) {
  py::list out;
  for (std::size_t s = 0; s < targets.size(); ++s) {
    const auto t = to_tensor<TargetTensor>(targets[s].cast<Array>(), 8 << s, num_anchors_per_scale);
    out.append(to_array(perfect_raw_from_target(t, beta)));
  }
  return out;
}

Array decode(const py::list& raws, const Array& anchors, double beta, double conf) {
  const auto anc = to_anchors(anchors);
  if (raws.size() == 0 || anc.size() % raws.size() != 0) {
    throw ValidationError("anchors must split evenly across the scales");
  }
  const auto tensors = raws_from(raws, static_cast<int>(anc.size() / raws.size()));
  return detections_array(decode_all(tensors, anc, DecodeConfig{beta, conf}));
}

py::dict loss(const Array& raw, const Array& target, const Array& anchors, int cell, double lambda, double beta) {
  const auto anc = to_anchors(anchors);
  const int k = static_cast<int>(anc.size());
  const auto r = to_tensor<RawPrediction>(raw, cell, k);
  const auto t = to_tensor<TargetTensor>(target, cell, k);
  LossConfig cfg;
  cfg.lambda = lambda;
  cfg.beta = beta;
  const auto lg = total_loss_and_grad(r, t, anc, cfg);
  py::dict out;
  out["total"] = lg.loss.total;
  out["class"] = lg.loss.class_loss;
  out["anchor"] = lg.loss.anchor_loss;
  out["coord"] = lg.loss.coord_loss;
  out["objectness"] = lg.loss.obj_loss;
  out["grad"] = to_array(lg.grad);
  return out;
}

py::tuple kmeans(const Array& sizes, int k, std::uint64_t seed, int restarts, const std::string& centroid) {
  if (sizes.ndim() != 2 || sizes.shape(1) != 2) throw ValidationError("sizes must have shape (n, 2)");
  const auto r = sizes.unchecked<2>();
  std::vector<BoxSize> boxes;
  for (py::ssize_t i = 0; i < r.shape(0); ++i) boxes.push_back({r(i, 0), r(i, 1)});
  ClusterConfig cfg;
  cfg.k = k;
  cfg.seed = seed;
  cfg.restarts = restarts;
  if (centroid == "mean") cfg.centroid = CentroidRule::kMean;
  else if (centroid != "median") throw ValidationError("centroid must be 'median' or 'mean'");
  const auto res = kmeans_iou(boxes, cfg);
  return py::make_tuple(from_anchors(res.anchors), res.mean_iou);
}

py::dict evaluate_files(const std::string& detections, const std::string& manifest, const std::string& protocol,
                        double iou) {
  EvalConfig cfg;
  cfg.protocol = parse_protocol(protocol);
  cfg.iou_threshold = iou;
  const auto rep = evaluate(std::filesystem::path(detections), std::filesystem::path(manifest), cfg);
  py::dict ap;
  for (const auto& c : rep.classes) ap[py::int_(c.class_id)] = c.ap ? py::cast(*c.ap) : py::none();
  py::dict out;
  out["mAP"] = rep.map;
  out["ap"] = ap;
  out["protocol"] = protocol_name(rep.protocol);
  return out;
}

py::dict roundtrip(const std::string& manifest, int input_size, double tolerance) {
  RoundTripConfig cfg;
  cfg.anchors = default_anchors();
  cfg.input_size = input_size;
  cfg.tolerance = tolerance;
  const auto rep = roundtrip_check(read_manifest(manifest), cfg);
  py::dict out;
  out["records"] = rep.records;
  out["checked_records"] = rep.checked_records;
  out["objects"] = rep.objects;
  out["max_error"] = rep.max_error;
  out["cell_histogram"] = std::vector<std::size_t>(rep.cell_histogram.begin(), rep.cell_histogram.end());
  out["invalid_records"] = rep.invalid_records.size();
  out["failures"] = rep.failures.size();
  out["passed"] = rep.passed();
  return out;
}

py::dict gradient_check(int instances, double step, double tolerance, std::uint64_t seed) {
  GradCheckConfig cfg;
  cfg.instances = instances;
  cfg.step = step;
  cfg.tolerance = tolerance;
  cfg.seed = seed;
  const auto rep = run_gradient_check(cfg);
  py::dict out;
  out["instances"] = rep.instances;
  out["values"] = rep.values;
  out["max_rel_error"] = rep.max_rel_error;
  out["passed"] = rep.passed;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Multi-grid detector target encoding, decoding, loss and evaluation";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.attr("DEFAULT_BETA") = kDefaultBeta;
  m.def("coord_activation", py::vectorize([](double z, double beta) { return coord_activation(z, beta); }),
        py::arg("z"), py::arg("beta") = kDefaultBeta);
  m.def("inverse_coord_activation",
        py::vectorize([](double t, double beta) { return inverse_coord_activation(t, beta); }), py::arg("t"),
        py::arg("beta") = kDefaultBeta);
  m.def(
      "iou",
      [](std::array<double, 4> a, std::array<double, 4> b) {
        return iou(CornerBox(a[0], a[1], a[2], a[3]), CornerBox(b[0], b[1], b[2], b[3]));
      },
      py::arg("a"), py::arg("b"), "IoU of two (x_min, y_min, x_max, y_max) boxes");
  m.def(
      "multi_grid_cells",
      [](std::array<double, 4> box, int cell, int cells_x, int cells_y) {
        const GridSpec g{cell, cell, cells_x, cells_y};
        g.validate();
        std::vector<py::tuple> out;
        for (const auto& c :
             multi_grid_cells(from_corners(CornerBox(box[0], box[1], box[2], box[3])), g)) {
          out.push_back(py::make_tuple(c.cx, c.cy, c.tx, c.ty));
        }
        return out;
      },
      py::arg("box"), py::arg("cell"), py::arg("cells_x"), py::arg("cells_y"),
      "Responsible cells (cx, cy, tx', ty') for an (x_min, y_min, x_max, y_max) box");
  m.def("default_anchors", [] { return from_anchors(default_anchors()); });
  m.def("encode", &encode, py::arg("boxes"), py::arg("image_w"), py::arg("image_h"), py::arg("anchors"),
        py::arg("num_classes"), "Target tensors, one per scale (strides 8, 16, 32)");
  m.def("perfect_raw", &perfect_raw, py::arg("targets"), py::arg("num_anchors_per_scale") = 3,
        py::arg("beta") = kDefaultBeta, "Raw tensors that decode exactly to the targets");
  m.def("decode", &decode, py::arg("raws"), py::arg("anchors"), py::arg("beta") = kDefaultBeta,
        py::arg("conf") = kDefaultConfThresh, "Detections as rows (x_min, y_min, x_max, y_max, score, class)");
  m.def(
      "nms", [](const Array& dets, double thresh) { return detections_array(nms(detections_from(dets), thresh)); },
      py::arg("detections"), py::arg("iou_thresh") = kDefaultNmsThresh);
  m.def("loss", &loss, py::arg("raw"), py::arg("target"), py::arg("anchors"), py::arg("cell") = 32,
        py::arg("lam") = 1.0, py::arg("beta") = kDefaultBeta, "Loss terms and the gradient for one scale");
  m.def("kmeans", &kmeans, py::arg("sizes"), py::arg("k"), py::arg("seed") = 0, py::arg("restarts") = 10,
        py::arg("centroid") = "median", "IoU k-means anchors and their mean best IoU");
  m.def("evaluate", &evaluate_files, py::arg("detections"), py::arg("manifest"), py::arg("protocol") = "voc11",
        py::arg("iou") = 0.5);
  m.def("roundtrip_check", &roundtrip, py::arg("manifest"), py::arg("input_size") = 416,
        py::arg("tolerance") = 1e-4);
  m.def("gradient_check", &gradient_check, py::arg("instances") = 100, py::arg("step") = 1e-5,
        py::arg("tolerance") = 1e-5, py::arg("seed") = 0);
}
