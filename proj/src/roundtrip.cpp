#include "mgd/roundtrip.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include "mgd/decode.hpp"
#include "mgd/encode.hpp"
#include "mgd/error.hpp"

namespace mgd {

void RoundTripConfig::validate() const {
  if (input_size < 0 || input_size % 32 != 0) {
    throw ValidationError("input size must be 0 or a positive multiple of 32");
  }
  if (anchors.empty() || anchors.size() % 3 != 0) {
    throw ValidationError("round-trip check needs three anchors per scale");
  }
  for (const auto& a : anchors) a.validate();
  validate_beta(beta);
  if (!(tolerance > 0.0)) throw ValidationError("tolerance must be > 0");
}

RoundTripReport roundtrip_check(std::span<const ManifestRecord> records, const RoundTripConfig& cfg,
                                std::vector<std::vector<RawPrediction>>* raws) {
  cfg.validate();
  RoundTripReport report;
  report.records = records.size();
  const int num_classes = cfg.num_classes > 0 ? cfg.num_classes : std::max(1, infer_num_classes(records));
  const std::size_t k = cfg.anchors.size() / 3;
  DecodeConfig dcfg;
  dcfg.beta = cfg.beta;
  dcfg.conf_thresh = 0.5;

  for (const ManifestRecord& rec : records) {
    auto problems = validate_record(rec, num_classes);
    const int canvas_w = cfg.input_size > 0 ? cfg.input_size : rec.width;
    const int canvas_h = cfg.input_size > 0 ? cfg.input_size : rec.height;
    if (problems.empty() && (canvas_w % 32 != 0 || canvas_h % 32 != 0)) {
      problems.push_back("image size is not a multiple of 32 (use a letterbox input size)");
    }
    if (!problems.empty()) {
      std::ostringstream os;
      for (std::size_t i = 0; i < problems.size(); ++i) os << (i ? "; " : "") << problems[i];
      report.invalid_records.push_back({rec.id, os.str()});
      continue;
    }
    ++report.checked_records;

    const Letterbox lb = Letterbox::fit(rec.width, rec.height, canvas_w, canvas_h);
    std::vector<Annotation> anns = to_annotations(rec);
    std::vector<Box> source_boxes;
    for (auto& a : anns) {
      source_boxes.push_back(a.box);
      a.box = lb.apply(a.box);
    }
    std::vector<GridSpec> grids;
    for (std::size_t s = 0; s < cfg.anchors.size() / k; ++s) {
      grids.push_back(GridSpec::for_image(canvas_w, canvas_h, 8 << s));
    }
    const EncodeResult enc = encode_ground_truth(anns, grids, cfg.anchors, num_classes);
    for (const auto& w : enc.warnings) {
      report.warnings.push_back({rec.id, "box " + std::to_string(w.annotation) + ": " + w.message});
    }

    std::vector<RawPrediction> scale_raws;
    std::vector<std::size_t> cells(anns.size(), 0);
    std::vector<double> errors(anns.size(), 0.0);
    for (std::size_t s = 0; s < enc.scales.size(); ++s) {
      const ScaleEncoding& se = enc.scales[s];
      RawPrediction raw = perfect_raw_from_target(se.target, cfg.beta);
      const auto dets = decode_predictions(raw, std::span(cfg.anchors).subspan(s * k, k), dcfg, static_cast<int>(s));
      for (const Detection& d : dets) {
        const int owner = se.owner[static_cast<std::size_t>(d.cy * se.target.grid().cells_x + d.cx)];
        if (owner == kNoOwner) {
          report.failures.push_back({rec.id, "detection from an unowned cell"});
          continue;
        }
        const std::size_t o = static_cast<std::size_t>(owner);
        double x0 = source_boxes[o].corners().x_min(), y0 = source_boxes[o].corners().y_min();
        double x1 = source_boxes[o].corners().x_max(), y1 = source_boxes[o].corners().y_max();
        clip_to_image(x0, y0, x1, y1, rec.width, rec.height);
        const Box expected = from_corners(CornerBox(x0, y0, x1, y1));
        const Box got = lb.invert(d.box);
        const double err = std::max({std::abs(got.x() - expected.x()), std::abs(got.y() - expected.y()),
                                     std::abs(got.w() - expected.w()), std::abs(got.h() - expected.h())});
        errors[o] = std::max(errors[o], err);
        ++cells[o];
      }
      if (raws != nullptr) scale_raws.push_back(std::move(raw));
    }
    for (std::size_t i = 0; i < anns.size(); ++i) {
      ++report.objects;
      ++report.cell_histogram[std::min<std::size_t>(cells[i], 9)];
      report.max_error = std::max(report.max_error, errors[i]);
      if (errors[i] > cfg.tolerance) {
        std::ostringstream os;
        os << "box " << i << ": error " << errors[i] << " px";
        report.failures.push_back({rec.id, os.str()});
      }
    }
    if (raws != nullptr) raws->push_back(std::move(scale_raws));
  }
  return report;
}

std::string format_roundtrip_report(const RoundTripReport& r) {
  std::ostringstream os;
  os << "records: " << r.records << " (" << r.checked_records << " checked, " << r.invalid_records.size()
     << " invalid)\n";
  os << "objects: " << r.objects << "\n";
  os << "max error: " << r.max_error << " px\n";
  os << "cells per object:";
  for (std::size_t c = 0; c < r.cell_histogram.size(); ++c) os << ' ' << c << ':' << r.cell_histogram[c];
  os << '\n';
  for (const auto& i : r.invalid_records) os << "invalid " << i.record << ": " << i.message << '\n';
  for (const auto& w : r.warnings) os << "warning " << w.record << ": " << w.message << '\n';
  for (const auto& f : r.failures) os << "FAIL " << f.record << ": " << f.message << '\n';
  os << (r.passed() ? "round trip OK" : "round trip FAILED") << '\n';
  return os.str();
}

}  // namespace mgd
