#include "mgd/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

#include "mgd/error.hpp"

namespace mgd {

ApProtocol parse_protocol(const std::string& name) {
  if (name == "voc11" || name == "VOC11point") return ApProtocol::kVoc11Point;
  if (name == "voc" || name == "vocall" || name == "VOCallpoint") return ApProtocol::kVocAllPoint;
  if (name == "coco" || name == "COCOavg") return ApProtocol::kCocoAverage;
  throw ValidationError("unknown AP protocol '" + name + "' (voc11, vocall, coco)");
}

std::string protocol_name(ApProtocol p) {
  switch (p) {
    case ApProtocol::kVoc11Point: return "VOC11point";
    case ApProtocol::kVocAllPoint: return "VOCallpoint";
    case ApProtocol::kCocoAverage: return "COCOavg";
  }
  return "?";
}

void EvalConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw ValidationError("IoU threshold must be in (0, 1]");
  }
  if (protocol == ApProtocol::kCocoAverage && coco_thresholds.empty()) {
    throw ValidationError("COCO averaging needs at least one IoU threshold");
  }
  for (double t : coco_thresholds) {
    if (!(t > 0.0 && t <= 1.0)) throw ValidationError("IoU thresholds must be in (0, 1]");
  }
}

AreaRange small_range() { return {0.0, std::nextafter(kSmallMaxArea, 0.0)}; }
AreaRange medium_range() { return {kSmallMaxArea, kMediumMaxArea}; }
AreaRange large_range() { return {std::nextafter(kMediumMaxArea, 1e300), 1e300}; }

MatchResult match_detections(std::span<const Detection> dets, std::span<const Annotation> gts,
                             double iou_thresh, const AreaRange& range) {
  MatchResult result;
  result.status.assign(dets.size(), MatchStatus::kFalsePositive);

  std::vector<bool> ignored(gts.size());
  std::vector<CornerBox> gt_corners;
  gt_corners.reserve(gts.size());
  for (std::size_t g = 0; g < gts.size(); ++g) {
    ignored[g] = gts[g].difficult || !range.contains(gts[g].box.area());
    if (!ignored[g]) ++result.gt_count[gts[g].class_id];
    gt_corners.push_back(to_corners(gts[g].box));
  }

  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });

  std::vector<bool> matched(gts.size(), false);
  for (std::size_t i : order) {
    const Detection& d = dets[i];
    const CornerBox dc = to_corners(d.box);
    double best = -1.0;
    std::size_t best_gt = gts.size();
    bool hits_ignored = false;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (gts[g].class_id != d.class_id) continue;
      const double v = iou(dc, gt_corners[g]);
      if (v < iou_thresh) continue;
      if (ignored[g]) {
        hits_ignored = true;
        continue;
      }
      if (matched[g]) continue;
      if (v > best) {
        best = v;
        best_gt = g;
      }
    }
    if (best_gt != gts.size()) {
      matched[best_gt] = true;
      result.status[i] = MatchStatus::kTruePositive;
    } else if (hits_ignored || !range.contains(d.box.area())) {
      result.status[i] = MatchStatus::kIgnored;
    }
  }
  return result;
}

std::optional<double> average_precision(std::span<const RankedMatch> matches, int num_gt,
                                        ApProtocol protocol) {
  if (num_gt <= 0) return std::nullopt;
  std::vector<std::size_t> order(matches.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return matches[a].score > matches[b].score; });

  std::vector<double> recall, precision;
  recall.reserve(order.size());
  precision.reserve(order.size());
  double tp = 0.0, fp = 0.0;
  for (std::size_t i : order) {
    if (matches[i].true_positive) tp += 1.0; else fp += 1.0;
    recall.push_back(tp / num_gt);
    precision.push_back(tp / (tp + fp));
  }

  switch (protocol) {
    case ApProtocol::kVoc11Point: {
      double sum = 0.0;
      for (int t = 0; t <= 10; ++t) {
        const double r = t / 10.0;
        double p = 0.0;
        for (std::size_t i = 0; i < recall.size(); ++i) {
          if (recall[i] >= r - 1e-12) p = std::max(p, precision[i]);
        }
        sum += p;
      }
      return sum / 11.0;
    }
    case ApProtocol::kVocAllPoint: {
      std::vector<double> mrec{0.0}, mpre{0.0};
      mrec.insert(mrec.end(), recall.begin(), recall.end());
      mpre.insert(mpre.end(), precision.begin(), precision.end());
      mrec.push_back(1.0);
      mpre.push_back(0.0);
      for (std::size_t i = mpre.size() - 1; i > 0; --i) mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
      double ap = 0.0;
      for (std::size_t i = 1; i < mrec.size(); ++i) ap += (mrec[i] - mrec[i - 1]) * mpre[i];
      return ap;
    }
    case ApProtocol::kCocoAverage: {
      std::vector<double> env = precision;
      for (std::size_t i = env.size(); i > 1; --i) env[i - 2] = std::max(env[i - 2], env[i - 1]);
      double sum = 0.0;
      for (int t = 0; t <= 100; ++t) {
        const double r = t / 100.0;
        const auto it = std::lower_bound(recall.begin(), recall.end(), r - 1e-12);
        if (it != recall.end()) sum += env[static_cast<std::size_t>(std::distance(recall.begin(), it))];
      }
      return sum / 101.0;
    }
  }
  return std::nullopt;
}

namespace {

struct Image {
  std::vector<Annotation> gts;
  std::vector<Detection> dets;
};

struct ClassMatches {
  int gt_count = 0;
  std::vector<RankedMatch> ranked;
};

std::map<int, ClassMatches> collect(const std::vector<Image>& images, double thr, const AreaRange& range) {
  std::map<int, ClassMatches> out;
  for (const auto& img : images) {
    const MatchResult m = match_detections(img.dets, img.gts, thr, range);
    for (const auto& [cls, n] : m.gt_count) out[cls].gt_count += n;
    for (std::size_t i = 0; i < img.dets.size(); ++i) {
      if (m.status[i] == MatchStatus::kIgnored) continue;
      out[img.dets[i].class_id].ranked.push_back(
          {img.dets[i].score, m.status[i] == MatchStatus::kTruePositive});
    }
  }
  return out;
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Per-class 101-point AP averaged over thresholds, then over classes with GT.
std::optional<double> coco_ap(const std::vector<Image>& images, std::span<const double> thresholds,
                              const AreaRange& range, std::map<int, double>* per_class = nullptr) {
  std::map<int, std::vector<double>> by_class;
  for (double thr : thresholds) {
    for (const auto& [cls, cm] : collect(images, thr, range)) {
      const auto ap = average_precision(cm.ranked, cm.gt_count, ApProtocol::kCocoAverage);
      if (ap) by_class[cls].push_back(*ap);
    }
  }
  std::vector<double> means;
  for (const auto& [cls, aps] : by_class) {
    const double m = *mean_of(aps);
    means.push_back(m);
    if (per_class != nullptr) (*per_class)[cls] = m;
  }
  return mean_of(means);
}

}  // namespace

EvalReport evaluate(std::span<const ImageDetection> dets, std::span<const ManifestRecord> gts,
                    const EvalConfig& cfg) {
  cfg.validate();
  EvalReport report;
  report.protocol = cfg.protocol;
  report.iou_threshold = cfg.iou_threshold;

  std::vector<Image> images(gts.size());
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    const ManifestRecord& r = gts[i];
    if (!index.emplace(r.id, i).second) {
      report.notes.push_back("duplicate ground-truth image id '" + r.id + "'; later record ignored");
      continue;
    }
    for (std::size_t b = 0; b < r.boxes.size(); ++b) {
      const BoxRecord& br = r.boxes[b];
      if (!(br.x_min < br.x_max) || !(br.y_min < br.y_max)) {
        report.notes.push_back("image '" + r.id + "': degenerate ground-truth box " + std::to_string(b) + " skipped");
        continue;
      }
      images[i].gts.push_back({from_corners(CornerBox(br.x_min, br.y_min, br.x_max, br.y_max)),
                               br.class_id, br.difficult});
    }
  }

  std::set<std::string> unknown;
  std::map<int, int> det_count;
  for (const auto& d : dets) {
    const auto it = index.find(d.image_id);
    if (it == index.end()) {
      unknown.insert(d.image_id);
      continue;
    }
    if (!(d.x_min < d.x_max) || !(d.y_min < d.y_max) || !std::isfinite(d.score)) {
      report.notes.push_back("image '" + d.image_id + "': degenerate detection skipped");
      continue;
    }
    images[it->second].dets.push_back(
        {from_corners(CornerBox(d.x_min, d.y_min, d.x_max, d.y_max)), d.class_id, d.score});
    ++det_count[d.class_id];
  }
  report.unknown_images.assign(unknown.begin(), unknown.end());

  std::set<int> classes;
  for (const auto& img : images) {
    for (const auto& g : img.gts) classes.insert(g.class_id);
  }
  for (const auto& [cls, n] : det_count) classes.insert(cls);

  const auto base = collect(images, cfg.iou_threshold, {});
  std::map<int, double> coco_per_class;
  if (cfg.protocol == ApProtocol::kCocoAverage) {
    CocoSummary s;
    s.ap = coco_ap(images, cfg.coco_thresholds, {}, &coco_per_class);
    const double t50 = 0.5, t75 = 0.75;
    s.ap50 = coco_ap(images, std::span<const double>(&t50, 1), {});
    s.ap75 = coco_ap(images, std::span<const double>(&t75, 1), {});
    s.ap_small = coco_ap(images, cfg.coco_thresholds, small_range());
    s.ap_medium = coco_ap(images, cfg.coco_thresholds, medium_range());
    s.ap_large = coco_ap(images, cfg.coco_thresholds, large_range());
    report.coco = s;
  }

  std::vector<double> defined;
  for (int cls : classes) {
    ClassAp c;
    c.class_id = cls;
    const auto it = base.find(cls);
    c.gt_count = it == base.end() ? 0 : it->second.gt_count;
    c.det_count = det_count.count(cls) ? det_count.at(cls) : 0;
    if (cfg.protocol == ApProtocol::kCocoAverage) {
      if (coco_per_class.count(cls)) c.ap = coco_per_class.at(cls);
    } else if (it != base.end()) {
      c.ap = average_precision(it->second.ranked, it->second.gt_count, cfg.protocol);
    }
    if (c.ap) {
      defined.push_back(*c.ap);
    } else {
      report.notes.push_back("class " + std::to_string(cls) + " has no ground truth; AP undefined, excluded from mAP");
    }
    report.classes.push_back(c);
  }
  if (cfg.protocol == ApProtocol::kCocoAverage) {
    report.map = report.coco->ap.value_or(0.0);
  } else {
    report.map = mean_of(defined).value_or(0.0);
  }
  return report;
}

EvalReport evaluate(const std::filesystem::path& predictions, const std::filesystem::path& manifest,
                    const EvalConfig& cfg) {
  const auto dets = read_detections(predictions);
  const auto gts = read_manifest(manifest);
  return evaluate(dets, gts, cfg);
}

namespace {

std::string pct(const std::optional<double>& v) {
  if (!v) return "   -  ";
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << std::setw(6) << (*v * 100.0);
  return os.str();
}

}  // namespace

std::string format_report(const EvalReport& r) {
  std::ostringstream os;
  os << "protocol: " << protocol_name(r.protocol);
  if (r.protocol != ApProtocol::kCocoAverage) os << " @ IoU " << r.iou_threshold;
  os << "\n\n";
  os << "class    GT   dets    AP\n";
  for (const auto& c : r.classes) {
    os << std::setw(5) << c.class_id << std::setw(6) << c.gt_count << std::setw(7) << c.det_count
       << "  " << pct(c.ap) << '\n';
  }
  os << "\nmAP " << pct(r.map) << '\n';
  if (r.coco) {
    const auto& s = *r.coco;
    os << "\n    AP   AP50   AP75    APS    APM    APL\n";
    os << pct(s.ap) << ' ' << pct(s.ap50) << ' ' << pct(s.ap75) << ' ' << pct(s.ap_small) << ' '
       << pct(s.ap_medium) << ' ' << pct(s.ap_large) << '\n';
  }
  if (!r.unknown_images.empty()) {
    os << "\nexcluded detections for unknown images:";
    for (const auto& id : r.unknown_images) os << ' ' << id;
    os << '\n';
  }
  for (const auto& n : r.notes) os << "note: " << n << '\n';
  return os.str();
}

std::string report_json(const EvalReport& r) {
  using nlohmann::json;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j;
  j["protocol"] = protocol_name(r.protocol);
  j["iou_threshold"] = r.iou_threshold;
  j["mAP"] = r.map;
  json classes = json::array();
  for (const auto& c : r.classes) {
    classes.push_back({{"class_id", c.class_id}, {"gt_count", c.gt_count}, {"det_count", c.det_count},
                       {"ap", opt(c.ap)}});
  }
  j["classes"] = std::move(classes);
  if (r.coco) {
    j["coco"] = {{"AP", opt(r.coco->ap)},        {"AP50", opt(r.coco->ap50)},
                 {"AP75", opt(r.coco->ap75)},    {"APS", opt(r.coco->ap_small)},
                 {"APM", opt(r.coco->ap_medium)}, {"APL", opt(r.coco->ap_large)}};
  }
  j["unknown_images"] = r.unknown_images;
  j["notes"] = r.notes;
  return j.dump(2);
}

}  // namespace mgd
