#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgd/decode.hpp"
#include "mgd/encode.hpp"
#include "mgd/manifest.hpp"

namespace mgd {

enum class ApProtocol {
  kVoc11Point,   ///< mean of interpolated precision at recall 0, 0.1, ..., 1
  kVocAllPoint,  ///< area under the monotone precision envelope
  kCocoAverage,  ///< 101-point AP averaged over IoU 0.50:0.05:0.95
};

ApProtocol parse_protocol(const std::string& name);
std::string protocol_name(ApProtocol p);

struct EvalConfig {
  double iou_threshold = 0.5;
  ApProtocol protocol = ApProtocol::kVoc11Point;
  std::vector<double> coco_thresholds = {0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};

  void validate() const;
};

/// GT box area ranges for size-bucketed AP, in px^2.
struct AreaRange {
  double lo = 0.0;
  double hi = 1e300;
  bool contains(double area) const { return area >= lo && area <= hi; }
};
inline constexpr double kSmallMaxArea = 32.0 * 32.0;
inline constexpr double kMediumMaxArea = 96.0 * 96.0;
AreaRange small_range();   ///< area < 32^2
AreaRange medium_range();  ///< 32^2 <= area <= 96^2
AreaRange large_range();   ///< area > 96^2

enum class MatchStatus { kTruePositive, kFalsePositive, kIgnored };

struct MatchResult {
  /// One entry per input detection, in input order.
  std::vector<MatchStatus> status;
  /// Non-ignored GT boxes per class.
  std::map<int, int> gt_count;
};

/// Greedy matching within one image. Detections are visited by descending
/// score; each claims the highest-IoU unmatched, non-ignored GT of its class
/// with IoU >= iou_thresh. A detection that instead overlaps an ignored GT
/// (difficult, or outside `range`) by the threshold is ignored, as is an
/// unmatched detection whose own area falls outside `range`.
MatchResult match_detections(std::span<const Detection> dets, std::span<const Annotation> gts,
                             double iou_thresh, const AreaRange& range = {});

/// A ranked detection outcome for AP.
struct RankedMatch {
  double score = 0.0;
  bool true_positive = false;
};

/// AP from ranked outcomes (sorted here by descending score, ties keep
/// input order). nullopt when num_gt is 0. kCocoAverage means the 101-point
/// interpolation at a single threshold.
std::optional<double> average_precision(std::span<const RankedMatch> matches, int num_gt,
                                        ApProtocol protocol);

struct ClassAp {
  int class_id = 0;
  int gt_count = 0;
  int det_count = 0;
  std::optional<double> ap;
};

struct CocoSummary {
  std::optional<double> ap, ap50, ap75, ap_small, ap_medium, ap_large;
};

struct EvalReport {
  ApProtocol protocol = ApProtocol::kVoc11Point;
  double iou_threshold = 0.5;
  std::vector<ClassAp> classes;
  double map = 0.0;
  std::optional<CocoSummary> coco;
  /// Detection image ids missing from the ground truth (excluded).
  std::vector<std::string> unknown_images;
  std::vector<std::string> notes;
};

EvalReport evaluate(std::span<const ImageDetection> dets, std::span<const ManifestRecord> gts,
                    const EvalConfig& cfg = {});
EvalReport evaluate(const std::filesystem::path& predictions, const std::filesystem::path& manifest,
                    const EvalConfig& cfg = {});

std::string format_report(const EvalReport& r);
std::string report_json(const EvalReport& r);

}  // namespace mgd
