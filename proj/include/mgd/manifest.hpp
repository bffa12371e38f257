#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgd/decode.hpp"
#include "mgd/encode.hpp"

namespace mgd {

/// One ground-truth box as stored on disk, in corner form. Kept unvalidated
/// so that bad records can be reported instead of aborting a whole file.
struct BoxRecord {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
  int class_id = 0;
  bool difficult = false;
};

/// Pixel rectangle (x, y, w, h) of a pasted patch in a synthesized image.
struct PatchRecord {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;
};

/// One manifest line.
///
///   {"image": "img/000.jpg", "width": 500, "height": 375,
///    "boxes": [[x_min, y_min, x_max, y_max, class_id], ...]}
///
/// Optional keys: "id" (defaults to "image"), "difficult" (one bool per
/// box), "patches" ([[x, y, w, h], ...], written by synthesis).
struct ManifestRecord {
  std::string id;
  std::string image;
  int width = 0;
  int height = 0;
  std::vector<BoxRecord> boxes;
  std::vector<PatchRecord> patches;
};

/// Problems with a record: non-positive image size, degenerate boxes,
/// boxes outside the image, negative class ids. Empty when valid.
std::vector<std::string> validate_record(const ManifestRecord& r, int num_classes = -1);

/// Converts boxes to annotations; throws ValidationError on degenerate boxes.
std::vector<Annotation> to_annotations(const ManifestRecord& r);

ManifestRecord parse_manifest_line(const std::string& line);
std::string format_manifest_line(const ManifestRecord& r);

/// Blank lines are skipped. Relative image paths are left as written.
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const ManifestRecord> records);

/// Pascal VOC annotation XML. `class_names` maps names to ids; objects with
/// unknown names are skipped.
ManifestRecord read_voc_xml(const std::filesystem::path& path,
                            std::span<const std::string> class_names);

/// Largest class id + 1 over all records (0 for an empty manifest).
int infer_num_classes(std::span<const ManifestRecord> records);

/// A detection tied to an image, as exchanged between decode and eval.
struct ImageDetection {
  std::string image_id;
  int class_id = 0;
  double score = 0.0;
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;
};

ImageDetection to_image_detection(const std::string& image_id, const Detection& d);

/// Detection dump: one tab-separated line per detection,
///   image_id  class_id  score  x_min  y_min  x_max  y_max
/// Lines starting with '#' are comments.
std::vector<ImageDetection> read_detections(const std::filesystem::path& path);
std::vector<ImageDetection> parse_detections(const std::string& text);
void write_detections(std::ostream& os, std::span<const ImageDetection> dets);
void write_detections(const std::filesystem::path& path, std::span<const ImageDetection> dets,
                      bool append = false);

}  // namespace mgd
