#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mgd/geometry.hpp"

namespace mgd {

/// Prototype box size used as the reference for log size ratios.
struct Anchor {
  double w = 0.0;
  double h = 0.0;

  double area() const { return w * h; }
  void validate() const;

  friend bool operator==(const Anchor&, const Anchor&) = default;
};

/// A (width, height) sample fed to clustering.
struct BoxSize {
  double w = 0.0;
  double h = 0.0;
  friend auto operator<=>(const BoxSize&, const BoxSize&) = default;
};

enum class CentroidRule { kMedian, kMean };

struct ClusterConfig {
  int k = 9;
  std::uint64_t seed = 0;
  int max_iters = 300;
  /// Stop once the mean best-IoU improves by less than this.
  double tol = 1e-4;
  /// Independent seedings; the best mean IoU wins.
  int restarts = 10;
  CentroidRule centroid = CentroidRule::kMedian;
  /// After the iterations, single-box moves between clusters are tried while
  /// they raise the mean IoU. Quadratic in the box count, so only inputs of
  /// at most this many boxes are polished.
  std::size_t polish_max_boxes = 256;
  /// Random three-box perturbations tried per restart after polishing.
  int kicks = 20;

  void validate() const;
};

struct ClusterResult {
  /// Ascending by area.
  std::vector<Anchor> anchors;
  double mean_iou = 0.0;
  int iterations = 0;
  bool converged = false;
  /// Mean best-IoU after every accepted update of the winning run.
  std::vector<double> history;
};

/// The nine anchors commonly shipped with 416x416 three-scale detectors.
std::vector<Anchor> default_anchors();

/// K-means over box sizes with 1 - IoU as the distance.
///
/// Seeding is k-means++ over the canonically sorted input, so the result
/// depends only on the multiset of sizes and the seed. Every reported state
/// has centroids equal to the per-cluster median (or mean) of a partition
/// into k non-empty clusters; an update that would lower the mean IoU is
/// rejected and ends the run. Small inputs are then refined by local search
/// over partitions (single and pair moves, random kicks), accepting only
/// strict gains. Throws ValidationError when there are fewer
/// than k distinct sizes.
ClusterResult kmeans_iou(std::span<const BoxSize> boxes, const ClusterConfig& cfg);

/// Mean over boxes of the best IoU against any anchor.
double mean_best_iou(std::span<const BoxSize> boxes, std::span<const Anchor> anchors);

/// Index of the anchor with the highest IoU against the box size (both
/// centered at the origin); ties go to the lowest index.
std::size_t assign_best_anchor(double w, double h, std::span<const Anchor> anchors);
std::size_t assign_best_anchor(const Box& box, std::span<const Anchor> anchors);

/// Anchors file: "w,h" pairs separated by ", " on one line, ascending area.
void write_anchors(const std::filesystem::path& path, std::span<const Anchor> anchors);
std::vector<Anchor> read_anchors(const std::filesystem::path& path);
std::vector<Anchor> parse_anchors(const std::string& text);
std::string format_anchors(std::span<const Anchor> anchors);

}  // namespace mgd
