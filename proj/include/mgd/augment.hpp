#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "mgd/manifest.hpp"

namespace mgd {

/// Per-object augmentations, combinable as bit flags.
enum ObjectAug : unsigned {
  kAugNone = 0,
  kAugFlip = 1u << 0,        ///< horizontal mirror
  kAugBrightness = 1u << 1,  ///< scale intensities by [0.75, 1.25]
  kAugContrast = 1u << 2,    ///< stretch around the mean by [0.75, 1.25]
  kAugAll = kAugFlip | kAugBrightness | kAugContrast,
};

struct SynthesisConfig {
  int p = 8;  ///< objects sampled per output image
  int q = 4;  ///< source images drawn per output image
  int border_min = 10;  ///< safety border around each object, px
  int border_max = 15;
  double coverage_target = 0.4;  ///< fraction of the background to cover
  std::uint64_t seed = 0;
  unsigned augs = kAugAll;
  int output_count = 100;
  /// Area-feasible subsets tried per layout before giving up on the target.
  int max_subsets = 512;
  int pack_attempts = 4;  ///< random shelf packings per subset
  int max_gap = 8;        ///< random spacing between packed patches, px

  void validate() const;
};

/// A source image held in memory with its ground truth.
struct SourceImage {
  cv::Mat pixels;  ///< 8-bit, 3 channels
  std::vector<BoxRecord> boxes;
};

/// An object cut out with its safety border.
struct ObjectCrop {
  cv::Mat patch;
  int class_id = 0;
  /// Tight box inside the patch, patch pixel coordinates.
  double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;
  /// Border actually kept on each side after clipping at the source edge
  /// (left, top, right, bottom), after any flip.
  double border[4] = {0, 0, 0, 0};
  unsigned applied_augs = kAugNone;
};

struct PatchSize {
  int w = 0;
  int h = 0;
};

/// Top-left corner of crop `crop` on the background.
struct Placement {
  std::size_t crop = 0;
  int x = 0;
  int y = 0;
};

struct LayoutResult {
  std::vector<Placement> placements;
  double coverage = 0.0;  ///< pasted patch area / background area
  bool reached_target = false;
  bool skipped = false;  ///< no crop fits the background at all
  int subsets_tried = 0;
};

struct ComposedImage {
  cv::Mat image;
  std::vector<BoxRecord> boxes;
  std::vector<PatchRecord> patches;
};

/// Picks q source images at random, then p of their objects at random (all
/// of them when fewer), and cuts each with a random border per side.
/// Throws ValidationError on an empty dataset.
std::vector<ObjectCrop> sample_objects(std::span<const SourceImage> dataset, const SynthesisConfig& cfg,
                                       std::mt19937_64& rng);

/// Cuts one object; borders are (left, top, right, bottom) before clipping.
ObjectCrop cut_object(const cv::Mat& image, const BoxRecord& box, const int border[4]);

/// Applies the selected augmentations in place, drawing factors from rng.
void augment_crop(ObjectCrop& crop, unsigned augs, std::mt19937_64& rng);

/// Tries subsets of the patches from largest total area downward, each with
/// a few randomized shelf packings, and returns the first that covers at
/// least coverage_target of the background; otherwise the best coverage
/// found. Subsets larger than the background area are skipped without
/// counting against cfg.max_subsets.
LayoutResult select_layout(std::span<const PatchSize> patches, int bg_w, int bg_h,
                           std::mt19937_64& rng, const SynthesisConfig& cfg);
LayoutResult select_layout(std::span<const ObjectCrop> crops, int bg_w, int bg_h,
                           std::mt19937_64& rng, const SynthesisConfig& cfg);

/// Randomized shelf packing of all patches (random order and gaps). Empty
/// when they do not fit.
std::vector<Placement> shelf_pack(std::span<const PatchSize> patches,
                                  std::span<const std::size_t> subset, int bg_w, int bg_h,
                                  int max_gap, std::mt19937_64& rng);

/// Opaque paste; annotations are the crops' tight boxes moved to their
/// placements.
ComposedImage compose(const cv::Mat& background, std::span<const ObjectCrop> crops,
                      std::span<const Placement> placements);

/// Checks a synthesized record: boxes inside the image, patches pairwise
/// disjoint, every box inside its patch, boxes pairwise non-overlapping.
std::vector<std::string> validate_synthesized(const ManifestRecord& record);

struct SynthesisReport {
  std::vector<ManifestRecord> records;
  std::vector<std::string> warnings;
};

/// Writes cfg.output_count images to out_dir/images and a manifest to
/// out_dir/manifest.jsonl. Image i uses a generator seeded from (seed, i),
/// so the output does not depend on `jobs`. Unreadable images are skipped
/// with a warning; throws when no image could be produced.
SynthesisReport synthesize_dataset(const SynthesisConfig& cfg,
                                   const std::filesystem::path& source_manifest,
                                   const std::filesystem::path& background_dir,
                                   const std::filesystem::path& out_dir, int jobs = 1);

/// Generator for output image `index`.
std::mt19937_64 image_rng(std::uint64_t seed, std::uint64_t index);

}  // namespace mgd
