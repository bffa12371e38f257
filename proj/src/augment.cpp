#include "mgd/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

#include <opencv2/core.hpp>

#include "mgd/error.hpp"

namespace mgd {

void SynthesisConfig::validate() const {
  if (p < 1 || p > 64) throw ValidationError("p must be in [1, 64]");
  if (q < 1) throw ValidationError("q must be >= 1");
  if (border_min < 0 || border_max < border_min) {
    throw ValidationError("border range must satisfy 0 <= min <= max");
  }
  if (!(coverage_target > 0.0 && coverage_target <= 1.0)) {
    throw ValidationError("coverage_target must be in (0, 1]");
  }
  if (output_count < 0) throw ValidationError("output_count must be >= 0");
  if (max_subsets < 1 || pack_attempts < 1 || max_gap < 0) {
    throw ValidationError("max_subsets and pack_attempts must be >= 1, max_gap >= 0");
  }
  if ((augs & ~static_cast<unsigned>(kAugAll)) != 0) throw ValidationError("unknown augmentation flag");
}

ObjectCrop cut_object(const cv::Mat& image, const BoxRecord& box, const int border[4]) {
  double x0 = box.x_min, y0 = box.y_min, x1 = box.x_max, y1 = box.y_max;
  if (!clip_to_image(x0, y0, x1, y1, image.cols, image.rows)) {
    throw ValidationError("object box lies outside its source image");
  }
  const int px0 = std::max(0, static_cast<int>(std::floor(x0)) - border[0]);
  const int py0 = std::max(0, static_cast<int>(std::floor(y0)) - border[1]);
  const int px1 = std::min(image.cols, static_cast<int>(std::ceil(x1)) + border[2]);
  const int py1 = std::min(image.rows, static_cast<int>(std::ceil(y1)) + border[3]);

  ObjectCrop crop;
  crop.patch = image(cv::Rect(px0, py0, px1 - px0, py1 - py0)).clone();
  crop.class_id = box.class_id;
  crop.x_min = x0 - px0;
  crop.y_min = y0 - py0;
  crop.x_max = x1 - px0;
  crop.y_max = y1 - py0;
  crop.border[0] = crop.x_min;
  crop.border[1] = crop.y_min;
  crop.border[2] = (px1 - px0) - crop.x_max;
  crop.border[3] = (py1 - py0) - crop.y_max;
  return crop;
}

void augment_crop(ObjectCrop& crop, unsigned augs, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  std::uniform_real_distribution<double> factor(0.75, 1.25);
  // Every draw happens regardless of the enabled set so that the stream
  // consumed per crop is fixed.
  const bool flip = coin(rng);
  const bool bright = coin(rng);
  const bool contrast = coin(rng);
  const double bright_f = factor(rng);
  const double contrast_f = factor(rng);

  if ((augs & kAugFlip) && flip) {
    cv::flip(crop.patch, crop.patch, 1);
    const double w = crop.patch.cols;
    const double x_min = w - crop.x_max;
    const double x_max = w - crop.x_min;
    crop.x_min = x_min;
    crop.x_max = x_max;
    std::swap(crop.border[0], crop.border[2]);
    crop.applied_augs |= kAugFlip;
  }
  if ((augs & kAugBrightness) && bright) {
    crop.patch.convertTo(crop.patch, -1, bright_f, 0.0);
    crop.applied_augs |= kAugBrightness;
  }
  if ((augs & kAugContrast) && contrast) {
    const cv::Scalar m = cv::mean(crop.patch);
    const int ch = crop.patch.channels();
    double mean = 0.0;
    for (int c = 0; c < ch; ++c) mean += m[c];
    mean /= ch;
    crop.patch.convertTo(crop.patch, -1, contrast_f, mean * (1.0 - contrast_f));
    crop.applied_augs |= kAugContrast;
  }
}

std::vector<ObjectCrop> sample_objects(std::span<const SourceImage> dataset, const SynthesisConfig& cfg,
                                       std::mt19937_64& rng) {
  cfg.validate();
  if (dataset.empty()) throw ValidationError("cannot sample objects from an empty dataset");

  std::vector<std::size_t> images(dataset.size());
  std::iota(images.begin(), images.end(), 0);
  std::shuffle(images.begin(), images.end(), rng);
  images.resize(std::min(images.size(), static_cast<std::size_t>(cfg.q)));
  std::sort(images.begin(), images.end());

  struct Ref {
    std::size_t image, box;
  };
  std::vector<Ref> pool;
  for (std::size_t i : images) {
    const SourceImage& src = dataset[i];
    for (std::size_t b = 0; b < src.boxes.size(); ++b) {
      double x0 = src.boxes[b].x_min, y0 = src.boxes[b].y_min;
      double x1 = src.boxes[b].x_max, y1 = src.boxes[b].y_max;
      if (src.pixels.empty() || !std::isfinite(x0) || !std::isfinite(y0) || !std::isfinite(x1) ||
          !std::isfinite(y1) || !clip_to_image(x0, y0, x1, y1, src.pixels.cols, src.pixels.rows)) {
        continue;
      }
      pool.push_back({i, b});
    }
  }
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(pool.size(), static_cast<std::size_t>(cfg.p)));

  std::uniform_int_distribution<int> border(cfg.border_min, cfg.border_max);
  std::vector<ObjectCrop> crops;
  crops.reserve(pool.size());
  for (const Ref& r : pool) {
    int b[4];
    for (int& v : b) v = border(rng);
    ObjectCrop crop = cut_object(dataset[r.image].pixels, dataset[r.image].boxes[r.box], b);
    augment_crop(crop, cfg.augs, rng);
    crops.push_back(std::move(crop));
  }
  return crops;
}

std::vector<Placement> shelf_pack(std::span<const PatchSize> patches,
                                  std::span<const std::size_t> subset, int bg_w, int bg_h,
                                  int max_gap, std::mt19937_64& rng) {
  std::vector<std::size_t> order(subset.begin(), subset.end());
  std::shuffle(order.begin(), order.end(), rng);
  std::uniform_int_distribution<int> gap(0, max_gap);

  std::vector<Placement> out;
  int x = gap(rng);
  int y = gap(rng);
  int shelf_h = 0;
  int extent_x = 0, extent_y = 0;
  for (std::size_t idx : order) {
    const PatchSize& s = patches[idx];
    if (x + s.w > bg_w) {
      y += shelf_h + gap(rng);
      x = gap(rng);
      shelf_h = 0;
    }
    if (x + s.w > bg_w || y + s.h > bg_h) return {};
    out.push_back({idx, x, y});
    extent_x = std::max(extent_x, x + s.w);
    extent_y = std::max(extent_y, y + s.h);
    shelf_h = std::max(shelf_h, s.h);
    x += s.w + gap(rng);
  }
  // Slide the whole arrangement to a random spot within the slack.
  std::uniform_int_distribution<int> dx(0, bg_w - extent_x);
  std::uniform_int_distribution<int> dy(0, bg_h - extent_y);
  const int sx = dx(rng);
  const int sy = dy(rng);
  for (auto& p : out) {
    p.x += sx;
    p.y += sy;
  }
  return out;
}

namespace {

// Yields index subsets of `areas` in non-increasing total area by walking
// removed sets in non-decreasing removed area.
class SubsetsByArea {
 public:
  explicit SubsetsByArea(std::vector<std::pair<double, std::size_t>> items) : items_(std::move(items)) {
    std::sort(items_.begin(), items_.end());
    for (const auto& it : items_) total_ += it.first;
  }

  bool next(std::vector<std::size_t>& subset, double& area) {
    if (!started_) {
      started_ = true;
      if (!items_.empty()) heap_.push({items_[0].first, 0, 1ull});
      emit(0ull, subset);
      area = total_;
      return !items_.empty();
    }
    while (!heap_.empty()) {
      const State s = heap_.top();
      heap_.pop();
      if (s.last + 1 < items_.size()) {
        const std::size_t n = s.last + 1;
        heap_.push({s.removed + items_[n].first, n, s.mask | (1ull << n)});
        heap_.push({s.removed - items_[s.last].first + items_[n].first, n,
                    (s.mask & ~(1ull << s.last)) | (1ull << n)});
      }
      if (s.mask == (items_.size() == 64 ? ~0ull : ((1ull << items_.size()) - 1))) continue;
      emit(s.mask, subset);
      area = total_ - s.removed;
      return true;
    }
    return false;
  }

 private:
  struct State {
    double removed;
    std::size_t last;
    std::uint64_t mask;
    bool operator>(const State& o) const {
      if (removed != o.removed) return removed > o.removed;
      return mask > o.mask;
    }
  };

  void emit(std::uint64_t removed_mask, std::vector<std::size_t>& subset) const {
    subset.clear();
    for (std::size_t i = 0; i < items_.size(); ++i) {
      if (!(removed_mask & (1ull << i))) subset.push_back(items_[i].second);
    }
    std::sort(subset.begin(), subset.end());
  }

  std::vector<std::pair<double, std::size_t>> items_;
  double total_ = 0.0;
  bool started_ = false;
  std::priority_queue<State, std::vector<State>, std::greater<State>> heap_;
};

}  // namespace

LayoutResult select_layout(std::span<const PatchSize> patches, int bg_w, int bg_h,
                           std::mt19937_64& rng, const SynthesisConfig& cfg) {
  if (bg_w <= 0 || bg_h <= 0) throw ValidationError("background must have positive size");
  if (patches.size() > 64) throw ValidationError("at most 64 patches per layout");
  LayoutResult result;
  const double bg_area = static_cast<double>(bg_w) * bg_h;

  std::vector<std::pair<double, std::size_t>> fitting;
  for (std::size_t i = 0; i < patches.size(); ++i) {
    if (patches[i].w > 0 && patches[i].h > 0 && patches[i].w <= bg_w && patches[i].h <= bg_h) {
      fitting.push_back({static_cast<double>(patches[i].w) * patches[i].h, i});
    }
  }
  if (fitting.empty()) {
    result.skipped = true;
    return result;
  }

  // Bounds the walk when nearly every subset is too large for the background.
  constexpr long kMaxGenerated = 1L << 16;
  SubsetsByArea subsets(std::move(fitting));
  std::vector<std::size_t> subset;
  double area = 0.0;
  long generated = 0;
  while (result.subsets_tried < cfg.max_subsets && generated < kMaxGenerated &&
         subsets.next(subset, area)) {
    ++generated;
    if (area > bg_area) continue;
    ++result.subsets_tried;
    const double coverage = area / bg_area;
    for (int attempt = 0; attempt < cfg.pack_attempts; ++attempt) {
      auto placed = shelf_pack(patches, subset, bg_w, bg_h, cfg.max_gap, rng);
      if (placed.empty()) continue;
      result.placements = std::move(placed);
      result.coverage = coverage;
      break;
    }
    // Later subsets are never larger, so the first packing is the best one.
    if (!result.placements.empty()) {
      result.reached_target = result.coverage >= cfg.coverage_target;
      break;
    }
  }
  std::sort(result.placements.begin(), result.placements.end(),
            [](const Placement& a, const Placement& b) { return a.crop < b.crop; });
  return result;
}

LayoutResult select_layout(std::span<const ObjectCrop> crops, int bg_w, int bg_h,
                           std::mt19937_64& rng, const SynthesisConfig& cfg) {
  std::vector<PatchSize> sizes;
  sizes.reserve(crops.size());
  for (const auto& c : crops) sizes.push_back({c.patch.cols, c.patch.rows});
  return select_layout(sizes, bg_w, bg_h, rng, cfg);
}

ComposedImage compose(const cv::Mat& background, std::span<const ObjectCrop> crops,
                      std::span<const Placement> placements) {
  ComposedImage out;
  out.image = background.clone();
  for (const Placement& p : placements) {
    if (p.crop >= crops.size()) throw ValidationError("placement refers to a missing crop");
    const ObjectCrop& c = crops[p.crop];
    const cv::Rect roi(p.x, p.y, c.patch.cols, c.patch.rows);
    if (p.x < 0 || p.y < 0 || roi.br().x > out.image.cols || roi.br().y > out.image.rows) {
      throw ValidationError("placement does not fit inside the background");
    }
    if (c.patch.type() != out.image.type()) {
      throw ValidationError("crop and background pixel formats differ");
    }
    c.patch.copyTo(out.image(roi));
    out.boxes.push_back({p.x + c.x_min, p.y + c.y_min, p.x + c.x_max, p.y + c.y_max, c.class_id, false});
    out.patches.push_back({p.x, p.y, c.patch.cols, c.patch.rows});
  }
  return out;
}

std::vector<std::string> validate_synthesized(const ManifestRecord& r) {
  std::vector<std::string> problems = validate_record(r);
  auto overlap = [](double a0, double a1, double b0, double b1) {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
  };
  for (std::size_t i = 0; i < r.patches.size(); ++i) {
    const PatchRecord& a = r.patches[i];
    if (a.x < 0 || a.y < 0 || a.x + a.w > r.width || a.y + a.h > r.height) {
      problems.push_back("patch " + std::to_string(i) + " leaves the image");
    }
    for (std::size_t j = i + 1; j < r.patches.size(); ++j) {
      const PatchRecord& b = r.patches[j];
      const double inter = overlap(a.x, a.x + a.w, b.x, b.x + b.w) * overlap(a.y, a.y + a.h, b.y, b.y + b.h);
      if (inter > 0.0) {
        problems.push_back("patches " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
      }
    }
  }
  if (!r.patches.empty() && r.patches.size() != r.boxes.size()) {
    problems.push_back("patch count differs from box count");
  } else {
    for (std::size_t i = 0; i < r.patches.size(); ++i) {
      const PatchRecord& p = r.patches[i];
      const BoxRecord& b = r.boxes[i];
      if (b.x_min < p.x || b.y_min < p.y || b.x_max > p.x + p.w || b.y_max > p.y + p.h) {
        problems.push_back("box " + std::to_string(i) + " is not inside its patch");
      }
    }
  }
  for (std::size_t i = 0; i < r.boxes.size(); ++i) {
    for (std::size_t j = i + 1; j < r.boxes.size(); ++j) {
      const BoxRecord& a = r.boxes[i];
      const BoxRecord& b = r.boxes[j];
      if (overlap(a.x_min, a.x_max, b.x_min, b.x_max) * overlap(a.y_min, a.y_max, b.y_min, b.y_max) > 0.0) {
        problems.push_back("boxes " + std::to_string(i) + " and " + std::to_string(j) + " overlap");
      }
    }
  }
  return problems;
}

std::mt19937_64 image_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace mgd
