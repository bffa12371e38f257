#include <algorithm>
#include <cstdio>
#include <thread>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "mgd/augment.hpp"
#include "mgd/error.hpp"

namespace mgd {

namespace fs = std::filesystem;

namespace {

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  static const char* kExts[] = {".png", ".jpg", ".jpeg", ".bmp", ".ppm", ".pgm", ".tif", ".tiff", ".webp"};
  return std::find(std::begin(kExts), std::end(kExts), ext) != std::end(kExts);
}

cv::Mat load_bgr(const fs::path& p) {
  cv::Mat img;
  try {
    img = cv::imread(p.string(), cv::IMREAD_COLOR);
  } catch (const cv::Exception&) {
    img.release();
  }
  return img;
}

struct Outcome {
  bool ok = false;
  ManifestRecord record;
  cv::Mat image;
  std::vector<std::string> warnings;
};

Outcome make_one(std::size_t index, const SynthesisConfig& cfg, const std::vector<ManifestRecord>& sources,
                 const fs::path& source_root, const std::vector<fs::path>& backgrounds) {
  Outcome out;
  auto rng = image_rng(cfg.seed, index);

  cv::Mat bg;
  std::uniform_int_distribution<std::size_t> pick_bg(0, backgrounds.size() - 1);
  const std::size_t first = pick_bg(rng);
  for (std::size_t k = 0; k < backgrounds.size() && bg.empty(); ++k) {
    const fs::path& p = backgrounds[(first + k) % backgrounds.size()];
    bg = load_bgr(p);
    if (bg.empty()) out.warnings.push_back("unreadable background " + p.string() + "; skipped");
  }
  if (bg.empty()) return out;

  std::vector<std::size_t> chosen(sources.size());
  for (std::size_t i = 0; i < chosen.size(); ++i) chosen[i] = i;
  std::shuffle(chosen.begin(), chosen.end(), rng);
  chosen.resize(std::min(chosen.size(), static_cast<std::size_t>(cfg.q)));
  std::sort(chosen.begin(), chosen.end());

  std::vector<SourceImage> loaded;
  for (std::size_t i : chosen) {
    fs::path p = sources[i].image;
    if (p.is_relative()) p = source_root / p;
    SourceImage src{load_bgr(p), sources[i].boxes};
    if (src.pixels.empty()) {
      out.warnings.push_back("unreadable source image " + p.string() + "; skipped");
      continue;
    }
    loaded.push_back(std::move(src));
  }

  std::vector<ObjectCrop> crops;
  if (!loaded.empty()) {
    SynthesisConfig local = cfg;
    local.q = static_cast<int>(loaded.size());
    crops = sample_objects(loaded, local, rng);
  }
  const LayoutResult layout = select_layout(crops, bg.cols, bg.rows, rng, cfg);
  ComposedImage composed = compose(bg, crops, layout.placements);

  char name[32];
  std::snprintf(name, sizeof(name), "synth_%06zu", index);
  out.record.id = name;
  out.record.image = std::string("images/") + name + ".png";
  out.record.width = composed.image.cols;
  out.record.height = composed.image.rows;
  out.record.boxes = std::move(composed.boxes);
  out.record.patches = std::move(composed.patches);
  out.image = std::move(composed.image);
  out.ok = true;
  return out;
}

}  // namespace

SynthesisReport synthesize_dataset(const SynthesisConfig& cfg, const fs::path& source_manifest,
                                   const fs::path& background_dir, const fs::path& out_dir, int jobs) {
  cfg.validate();
  SynthesisReport report;
  if (cfg.output_count == 0) {
    fs::create_directories(out_dir);
    write_manifest(out_dir / "manifest.jsonl", report.records);
    return report;
  }

  const auto sources = read_manifest(source_manifest);
  if (sources.empty()) throw ValidationError("source manifest " + source_manifest.string() + " is empty");
  const fs::path source_root = source_manifest.parent_path();

  std::vector<fs::path> backgrounds;
  std::error_code ec;
  for (const auto& entry : fs::directory_iterator(background_dir, ec)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) backgrounds.push_back(entry.path());
  }
  if (ec) throw IoError("cannot list background directory " + background_dir.string());
  if (backgrounds.empty()) throw ValidationError("no background images in " + background_dir.string());
  std::sort(backgrounds.begin(), backgrounds.end());

  fs::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "images").string());

  const std::size_t n = static_cast<std::size_t>(cfg.output_count);
  std::vector<Outcome> outcomes(n);
  auto worker = [&](std::size_t start, std::size_t stride) {
    for (std::size_t i = start; i < n; i += stride) {
      outcomes[i] = make_one(i, cfg, sources, source_root, backgrounds);
      if (!outcomes[i].ok) continue;
      const fs::path path = out_dir / outcomes[i].record.image;
      if (!cv::imwrite(path.string(), outcomes[i].image)) {
        outcomes[i].warnings.push_back("failed to write " + path.string());
        outcomes[i].ok = false;
      }
      outcomes[i].image.release();
    }
  };
  const std::size_t workers = static_cast<std::size_t>(std::clamp(jobs, 1, 256));
  if (workers == 1) {
    worker(0, 1);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(worker, t, workers);
  }

  for (auto& o : outcomes) {
    for (auto& w : o.warnings) report.warnings.push_back(std::move(w));
    if (o.ok) report.records.push_back(std::move(o.record));
  }
  if (report.records.empty()) throw IoError("no synthesized image could be produced");
  write_manifest(out_dir / "manifest.jsonl", report.records);
  return report;
}

}  // namespace mgd
