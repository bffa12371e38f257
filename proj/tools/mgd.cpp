// mgd: command-line front end for target encoding, anchors, synthesis,
// decoding and evaluation.

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include <opencv2/imgcodecs.hpp>

#include "mgd/anchors.hpp"
#include "mgd/augment.hpp"
#include "mgd/decode.hpp"
#include "mgd/encode.hpp"
#include "mgd/error.hpp"
#include "mgd/eval.hpp"
#include "mgd/gradcheck.hpp"
#include "mgd/manifest.hpp"
#include "mgd/roundtrip.hpp"
#include "mgd/tensor_io.hpp"
#include "mgd/visualize.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace mgd;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

// JSON config files: top-level keys are global options, objects named after
// a subcommand hold that subcommand's options.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    json j;
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string name = opt->get_lnames()[0];
      if (opt->count() > 0) {
        j[name] = opt->as<std::string>();
      } else if (default_also && !opt->get_default_str().empty()) {
        j[name] = opt->get_default_str();
      }
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    json j;
    try {
      input >> j;
    } catch (const json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    flatten(j, {}, items);
    return items;
  }

 private:
  static std::string scalar(const json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  }

  static void flatten(const json& j, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& out) {
    for (const auto& [key, value] : j.items()) {
      if (value.is_object()) {
        auto p = parents;
        p.push_back(key);
        flatten(value, p, out);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      out.push_back(std::move(item));
    }
  }
};

struct Globals {
  std::uint64_t seed = 0;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::string log_level = "info";
};

std::vector<Anchor> load_anchors(const std::string& path) {
  if (path.empty()) return default_anchors();
  return read_anchors(path);
}

void check_output(const fs::path& path) {
  const fs::path dir = path.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
}

// ---- synthesize ------------------------------------------------------------

struct SynthesizeArgs {
  std::string manifest, backgrounds, out;
  SynthesisConfig cfg;
  std::vector<std::string> augs{"flip", "brightness", "contrast"};
};

void add_synthesize(CLI::App& app, SynthesizeArgs& a) {
  auto* sub = app.add_subcommand("synthesize", "Generate copy-paste training images");
  sub->add_option("--manifest", a.manifest, "Source manifest (JSONL)")->required();
  sub->add_option("--backgrounds", a.backgrounds, "Directory of object-free background images")->required();
  sub->add_option("--out", a.out, "Output directory (images/ and manifest.jsonl)")->required();
  sub->add_option("--p", a.cfg.p, "Objects sampled per image")->capture_default_str();
  sub->add_option("--q", a.cfg.q, "Source images drawn per image")->capture_default_str();
  sub->add_option("--border-min", a.cfg.border_min, "Smallest safety border, px")->capture_default_str();
  sub->add_option("--border-max", a.cfg.border_max, "Largest safety border, px")->capture_default_str();
  sub->add_option("--coverage", a.cfg.coverage_target, "Target fraction of background covered")
      ->capture_default_str();
  sub->add_option("--count", a.cfg.output_count, "Images to generate")->capture_default_str();
  sub->add_option("--augs", a.augs, "Per-object augmentations: flip, brightness, contrast, none")
      ->capture_default_str();
  sub->add_option("--max-subsets", a.cfg.max_subsets, "Subsets tried per layout")->capture_default_str();
  sub->add_option("--pack-attempts", a.cfg.pack_attempts, "Shelf packings per subset")->capture_default_str();
  sub->add_option("--max-gap", a.cfg.max_gap, "Largest gap between packed patches, px")->capture_default_str();
}

int run_synthesize(SynthesizeArgs& a, const Globals& g) {
  a.cfg.seed = g.seed;
  a.cfg.augs = kAugNone;
  for (const auto& s : a.augs) {
    if (s == "flip") a.cfg.augs |= kAugFlip;
    else if (s == "brightness") a.cfg.augs |= kAugBrightness;
    else if (s == "contrast") a.cfg.augs |= kAugContrast;
    else if (s != "none") throw ValidationError("unknown augmentation '" + s + "'");
  }
  const auto report = synthesize_dataset(a.cfg, a.manifest, a.backgrounds, a.out, g.jobs);
  for (const auto& w : report.warnings) spdlog::warn("{}", w);
  std::size_t boxes = 0;
  for (const auto& r : report.records) boxes += r.boxes.size();
  std::printf("wrote %zu images with %zu objects to %s\n", report.records.size(), boxes, a.out.c_str());
  return 0;
}

// ---- anchors ---------------------------------------------------------------

struct AnchorsArgs {
  std::string manifest, out, centroid = "median";
  int input_size = 416;
  ClusterConfig cfg;
};

void add_anchors(CLI::App& app, AnchorsArgs& a) {
  auto* sub = app.add_subcommand("anchors", "Cluster box sizes into anchors with IoU k-means");
  sub->add_option("--manifest", a.manifest, "Annotation manifest (JSONL)")->required();
  sub->add_option("--out", a.out, "Anchors file to write (stdout when omitted)");
  sub->add_option("--k", a.cfg.k, "Number of anchors")->capture_default_str();
  sub->add_option("--max-iters", a.cfg.max_iters, "Iteration limit per restart")->capture_default_str();
  sub->add_option("--tol", a.cfg.tol, "Stop when mean IoU gains less than this")->capture_default_str();
  sub->add_option("--restarts", a.cfg.restarts, "Independent seedings")->capture_default_str();
  sub->add_option("--centroid", a.centroid, "Centroid rule")
      ->check(CLI::IsMember({"median", "mean"}))
      ->capture_default_str();
  sub->add_option("--input-size", a.input_size, "Letterbox sizes into this square input first (0 = native)")
      ->capture_default_str();
}

int run_anchors(AnchorsArgs& a, const Globals& g) {
  a.cfg.seed = g.seed;
  a.cfg.centroid = a.centroid == "mean" ? CentroidRule::kMean : CentroidRule::kMedian;
  if (a.input_size < 0) throw ValidationError("input size must be >= 0");
  const auto records = read_manifest(a.manifest);
  std::vector<BoxSize> sizes;
  for (const auto& r : records) {
    if (r.width <= 0 || r.height <= 0) throw ValidationError("record '" + r.id + "' has no image size");
    const double s = a.input_size > 0 ? Letterbox::fit(r.width, r.height, a.input_size, a.input_size).scale : 1.0;
    for (const auto& b : r.boxes) {
      if (b.x_max > b.x_min && b.y_max > b.y_min) sizes.push_back({(b.x_max - b.x_min) * s, (b.y_max - b.y_min) * s});
    }
  }
  spdlog::info("clustering {} boxes into {} anchors", sizes.size(), a.cfg.k);
  const auto result = kmeans_iou(sizes, a.cfg);
  std::vector<Anchor> rounded = result.anchors;
  if (a.out.empty()) {
    std::printf("%s\n", format_anchors(rounded).c_str());
  } else {
    check_output(a.out);
    write_anchors(a.out, rounded);
  }
  std::fprintf(stderr, "mean IoU %.4f, %d iterations, %s\n", result.mean_iou, result.iterations,
               result.converged ? "converged" : "not converged");
  return 0;
}

// ---- encode-check ----------------------------------------------------------

struct EncodeCheckArgs {
  std::string manifest, anchors, write_raw, json_out;
  RoundTripConfig cfg;
};

void add_encode_check(CLI::App& app, EncodeCheckArgs& a) {
  auto* sub = app.add_subcommand("encode-check", "Encode, decode perfect predictions and compare");
  sub->add_option("--manifest", a.manifest, "Annotation manifest (JSONL)")->required();
  sub->add_option("--anchors", a.anchors, "Anchors file (built-in nine anchors when omitted)");
  sub->add_option("--input-size", a.cfg.input_size, "Square letterbox input, multiple of 32 (0 = native)")
      ->capture_default_str();
  sub->add_option("--num-classes", a.cfg.num_classes, "Class count (inferred when negative)")
      ->capture_default_str();
  sub->add_option("--beta", a.cfg.beta, "Coordinate activation slope")->capture_default_str();
  sub->add_option("--tolerance", a.cfg.tolerance, "Max allowed error, px")->capture_default_str();
  sub->add_option("--write-raw", a.write_raw, "Directory for the perfect raw tensors and index.tsv");
  sub->add_option("--json", a.json_out, "Also write the report as JSON");
}

int run_encode_check(EncodeCheckArgs& a, const Globals&) {
  a.cfg.anchors = load_anchors(a.anchors);
  const auto records = read_manifest(a.manifest);
  std::vector<std::vector<RawPrediction>> raws;
  const auto report = roundtrip_check(records, a.cfg, a.write_raw.empty() ? nullptr : &raws);
  std::fputs(format_roundtrip_report(report).c_str(), stdout);

  if (!a.write_raw.empty()) {
    fs::create_directories(a.write_raw);
    std::ofstream index(fs::path(a.write_raw) / "index.tsv");
    if (!index) throw IoError("cannot write " + (fs::path(a.write_raw) / "index.tsv").string());
    index << "# file\timage_id\twidth\theight\tinput_size\n";
    std::size_t n = 0;
    for (const auto& r : records) {
      if (std::any_of(report.invalid_records.begin(), report.invalid_records.end(),
                      [&](const RecordIssue& i) { return i.record == r.id; })) {
        continue;
      }
      char name[32];
      std::snprintf(name, sizeof(name), "%06zu.mgrt", n);
      write_raw(fs::path(a.write_raw) / name, raws[n]);
      index << name << '\t' << r.id << '\t' << r.width << '\t' << r.height << '\t' << a.cfg.input_size << '\n';
      ++n;
    }
    spdlog::info("wrote {} raw tensor files to {}", n, a.write_raw);
  }
  if (!a.json_out.empty()) {
    json j;
    j["records"] = report.records;
    j["checked_records"] = report.checked_records;
    j["objects"] = report.objects;
    j["max_error"] = report.max_error;
    j["cell_histogram"] = report.cell_histogram;
    auto issues = [](const std::vector<RecordIssue>& v) {
      json arr = json::array();
      for (const auto& i : v) arr.push_back({{"record", i.record}, {"message", i.message}});
      return arr;
    };
    j["invalid_records"] = issues(report.invalid_records);
    j["warnings"] = issues(report.warnings);
    j["failures"] = issues(report.failures);
    j["passed"] = report.passed();
    check_output(a.json_out);
    std::ofstream(a.json_out) << j.dump(2) << '\n';
  }
  return report.passed() ? 0 : kExitValidation;
}

// ---- loss-check ------------------------------------------------------------

void add_loss_check(CLI::App& app, GradCheckConfig& c) {
  auto* sub = app.add_subcommand("loss-check", "Finite-difference check of the loss gradient");
  sub->add_option("--instances", c.instances, "Random instances")->capture_default_str();
  sub->add_option("--max-cells", c.max_cells, "Largest grid side")->capture_default_str();
  sub->add_option("--max-anchors", c.max_anchors, "Largest anchor count")->capture_default_str();
  sub->add_option("--max-classes", c.max_classes, "Largest class count")->capture_default_str();
  sub->add_option("--step", c.step, "Central-difference step")->capture_default_str();
  sub->add_option("--tolerance", c.tolerance, "Allowed relative error")->capture_default_str();
  sub->add_option("--floor", c.floor, "Denominator floor of the relative error")->capture_default_str();
  sub->add_option("--lambda", c.loss.lambda, "Coordinate weight scale")->capture_default_str();
  sub->add_option("--beta", c.loss.beta, "Coordinate activation slope")->capture_default_str();
}

int run_loss_check(GradCheckConfig& c, const Globals& g) {
  c.seed = g.seed;
  const auto r = run_gradient_check(c);
  std::printf("instances: %d\nvalues checked: %zu\nmax relative error: %.3e\nmax absolute error: %.3e\n",
              r.instances, r.values, r.max_rel_error, r.max_abs_error);
  if (r.worst_instance >= 0) std::printf("worst: instance %d, value %zu\n", r.worst_instance, r.worst_index);
  std::printf("%s (tolerance %.1e)\n", r.passed ? "gradient OK" : "gradient MISMATCH", c.tolerance);
  return r.passed ? 0 : kExitValidation;
}

// ---- decode ----------------------------------------------------------------

struct DecodeArgs {
  std::vector<std::string> raw;
  std::string raw_dir, anchors, out;
  double beta = kDefaultBeta;
  double conf = kDefaultConfThresh;
  double nms_thresh = kDefaultNmsThresh;
  bool no_nms = false;
};

void add_decode(CLI::App& app, DecodeArgs& a) {
  auto* sub = app.add_subcommand("decode", "Decode raw tensors into a detection dump");
  sub->add_option("--raw", a.raw, "Raw tensor files; the image id is the file stem");
  sub->add_option("--raw-dir", a.raw_dir, "Directory written by encode-check --write-raw");
  sub->add_option("--anchors", a.anchors, "Anchors file (built-in nine anchors when omitted)");
  sub->add_option("--out", a.out, "Detection dump to write (stdout when omitted)");
  sub->add_option("--beta", a.beta, "Coordinate activation slope")->capture_default_str();
  sub->add_option("--conf", a.conf, "Score threshold")->capture_default_str();
  sub->add_option("--nms", a.nms_thresh, "NMS IoU threshold")->capture_default_str();
  sub->add_flag("--no-nms", a.no_nms, "Keep every candidate");
}

struct RawJob {
  fs::path file;
  std::string image_id;
  int width = 0, height = 0, input_size = 0;
};

std::vector<RawJob> raw_jobs(const DecodeArgs& a) {
  std::vector<RawJob> jobs;
  for (const auto& f : a.raw) jobs.push_back({f, fs::path(f).stem().string()});
  if (!a.raw_dir.empty()) {
    const fs::path index = fs::path(a.raw_dir) / "index.tsv";
    std::ifstream is(index);
    if (!is) throw IoError("cannot read " + index.string());
    std::string line;
    while (std::getline(is, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      RawJob j;
      std::string file;
      if (!std::getline(ls, file, '\t') || !std::getline(ls, j.image_id, '\t') ||
          !(ls >> j.width >> j.height >> j.input_size)) {
        throw ValidationError("malformed line in " + index.string() + ": " + line);
      }
      j.file = fs::path(a.raw_dir) / file;
      jobs.push_back(std::move(j));
    }
  }
  if (jobs.empty()) throw ValidationError("give --raw files or --raw-dir");
  return jobs;
}

std::vector<Detection> decode_file(const RawJob& job, std::span<const Anchor> anchors, const DecodeConfig& cfg,
                                   double nms_thresh, bool no_nms, std::vector<Detection>* before = nullptr) {
  const auto raws = read_raw(job.file);
  if (raws.empty()) throw ValidationError(job.file.string() + " holds no scales");
  const auto k = static_cast<std::size_t>(raws[0].layout().num_anchors);
  if (anchors.size() != raws.size() * k) {
    throw ValidationError(job.file.string() + " needs " + std::to_string(raws.size() * k) + " anchors, got " +
                          std::to_string(anchors.size()));
  }
  auto dets = decode_all(raws, anchors, cfg);
  if (job.input_size > 0) {
    const Letterbox lb = Letterbox::fit(job.width, job.height, job.input_size, job.input_size);
    std::vector<Detection> mapped;
    for (auto d : dets) {
      const CornerBox c = to_corners(lb.invert(d.box));
      double x0 = c.x_min(), y0 = c.y_min(), x1 = c.x_max(), y1 = c.y_max();
      if (!clip_to_image(x0, y0, x1, y1, job.width, job.height)) continue;
      d.box = from_corners(CornerBox(x0, y0, x1, y1));
      mapped.push_back(d);
    }
    dets = std::move(mapped);
  }
  if (before != nullptr) *before = dets;
  return no_nms ? dets : nms(dets, nms_thresh);
}

int run_decode(DecodeArgs& a, const Globals&) {
  const auto anchors = load_anchors(a.anchors);
  DecodeConfig cfg{a.beta, a.conf};
  cfg.validate();
  std::vector<ImageDetection> all;
  for (const auto& job : raw_jobs(a)) {
    const auto dets = decode_file(job, anchors, cfg, a.nms_thresh, a.no_nms);
    spdlog::debug("{}: {} detections", job.image_id, dets.size());
    for (const auto& d : dets) all.push_back(to_image_detection(job.image_id, d));
  }
  if (a.out.empty()) {
    write_detections(std::cout, all);
  } else {
    check_output(a.out);
    write_detections(a.out, all);
    spdlog::info("wrote {} detections to {}", all.size(), a.out);
  }
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string detections, manifest, protocol = "voc11", json_out;
  double iou = 0.5;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  auto* sub = app.add_subcommand("eval", "Score a detection dump against a manifest");
  sub->add_option("--detections", a.detections, "Detection dump")->required();
  sub->add_option("--manifest", a.manifest, "Ground-truth manifest")->required();
  sub->add_option("--protocol", a.protocol, "voc11, vocall or coco")
      ->check(CLI::IsMember({"voc11", "vocall", "voc", "coco"}))
      ->capture_default_str();
  sub->add_option("--iou", a.iou, "Matching IoU threshold (VOC protocols)")->capture_default_str();
  sub->add_option("--json", a.json_out, "Also write the report as JSON");
}

int run_eval(EvalArgs& a, const Globals&) {
  EvalConfig cfg;
  cfg.protocol = parse_protocol(a.protocol);
  cfg.iou_threshold = a.iou;
  const auto report = evaluate(fs::path(a.detections), fs::path(a.manifest), cfg);
  std::fputs(format_report(report).c_str(), stdout);
  if (!a.json_out.empty()) {
    check_output(a.json_out);
    std::ofstream os(a.json_out);
    if (!os) throw IoError("cannot write " + a.json_out);
    os << report_json(report) << '\n';
  }
  return 0;
}

// ---- visualize -------------------------------------------------------------

struct VisualizeArgs {
  std::string image, out, detections, manifest, image_id, raw, anchors;
  int input_size = 0;
  double beta = kDefaultBeta, conf = kDefaultConfThresh, nms_thresh = kDefaultNmsThresh;
  bool compare_nms = false, no_labels = false;
  int thickness = 1;
};

void add_visualize(CLI::App& app, VisualizeArgs& a) {
  auto* sub = app.add_subcommand("visualize", "Draw boxes on an image");
  sub->add_option("--image", a.image, "Input image")->required();
  sub->add_option("--out", a.out, "Output image")->required();
  sub->add_option("--detections", a.detections, "Detection dump to draw");
  sub->add_option("--manifest", a.manifest, "Manifest whose boxes to draw");
  sub->add_option("--image-id", a.image_id, "Record / detection id (default: image file name)");
  sub->add_option("--raw", a.raw, "Raw tensor file to decode and draw");
  sub->add_option("--anchors", a.anchors, "Anchors file for --raw");
  sub->add_option("--input-size", a.input_size, "Letterbox input size the raw tensor was made for (0 = image size)")
      ->capture_default_str();
  sub->add_option("--beta", a.beta, "Coordinate activation slope")->capture_default_str();
  sub->add_option("--conf", a.conf, "Score threshold for --raw")->capture_default_str();
  sub->add_option("--nms", a.nms_thresh, "NMS IoU threshold for --raw")->capture_default_str();
  sub->add_flag("--compare-nms", a.compare_nms, "Side by side: before NMS (left) and after (right)");
  sub->add_flag("--no-labels", a.no_labels, "Outlines only");
  sub->add_option("--thickness", a.thickness, "Line thickness, px")->capture_default_str();
}

int run_visualize(VisualizeArgs& a, const Globals&) {
  cv::Mat img;
  try {
    img = cv::imread(a.image, cv::IMREAD_COLOR);
  } catch (const cv::Exception&) {
  }
  if (img.empty()) throw IoError("cannot read image " + a.image);
  const int sources = !a.detections.empty() + !a.manifest.empty() + !a.raw.empty();
  if (sources > 1) throw ValidationError("give at most one of --detections, --manifest, --raw");
  if (a.compare_nms && a.raw.empty()) throw ValidationError("--compare-nms needs --raw");
  if (a.thickness < 1) throw ValidationError("thickness must be >= 1");
  const std::string id = a.image_id.empty() ? fs::path(a.image).filename().string() : a.image_id;
  RenderOptions opts;
  opts.labels = !a.no_labels;
  opts.thickness = a.thickness;

  cv::Mat out;
  if (!a.raw.empty()) {
    const auto anchors = load_anchors(a.anchors);
    DecodeConfig cfg{a.beta, a.conf};
    cfg.validate();
    RawJob job{a.raw, id, img.cols, img.rows, a.input_size};
    std::vector<Detection> before;
    const auto after = decode_file(job, anchors, cfg, a.nms_thresh, false, &before);
    spdlog::info("{} candidates, {} after NMS", before.size(), after.size());
    if (a.compare_nms) {
      out = render_nms_comparison(img, before, after, opts);
    } else {
      std::vector<DrawBox> boxes;
      for (const auto& d : after) boxes.push_back(to_draw_box(d));
      out = render_boxes(img, boxes, opts);
    }
  } else {
    std::vector<DrawBox> boxes;
    if (!a.detections.empty()) {
      for (const auto& d : read_detections(a.detections)) {
        if (d.image_id == id) boxes.push_back(to_draw_box(d));
      }
    } else if (!a.manifest.empty()) {
      bool found = false;
      for (const auto& r : read_manifest(a.manifest)) {
        if (r.id != id && r.image != id && fs::path(r.image).filename().string() != id) continue;
        for (const auto& b : r.boxes) boxes.push_back(to_draw_box(b));
        found = true;
        break;
      }
      if (!found) throw ValidationError("no record for '" + id + "' in " + a.manifest);
    }
    out = render_boxes(img, boxes, opts);
  }
  check_output(a.out);
  bool ok = false;
  try {
    ok = cv::imwrite(a.out, out);
  } catch (const cv::Exception&) {
  }
  if (!ok) throw IoError("cannot write image " + a.out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-grid detector target toolkit"};
  app.config_formatter(std::make_shared<JsonConfig>());
  app.allow_config_extras(CLI::config_extras_mode::error);
  app.set_config("--config", "", "JSON config file; flags override its values")->envname("MGD_CONFIG");
  app.require_subcommand(1);

  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--jobs", g.jobs, "Worker threads")->capture_default_str();
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}))
      ->capture_default_str();

  SynthesizeArgs synth;
  AnchorsArgs anchors;
  EncodeCheckArgs encode;
  GradCheckConfig grad;
  DecodeArgs decode;
  EvalArgs eval;
  VisualizeArgs vis;
  add_synthesize(app, synth);
  add_anchors(app, anchors);
  add_encode_check(app, encode);
  add_loss_check(app, grad);
  add_decode(app, decode);
  add_eval(app, eval);
  add_visualize(app, vis);

  try {
    app.parse(argc, argv);
  } catch (const CLI::FileError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitIo;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  auto logger = spdlog::stderr_color_mt("mgd");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(g.log_level));
  spdlog::set_pattern("[%l] %v");
  if (g.jobs < 1) {
    spdlog::error("--jobs must be >= 1");
    return kExitValidation;
  }

  try {
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "synthesize") return run_synthesize(synth, g);
    if (cmd == "anchors") return run_anchors(anchors, g);
    if (cmd == "encode-check") return run_encode_check(encode, g);
    if (cmd == "loss-check") return run_loss_check(grad, g);
    if (cmd == "decode") return run_decode(decode, g);
    if (cmd == "eval") return run_eval(eval, g);
    if (cmd == "visualize") return run_visualize(vis, g);
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    spdlog::error("{}", e.what());
    return kExitIo;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitValidation;
  }
  return kExitValidation;
}
