#include "mgd/manifest.hpp"

#include <algorithm>
#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <nlohmann/json.hpp>
#include <sstream>

#include "mgd/error.hpp"

namespace mgd {

using nlohmann::json;

std::vector<std::string> validate_record(const ManifestRecord& r, int num_classes) {
  std::vector<std::string> problems;
  if (r.width <= 0 || r.height <= 0) {
    problems.push_back("image size must be positive");
  }
  for (std::size_t i = 0; i < r.boxes.size(); ++i) {
    const BoxRecord& b = r.boxes[i];
    std::ostringstream os;
    os << "box " << i << ": ";
    if (!std::isfinite(b.x_min) || !std::isfinite(b.y_min) || !std::isfinite(b.x_max) ||
        !std::isfinite(b.y_max)) {
      problems.push_back(os.str() + "non-finite coordinate");
      continue;
    }
    if (!(b.x_min < b.x_max) || !(b.y_min < b.y_max)) {
      problems.push_back(os.str() + "zero or negative area");
      continue;
    }
    if (b.x_min < 0.0 || b.y_min < 0.0 || b.x_max > r.width || b.y_max > r.height) {
      problems.push_back(os.str() + "outside the image bounds");
    }
    if (b.class_id < 0 || (num_classes > 0 && b.class_id >= num_classes)) {
      problems.push_back(os.str() + "class id out of range");
    }
  }
  return problems;
}

std::vector<Annotation> to_annotations(const ManifestRecord& r) {
  std::vector<Annotation> out;
  out.reserve(r.boxes.size());
  for (const auto& b : r.boxes) {
    out.push_back({from_corners(CornerBox(b.x_min, b.y_min, b.x_max, b.y_max)), b.class_id, b.difficult});
  }
  return out;
}

ManifestRecord parse_manifest_line(const std::string& line) {
  ManifestRecord r;
  try {
    const json j = json::parse(line);
    r.image = j.at("image").get<std::string>();
    r.id = j.contains("id") ? j.at("id").get<std::string>() : r.image;
    r.width = j.at("width").get<int>();
    r.height = j.at("height").get<int>();
    for (const auto& b : j.at("boxes")) {
      if (!b.is_array() || b.size() != 5) throw ValidationError("each box must be [x_min, y_min, x_max, y_max, class_id]");
      r.boxes.push_back({b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>(),
                         b[4].get<int>(), false});
    }
    if (j.contains("difficult")) {
      const auto& d = j.at("difficult");
      if (d.size() != r.boxes.size()) throw ValidationError("'difficult' needs one flag per box");
      for (std::size_t i = 0; i < d.size(); ++i) r.boxes[i].difficult = d[i].get<bool>();
    }
    if (j.contains("patches")) {
      for (const auto& p : j.at("patches")) {
        r.patches.push_back({p.at(0).get<int>(), p.at(1).get<int>(), p.at(2).get<int>(), p.at(3).get<int>()});
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed manifest record: ") + e.what());
  }
  return r;
}

std::string format_manifest_line(const ManifestRecord& r) {
  json j;
  if (r.id != r.image) j["id"] = r.id;
  j["image"] = r.image;
  j["width"] = r.width;
  j["height"] = r.height;
  json boxes = json::array();
  bool any_difficult = false;
  for (const auto& b : r.boxes) {
    boxes.push_back({b.x_min, b.y_min, b.x_max, b.y_max, b.class_id});
    any_difficult = any_difficult || b.difficult;
  }
  j["boxes"] = std::move(boxes);
  if (any_difficult) {
    json d = json::array();
    for (const auto& b : r.boxes) d.push_back(b.difficult);
    j["difficult"] = std::move(d);
  }
  if (!r.patches.empty()) {
    json p = json::array();
    for (const auto& q : r.patches) p.push_back({q.x, q.y, q.w, q.h});
    j["patches"] = std::move(p);
  }
  return j.dump();
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read manifest " + path.string());
  std::vector<ManifestRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_manifest_line(line));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, std::span<const ManifestRecord> records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write manifest " + path.string());
  for (const auto& r : records) os << format_manifest_line(r) << '\n';
  if (!os) throw IoError("failed writing manifest " + path.string());
}

ManifestRecord read_voc_xml(const std::filesystem::path& path, std::span<const std::string> class_names) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_xml(path.string(), tree);
  } catch (const pt::xml_parser_error& e) {
    throw IoError("cannot parse VOC XML " + path.string() + ": " + e.what());
  }
  ManifestRecord r;
  try {
    const auto& ann = tree.get_child("annotation");
    r.image = ann.get<std::string>("filename");
    r.id = r.image;
    r.width = ann.get<int>("size.width");
    r.height = ann.get<int>("size.height");
    for (const auto& [key, obj] : ann) {
      if (key != "object") continue;
      const auto name = obj.get<std::string>("name");
      const auto it = std::find(class_names.begin(), class_names.end(), name);
      if (it == class_names.end()) continue;
      BoxRecord b;
      b.class_id = static_cast<int>(std::distance(class_names.begin(), it));
      b.difficult = obj.get<int>("difficult", 0) != 0;
      // VOC pixel indices are 1-based and inclusive.
      b.x_min = obj.get<double>("bndbox.xmin") - 1.0;
      b.y_min = obj.get<double>("bndbox.ymin") - 1.0;
      b.x_max = obj.get<double>("bndbox.xmax");
      b.y_max = obj.get<double>("bndbox.ymax");
      r.boxes.push_back(b);
    }
  } catch (const pt::ptree_error& e) {
    throw ValidationError("incomplete VOC XML " + path.string() + ": " + e.what());
  }
  return r;
}

int infer_num_classes(std::span<const ManifestRecord> records) {
  int n = 0;
  for (const auto& r : records) {
    for (const auto& b : r.boxes) n = std::max(n, b.class_id + 1);
  }
  return n;
}

ImageDetection to_image_detection(const std::string& image_id, const Detection& d) {
  const CornerBox c = to_corners(d.box);
  return {image_id, d.class_id, d.score, c.x_min(), c.y_min(), c.x_max(), c.y_max()};
}

namespace {

double parse_double(const std::string& s, std::size_t lineno) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ValidationError("detections line " + std::to_string(lineno) + ": bad number '" + s + "'");
  }
  return v;
}

}  // namespace

std::vector<ImageDetection> parse_detections(const std::string& text) {
  std::vector<ImageDetection> out;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      f.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (f.size() != 7) {
      throw ValidationError("detections line " + std::to_string(lineno) + ": expected 7 tab-separated fields");
    }
    ImageDetection d;
    d.image_id = f[0];
    d.class_id = static_cast<int>(parse_double(f[1], lineno));
    d.score = parse_double(f[2], lineno);
    d.x_min = parse_double(f[3], lineno);
    d.y_min = parse_double(f[4], lineno);
    d.x_max = parse_double(f[5], lineno);
    d.y_max = parse_double(f[6], lineno);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<ImageDetection> read_detections(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read detections " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_detections(ss.str());
}

void write_detections(std::ostream& os, std::span<const ImageDetection> dets) {
  const auto old = os.precision(17);
  for (const auto& d : dets) {
    os << d.image_id << '\t' << d.class_id << '\t' << d.score << '\t' << d.x_min << '\t' << d.y_min
       << '\t' << d.x_max << '\t' << d.y_max << '\n';
  }
  os.precision(old);
}

void write_detections(const std::filesystem::path& path, std::span<const ImageDetection> dets,
                      bool append) {
  std::ofstream os(path, append ? std::ios::app : std::ios::trunc);
  if (!os) throw IoError("cannot write detections " + path.string());
  write_detections(os, dets);
  if (!os) throw IoError("failed writing detections " + path.string());
}

}  // namespace mgd
