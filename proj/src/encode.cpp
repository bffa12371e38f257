#include "mgd/encode.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mgd/error.hpp"

namespace mgd {

CellTarget read_cell(const TargetTensor& t, int cx, int cy) {
  const auto& layout = t.layout();
  const auto v = t.cell(cx, cy);
  CellTarget c;
  c.tx = v[channel::kTx];
  c.ty = v[channel::kTy];
  c.tw = v[channel::kTw];
  c.th = v[channel::kTh];
  c.objectness = v[channel::kObj];
  for (int a = 0; a < layout.num_anchors; ++a) {
    if (v[static_cast<std::size_t>(channel::kFirstAnchor + a)] > 0.5) c.anchor = a;
  }
  for (int k = 0; k < layout.num_classes; ++k) {
    if (v[static_cast<std::size_t>(layout.first_class() + k)] > 0.5) c.class_id = k;
  }
  return c;
}

void write_cell(TargetTensor& t, int cx, int cy, const CellTarget& c) {
  const auto& layout = t.layout();
  auto v = t.cell(cx, cy);
  std::fill(v.begin(), v.end(), 0.0);
  if (c.objectness <= 0.0) return;
  if (c.anchor < 0 || c.anchor >= layout.num_anchors || c.class_id < 0 ||
      c.class_id >= layout.num_classes) {
    throw ValidationError("cell target anchor/class index out of range");
  }
  v[channel::kTx] = c.tx;
  v[channel::kTy] = c.ty;
  v[channel::kTw] = c.tw;
  v[channel::kTh] = c.th;
  v[channel::kObj] = 1.0;
  v[static_cast<std::size_t>(channel::kFirstAnchor + c.anchor)] = 1.0;
  v[static_cast<std::size_t>(layout.first_class() + c.class_id)] = 1.0;
}

CellIndex cell_index(const Box& box, const GridSpec& grid) {
  grid.validate();
  if (box.x() < 0.0 || box.y() < 0.0 || box.x() >= grid.image_w() || box.y() >= grid.image_h()) {
    std::ostringstream os;
    os << "box center (" << box.x() << ", " << box.y() << ") outside " << grid.image_w() << "x"
       << grid.image_h() << " image";
    throw ValidationError(os.str());
  }
  const int cx = static_cast<int>(std::floor(box.x() / grid.cell_w));
  const int cy = static_cast<int>(std::floor(box.y() / grid.cell_h));
  return {std::min(cx, grid.cells_x - 1), std::min(cy, grid.cells_y - 1)};
}

TransformParams forward_transform(const Box& box, const GridSpec& grid, const Anchor& anchor) {
  anchor.validate();
  const double gx = box.x() / grid.cell_w;
  const double gy = box.y() / grid.cell_h;
  return {gx - std::floor(gx), gy - std::floor(gy), std::log(box.w() / anchor.w),
          std::log(box.h() / anchor.h)};
}

Box inverse_transform(int cx, int cy, const TransformParams& t, const GridSpec& grid,
                      const Anchor& anchor) {
  return {(cx + t.tx) * grid.cell_w, (cy + t.ty) * grid.cell_h, anchor.w * std::exp(t.tw),
          anchor.h * std::exp(t.th)};
}

std::vector<CellAssignment> multi_grid_cells(const Box& box, const GridSpec& grid) {
  const CellIndex center = cell_index(box, grid);
  const double gx = box.x() / grid.cell_w;
  const double gy = box.y() / grid.cell_h;
  const double tx = gx - std::floor(gx);
  const double ty = gy - std::floor(gy);
  const CornerBox c = to_corners(box);

  std::vector<CellAssignment> out;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const int cx = center.cx + dx;
      const int cy = center.cy + dy;
      if (cx < 0 || cy < 0 || cx >= grid.cells_x || cy >= grid.cells_y) continue;
      if (dx != 0 || dy != 0) {
        const double mx = (cx + 0.5) * grid.cell_w;
        const double my = (cy + 0.5) * grid.cell_h;
        if (!(mx > c.x_min() && mx < c.x_max() && my > c.y_min() && my < c.y_max())) continue;
      }
      out.push_back({cx, cy, dx, dy, tx - dx, ty - dy});
    }
  }
  return out;
}

namespace {

struct Claim {
  int annotation = kNoOwner;
  bool is_center = false;
  double overlap = 0.0;
  double tx = 0.0;
  double ty = 0.0;

  bool beats(const Claim& other) const {
    if (other.annotation == kNoOwner) return true;
    if (is_center != other.is_center) return is_center;
    if (overlap != other.overlap) return overlap > other.overlap;
    return annotation < other.annotation;
  }
};

}  // namespace

ScaleEncoding encode_scale(std::span<const Annotation> annotations,
                           std::span<const int> local_anchor, const GridSpec& grid,
                           std::span<const Anchor> anchors, int num_classes) {
  if (local_anchor.size() != annotations.size()) {
    throw ValidationError("one anchor index per annotation required");
  }
  const HeadLayout layout{grid, static_cast<int>(anchors.size()), num_classes};
  ScaleEncoding enc{TargetTensor(layout), std::vector<int>(static_cast<std::size_t>(grid.cell_count()), kNoOwner)};
  std::vector<Claim> claims(static_cast<std::size_t>(grid.cell_count()));

  for (std::size_t i = 0; i < annotations.size(); ++i) {
    if (local_anchor[i] < 0) continue;
    if (static_cast<std::size_t>(local_anchor[i]) >= anchors.size()) {
      throw ValidationError("anchor index out of range for scale");
    }
    const Annotation& ann = annotations[i];
    if (ann.class_id < 0 || ann.class_id >= num_classes) {
      std::ostringstream os;
      os << "annotation " << i << " has class " << ann.class_id << " outside [0, " << num_classes
         << ")";
      throw ValidationError(os.str());
    }
    const CornerBox obj = to_corners(ann.box);
    for (const auto& a : multi_grid_cells(ann.box, grid)) {
      const CornerBox cell(a.cx * grid.cell_w, a.cy * grid.cell_h, (a.cx + 1) * grid.cell_w,
                           (a.cy + 1) * grid.cell_h);
      Claim claim{static_cast<int>(i), a.dx == 0 && a.dy == 0, intersection_area(obj, cell), a.tx,
                  a.ty};
      auto& slot = claims[static_cast<std::size_t>(a.cy * grid.cells_x + a.cx)];
      if (claim.beats(slot)) slot = claim;
    }
  }

  for (int cy = 0; cy < grid.cells_y; ++cy) {
    for (int cx = 0; cx < grid.cells_x; ++cx) {
      const std::size_t idx = static_cast<std::size_t>(cy * grid.cells_x + cx);
      const Claim& claim = claims[idx];
      if (claim.annotation == kNoOwner) continue;
      const auto i = static_cast<std::size_t>(claim.annotation);
      const Anchor& anchor = anchors[static_cast<std::size_t>(local_anchor[i])];
      const TransformParams t = forward_transform(annotations[i].box, grid, anchor);
      write_cell(enc.target, cx, cy,
                 {claim.tx, claim.ty, t.tw, t.th, 1.0, local_anchor[i], annotations[i].class_id});
      enc.owner[idx] = claim.annotation;
    }
  }
  return enc;
}

EncodeResult encode_ground_truth(std::span<const Annotation> annotations,
                                 std::span<const GridSpec> grids, std::span<const Anchor> anchors,
                                 int num_classes) {
  if (grids.empty()) throw ValidationError("at least one grid required");
  for (const auto& g : grids) {
    g.validate();
    if (g.image_w() != grids[0].image_w() || g.image_h() != grids[0].image_h()) {
      throw ValidationError("all grids must cover the same image size");
    }
  }
  if (anchors.empty() || anchors.size() % grids.size() != 0) {
    throw ValidationError("anchor count must be a positive multiple of the scale count");
  }
  for (const auto& a : anchors) a.validate();
  if (num_classes < 1) throw ValidationError("num_classes must be >= 1");

  const std::size_t k = anchors.size() / grids.size();
  const double image_w = grids[0].image_w();
  const double image_h = grids[0].image_h();

  EncodeResult result;
  result.scale_of.assign(annotations.size(), -1);
  std::vector<Annotation> clipped;
  clipped.reserve(annotations.size());
  std::vector<std::vector<int>> local(grids.size(), std::vector<int>(annotations.size(), -1));

  for (std::size_t i = 0; i < annotations.size(); ++i) {
    const Annotation& ann = annotations[i];
    if (ann.class_id < 0 || ann.class_id >= num_classes) {
      std::ostringstream os;
      os << "annotation " << i << " has class " << ann.class_id << " outside [0, " << num_classes
         << ")";
      throw ValidationError(os.str());
    }
    const CornerBox c = to_corners(ann.box);
    double x0 = c.x_min(), y0 = c.y_min(), x1 = c.x_max(), y1 = c.y_max();
    const bool any = clip_to_image(x0, y0, x1, y1, image_w, image_h);
    if (!any || (x1 - x0) * (y1 - y0) < 1.0) {
      result.warnings.push_back({i, "box has less than 1 px^2 inside the image; dropped"});
      clipped.push_back(ann);
      continue;
    }
    Annotation inside{from_corners(CornerBox(x0, y0, x1, y1)), ann.class_id, ann.difficult};
    clipped.push_back(inside);
    const std::size_t best = assign_best_anchor(inside.box, anchors);
    const std::size_t scale = best / k;
    result.scale_of[i] = static_cast<int>(scale);
    local[scale][i] = static_cast<int>(best % k);
  }

  for (std::size_t s = 0; s < grids.size(); ++s) {
    result.scales.push_back(encode_scale(clipped, local[s], grids[s], anchors.subspan(s * k, k),
                                         num_classes));
  }
  return result;
}

Letterbox Letterbox::fit(int src_w, int src_h, int dst_w, int dst_h) {
  if (src_w <= 0 || src_h <= 0 || dst_w <= 0 || dst_h <= 0) {
    throw ValidationError("letterbox sizes must be positive");
  }
  const double s = std::min(static_cast<double>(dst_w) / src_w, static_cast<double>(dst_h) / src_h);
  return {s, (dst_w - src_w * s) * 0.5, (dst_h - src_h * s) * 0.5};
}

Box Letterbox::apply(const Box& b) const {
  return {b.x() * scale + pad_x, b.y() * scale + pad_y, b.w() * scale, b.h() * scale};
}

Box Letterbox::invert(const Box& b) const {
  return {(b.x() - pad_x) / scale, (b.y() - pad_y) / scale, b.w() / scale, b.h() / scale};
}

}  // namespace mgd
