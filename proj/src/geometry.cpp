#include "mgd/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mgd/error.hpp"

namespace mgd {

Box::Box(double x, double y, double w, double h) : x_(x), y_(y), w_(w), h_(h) {
  if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(w) || !std::isfinite(h) ||
      !(w > 0.0) || !(h > 0.0)) {
    std::ostringstream os;
    os << "invalid box (x=" << x << ", y=" << y << ", w=" << w << ", h=" << h << ")";
    throw ValidationError(os.str());
  }
}

CornerBox Box::corners() const { return to_corners(*this); }

Box Box::from_corners(const CornerBox& c) { return mgd::from_corners(c); }

CornerBox::CornerBox(double x_min, double y_min, double x_max, double y_max)
    : x_min_(x_min), y_min_(y_min), x_max_(x_max), y_max_(y_max) {
  if (!std::isfinite(x_min) || !std::isfinite(y_min) || !std::isfinite(x_max) ||
      !std::isfinite(y_max) || !(x_min < x_max) || !(y_min < y_max)) {
    std::ostringstream os;
    os << "invalid corner box (" << x_min << ", " << y_min << ", " << x_max << ", " << y_max
       << ")";
    throw ValidationError(os.str());
  }
}

CornerBox to_corners(const Box& b) {
  const double hw = b.w() * 0.5;
  const double hh = b.h() * 0.5;
  return {b.x() - hw, b.y() - hh, b.x() + hw, b.y() + hh};
}

Box from_corners(const CornerBox& c) {
  return {(c.x_min() + c.x_max()) * 0.5, (c.y_min() + c.y_max()) * 0.5, c.width(), c.height()};
}

double intersection_area(const CornerBox& a, const CornerBox& b) {
  const double iw = std::min(a.x_max(), b.x_max()) - std::max(a.x_min(), b.x_min());
  const double ih = std::min(a.y_max(), b.y_max()) - std::max(a.y_min(), b.y_min());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  return iw * ih;
}

double iou(const CornerBox& a, const CornerBox& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

double iou(const Box& a, const Box& b) { return iou(to_corners(a), to_corners(b)); }

double iou_wh(double w1, double h1, double w2, double h2) {
  const double inter = std::min(w1, w2) * std::min(h1, h2);
  const double uni = w1 * h1 + w2 * h2 - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

void GridSpec::validate() const {
  if (cell_w <= 0 || cell_h <= 0 || cells_x <= 0 || cells_y <= 0) {
    std::ostringstream os;
    os << "invalid grid: cell " << cell_w << "x" << cell_h << ", cells " << cells_x << "x"
       << cells_y;
    throw ValidationError(os.str());
  }
}

GridSpec GridSpec::for_image(int image_w, int image_h, int stride) {
  if (stride <= 0 || image_w <= 0 || image_h <= 0 || image_w % stride != 0 ||
      image_h % stride != 0) {
    std::ostringstream os;
    os << "image " << image_w << "x" << image_h << " is not a multiple of stride " << stride;
    throw ValidationError(os.str());
  }
  return GridSpec{stride, stride, image_w / stride, image_h / stride};
}

std::vector<GridSpec> default_grids(int image_w, int image_h) {
  return {GridSpec::for_image(image_w, image_h, 8), GridSpec::for_image(image_w, image_h, 16),
          GridSpec::for_image(image_w, image_h, 32)};
}

bool clip_to_image(double& x_min, double& y_min, double& x_max, double& y_max, double image_w,
                   double image_h) {
  x_min = std::clamp(x_min, 0.0, image_w);
  x_max = std::clamp(x_max, 0.0, image_w);
  y_min = std::clamp(y_min, 0.0, image_h);
  y_max = std::clamp(y_max, 0.0, image_h);
  return x_max > x_min && y_max > y_min;
}

}  // namespace mgd
