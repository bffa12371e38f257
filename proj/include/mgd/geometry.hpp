#pragma once

#include <cstdint>
#include <vector>

namespace mgd {

class CornerBox;

/// Axis-aligned box in pixel space, center + size form.
///
/// Construction rejects non-finite centers and non-positive sizes; every
/// downstream formula (log size ratios, IoU) is undefined on those.
class Box {
 public:
  Box(double x, double y, double w, double h);

  double x() const { return x_; }
  double y() const { return y_; }
  double w() const { return w_; }
  double h() const { return h_; }
  double area() const { return w_ * h_; }

  CornerBox corners() const;
  static Box from_corners(const CornerBox& c);

  friend bool operator==(const Box&, const Box&) = default;

 private:
  double x_, y_, w_, h_;
};

/// Axis-aligned box in corner form; x_min < x_max and y_min < y_max.
class CornerBox {
 public:
  CornerBox(double x_min, double y_min, double x_max, double y_max);

  double x_min() const { return x_min_; }
  double y_min() const { return y_min_; }
  double x_max() const { return x_max_; }
  double y_max() const { return y_max_; }
  double width() const { return x_max_ - x_min_; }
  double height() const { return y_max_ - y_min_; }
  double area() const { return width() * height(); }

  friend bool operator==(const CornerBox&, const CornerBox&) = default;

 private:
  double x_min_, y_min_, x_max_, y_max_;
};

CornerBox to_corners(const Box& b);
Box from_corners(const CornerBox& c);

/// Area of the intersection of two boxes; 0 when they do not overlap.
double intersection_area(const CornerBox& a, const CornerBox& b);

double iou(const CornerBox& a, const CornerBox& b);
double iou(const Box& a, const Box& b);

/// IoU of two boxes sharing the same center (only sizes matter).
double iou_wh(double w1, double h1, double w2, double h2);

/// One detection scale: a cells_x x cells_y grid of cell_w x cell_h cells.
struct GridSpec {
  int cell_w = 32;
  int cell_h = 32;
  int cells_x = 13;
  int cells_y = 13;

  int image_w() const { return cell_w * cells_x; }
  int image_h() const { return cell_h * cells_y; }
  int cell_count() const { return cells_x * cells_y; }

  /// Throws ValidationError unless every field is positive.
  void validate() const;

  /// Square-cell grid covering an image; the image size must be a multiple
  /// of the stride.
  static GridSpec for_image(int image_w, int image_h, int stride);

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Strides 8, 16, 32 (small to large objects) for an image size.
std::vector<GridSpec> default_grids(int image_w, int image_h);

/// Clips a box to [0, w] x [0, h]; returns false when nothing positive is left.
bool clip_to_image(double& x_min, double& y_min, double& x_max, double& y_max,
                   double image_w, double image_h);

}  // namespace mgd
