#pragma once

#include <optional>
#include <span>
#include <vector>

#include <opencv2/core.hpp>

#include "mgd/decode.hpp"
#include "mgd/manifest.hpp"

namespace mgd {

struct DrawBox {
  double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;
  int class_id = 0;
  std::optional<double> score;
};

struct RenderOptions {
  bool labels = true;
  int thickness = 1;
};

DrawBox to_draw_box(const Detection& d);
DrawBox to_draw_box(const BoxRecord& b);
DrawBox to_draw_box(const ImageDetection& d);

/// Stable per-class color (BGR).
cv::Scalar class_color(int class_id);

/// Copy of `image` with box outlines and optional "class score" labels.
cv::Mat render_boxes(const cv::Mat& image, std::span<const DrawBox> boxes,
                     const RenderOptions& opts = {});

/// Two renders next to each other: all candidates on the left, the
/// survivors of NMS on the right.
cv::Mat render_nms_comparison(const cv::Mat& image, std::span<const Detection> before,
                              std::span<const Detection> after, const RenderOptions& opts = {});

}  // namespace mgd
