#include "mgd/visualize.hpp"

#include <cmath>
#include <cstdio>

#include <opencv2/imgproc.hpp>

namespace mgd {

DrawBox to_draw_box(const Detection& d) {
  const CornerBox c = to_corners(d.box);
  return {c.x_min(), c.y_min(), c.x_max(), c.y_max(), d.class_id, d.score};
}

DrawBox to_draw_box(const BoxRecord& b) { return {b.x_min, b.y_min, b.x_max, b.y_max, b.class_id, {}}; }

DrawBox to_draw_box(const ImageDetection& d) {
  return {d.x_min, d.y_min, d.x_max, d.y_max, d.class_id, d.score};
}

cv::Scalar class_color(int class_id) {
  // Golden-ratio hue walk gives well separated colors for nearby ids.
  const double hue = std::fmod(0.13 + 0.618033988749895 * class_id, 1.0) * 180.0;
  cv::Mat hsv(1, 1, CV_8UC3, cv::Scalar(hue, 220, 255));
  cv::Mat bgr;
  cv::cvtColor(hsv, bgr, cv::COLOR_HSV2BGR);
  const auto px = bgr.at<cv::Vec3b>(0, 0);
  return {static_cast<double>(px[0]), static_cast<double>(px[1]), static_cast<double>(px[2])};
}

cv::Mat render_boxes(const cv::Mat& image, std::span<const DrawBox> boxes, const RenderOptions& opts) {
  cv::Mat out = image.clone();
  for (const DrawBox& b : boxes) {
    const cv::Point p0(static_cast<int>(std::lround(b.x_min)), static_cast<int>(std::lround(b.y_min)));
    const cv::Point p1(static_cast<int>(std::lround(b.x_max)) - 1, static_cast<int>(std::lround(b.y_max)) - 1);
    const cv::Scalar color = class_color(b.class_id);
    cv::rectangle(out, p0, p1, color, opts.thickness, cv::LINE_8);
    if (!opts.labels) continue;
    char text[48];
    if (b.score) {
      std::snprintf(text, sizeof(text), "%d %.2f", b.class_id, *b.score);
    } else {
      std::snprintf(text, sizeof(text), "%d", b.class_id);
    }
    int baseline = 0;
    const cv::Size ts = cv::getTextSize(text, cv::FONT_HERSHEY_SIMPLEX, 0.4, 1, &baseline);
    const cv::Point org(p0.x, std::max(ts.height, p0.y - 2));
    cv::putText(out, text, org, cv::FONT_HERSHEY_SIMPLEX, 0.4, color, 1, cv::LINE_8);
  }
  return out;
}

cv::Mat render_nms_comparison(const cv::Mat& image, std::span<const Detection> before,
                              std::span<const Detection> after, const RenderOptions& opts) {
  std::vector<DrawBox> left, right;
  for (const auto& d : before) left.push_back(to_draw_box(d));
  for (const auto& d : after) right.push_back(to_draw_box(d));
  cv::Mat out;
  cv::hconcat(render_boxes(image, left, opts), render_boxes(image, right, opts), out);
  return out;
}

}  // namespace mgd
