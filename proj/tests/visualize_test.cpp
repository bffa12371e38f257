#include "mgd/visualize.hpp"

#include <gtest/gtest.h>

namespace mgd {
namespace {

cv::Mat diff_mask(const cv::Mat& a, const cv::Mat& b) {
  cv::Mat d;
  cv::absdiff(a, b, d);
  cv::Mat gray;
  cv::transform(d, gray, cv::Matx13f(1, 1, 1));
  return gray > 0;
}

cv::Mat outline_mask(int w, int h, int x0, int y0, int x1, int y1) {
  cv::Mat m = cv::Mat::zeros(h, w, CV_8U);
  for (int y = y0; y <= y1; ++y)
    for (int x = x0; x <= x1; ++x)
      if (x == x0 || x == x1 || y == y0 || y == y1) m.at<uchar>(y, x) = 255;
  return m;
}

TEST(VisualizeTest, NoBoxesIsIdentity) {
  cv::Mat img(60, 80, CV_8UC3, cv::Scalar(10, 20, 30));
  const cv::Mat out = render_boxes(img, std::vector<DrawBox>{});
  EXPECT_EQ(cv::norm(out, img, cv::NORM_INF), 0.0);
}

TEST(VisualizeTest, OneBoxChangesOnlyItsOutline) {
  const cv::Mat img(60, 80, CV_8UC3, cv::Scalar(0, 0, 0));
  const std::vector<DrawBox> boxes{{10, 15, 40, 35, 1, {}}};
  RenderOptions opts;
  opts.labels = false;
  const cv::Mat out = render_boxes(img, boxes, opts);
  const cv::Mat expected = outline_mask(80, 60, 10, 15, 39, 34);
  EXPECT_EQ(cv::countNonZero(diff_mask(out, img) != expected), 0);
  const cv::Vec3b px = out.at<cv::Vec3b>(15, 20);
  const cv::Scalar c = class_color(1);
  EXPECT_EQ(px, cv::Vec3b(uchar(c[0]), uchar(c[1]), uchar(c[2])));
}

TEST(VisualizeTest, LabelsAddText) {
  const cv::Mat img(80, 100, CV_8UC3, cv::Scalar(0, 0, 0));
  const std::vector<DrawBox> boxes{{20, 30, 60, 70, 2, 0.87}};
  RenderOptions opts;
  opts.labels = false;
  const int plain = cv::countNonZero(diff_mask(render_boxes(img, boxes, opts), img));
  opts.labels = true;
  EXPECT_GT(cv::countNonZero(diff_mask(render_boxes(img, boxes, opts), img)), plain);
}

TEST(VisualizeTest, ClassColorsDiffer) {
  for (int a = 0; a < 20; ++a) {
    EXPECT_EQ(class_color(a), class_color(a));
    EXPECT_NE(class_color(a), class_color(a + 1));
  }
}

TEST(VisualizeTest, NmsComparisonPanes) {
  const cv::Mat img(120, 120, CV_8UC3, cv::Scalar(0, 0, 0));
  std::vector<Detection> before;
  for (int i = 0; i < 9; ++i) {
    before.push_back({Box(60 + (i % 3) - 1, 60 + (i / 3) - 1, 50, 50), 0, 0.9 - 0.01 * i});
  }
  const auto after = nms(before);
  ASSERT_EQ(after.size(), 1u);
  RenderOptions opts;
  opts.labels = false;
  const cv::Mat out = render_nms_comparison(img, before, after, opts);
  ASSERT_EQ(out.cols, 240);
  ASSERT_EQ(out.rows, 120);
  const cv::Mat left = out(cv::Rect(0, 0, 120, 120));
  const cv::Mat right = out(cv::Rect(120, 0, 120, 120));
  const cv::Mat one = outline_mask(120, 120, 34, 34, 83, 83);
  EXPECT_EQ(cv::countNonZero(diff_mask(right, img) != one), 0);
  EXPECT_GT(cv::countNonZero(diff_mask(left, img)), cv::countNonZero(one) + 50);
}

TEST(VisualizeTest, DrawBoxConversions) {
  const auto a = to_draw_box(BoxRecord{1, 2, 3, 4, 5, false});
  EXPECT_EQ(a.x_max, 3);
  EXPECT_FALSE(a.score.has_value());
  const auto b = to_draw_box(Detection{Box(10, 10, 4, 6), 1, 0.5});
  EXPECT_EQ(b.x_min, 8);
  EXPECT_EQ(b.y_max, 13);
  EXPECT_EQ(*b.score, 0.5);
}

}  // namespace
}  // namespace mgd
