#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mgd/geometry.hpp"

namespace mgd {

/// Channel order of the dense head: tx', ty', tw, th, objectness, then k
/// anchor channels, then n class channels.
namespace channel {
inline constexpr int kTx = 0;
inline constexpr int kTy = 1;
inline constexpr int kTw = 2;
inline constexpr int kTh = 3;
inline constexpr int kObj = 4;
inline constexpr int kFirstAnchor = 5;
}  // namespace channel

/// Shape of one dense head: grid cells x (5 + k + n) channels.
struct HeadLayout {
  GridSpec grid;
  int num_anchors = 3;
  int num_classes = 1;

  int channels() const { return 5 + num_anchors + num_classes; }
  int first_class() const { return channel::kFirstAnchor + num_anchors; }
  std::size_t size() const {
    return static_cast<std::size_t>(grid.cell_count()) * static_cast<std::size_t>(channels());
  }
  /// Row-major: row (cy), then column (cx), then channel.
  std::size_t index(int cx, int cy, int ch) const {
    return (static_cast<std::size_t>(cy) * static_cast<std::size_t>(grid.cells_x) +
            static_cast<std::size_t>(cx)) *
               static_cast<std::size_t>(channels()) +
           static_cast<std::size_t>(ch);
  }
  void validate() const;

  friend bool operator==(const HeadLayout&, const HeadLayout&) = default;
};

/// Dense per-cell values laid out by a HeadLayout.
class HeadTensor {
 public:
  HeadTensor() = default;
  explicit HeadTensor(const HeadLayout& layout, double fill = 0.0);

  const HeadLayout& layout() const { return layout_; }
  const GridSpec& grid() const { return layout_.grid; }

  double& at(int cx, int cy, int ch) { return data_[layout_.index(cx, cy, ch)]; }
  double at(int cx, int cy, int ch) const { return data_[layout_.index(cx, cy, ch)]; }

  std::span<double> cell(int cx, int cy) {
    return {data_.data() + layout_.index(cx, cy, 0), static_cast<std::size_t>(layout_.channels())};
  }
  std::span<const double> cell(int cx, int cy) const {
    return {data_.data() + layout_.index(cx, cy, 0), static_cast<std::size_t>(layout_.channels())};
  }

  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  friend bool operator==(const HeadTensor&, const HeadTensor&) = default;

 private:
  HeadLayout layout_;
  std::vector<double> data_;
};

/// Ground-truth encoding for one scale.
class TargetTensor : public HeadTensor {
 public:
  using HeadTensor::HeadTensor;
};

/// Unbounded network outputs for one scale: pre-activation coordinates,
/// raw size log-ratios, and logits for objectness, anchors and classes.
class RawPrediction : public HeadTensor {
 public:
  using HeadTensor::HeadTensor;
};

}  // namespace mgd
