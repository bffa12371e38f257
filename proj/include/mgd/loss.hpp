#pragma once

#include <span>
#include <vector>

#include "mgd/anchors.hpp"
#include "mgd/decode.hpp"
#include "mgd/tensor.hpp"

namespace mgd {

struct LossConfig {
  /// Scale of the IoU-driven coordinate weight -lambda * log(IoU).
  double lambda = 1.0;
  double beta = kDefaultBeta;
  /// IoU is clamped to [iou_floor, 1] before the log.
  double iou_floor = 1e-4;
  /// m: every term is divided by this.
  int batch_size = 1;

  void validate() const;
};

struct LossBreakdown {
  double class_loss = 0.0;
  double anchor_loss = 0.0;
  double coord_loss = 0.0;
  double obj_loss = 0.0;
  double total = 0.0;
};

/// BCE over the class channels of object cells.
double class_loss(const RawPrediction& raw, const TargetTensor& target, const LossConfig& cfg = {});

/// BCE over the anchor channels of object cells.
double anchor_loss(const RawPrediction& raw, const TargetTensor& target, const LossConfig& cfg = {});

/// -log(sigmoid(obj)) on object cells; on empty cells, -log(1 - sigmoid(v))
/// for the objectness, anchor and class channels.
double objectness_loss(const RawPrediction& raw, const TargetTensor& target,
                       const LossConfig& cfg = {});

/// IoU-weighted squared error of square-rooted normalized box parameters.
///
/// Both boxes are decoded with the target's anchor. Centers are normalized
/// over the range a cell can reach, (x + cell_w) / (image_w + 2 cell_w), so
/// the radicand stays positive for predictions that leave the image; sizes
/// are normalized by the image size.
double coord_loss(const RawPrediction& raw, const TargetTensor& target,
                  std::span<const Anchor> anchors, const LossConfig& cfg = {});

/// -lambda * log(max(iou, iou_floor)); exactly 0 at iou = 1.
double coord_weight(double iou, const LossConfig& cfg = {});

/// Per-cell coordinate weights (row-major cells, 0 for empty cells).
std::vector<double> coord_weights(const RawPrediction& raw, const TargetTensor& target,
                                  std::span<const Anchor> anchors, const LossConfig& cfg = {});

/// All four terms. When `frozen_weights` is non-empty it replaces the
/// coordinate weights computed from the current prediction.
LossBreakdown total_loss(const RawPrediction& raw, const TargetTensor& target,
                         std::span<const Anchor> anchors, const LossConfig& cfg = {},
                         std::span<const double> frozen_weights = {});

struct LossAndGrad {
  LossBreakdown loss;
  RawPrediction grad;
};

/// Loss and its gradient with respect to every raw value. The coordinate
/// weight is held constant (no gradient flows through the IoU). Throws
/// NumericError naming the cell when anything becomes non-finite.
LossAndGrad total_loss_and_grad(const RawPrediction& raw, const TargetTensor& target,
                                std::span<const Anchor> anchors, const LossConfig& cfg = {});

/// Sums per-item losses and divides by the item count.
LossBreakdown batch_loss(std::span<const RawPrediction> raws, std::span<const TargetTensor> targets,
                         std::span<const Anchor> anchors, const LossConfig& cfg = {});

}  // namespace mgd
