#pragma once

#include <span>
#include <string>
#include <vector>

#include "mgd/anchors.hpp"
#include "mgd/encode.hpp"
#include "mgd/geometry.hpp"
#include "mgd/tensor.hpp"

namespace mgd {

inline constexpr double kDefaultBeta = 0.25;
inline constexpr double kDefaultConfThresh = 0.5;
inline constexpr double kDefaultNmsThresh = 0.45;

/// Throws ValidationError unless beta is in (0, 1].
void validate_beta(double beta);

/// tanh(beta z) + sigmoid(beta z): strictly increasing from -1 to 2, 0.5 at 0.
double coord_activation(double z, double beta = kDefaultBeta);

/// d/dz of coord_activation.
double coord_activation_grad(double z, double beta = kDefaultBeta);

/// z with coord_activation(z) == t. t is pulled into
/// [-1 + 1e-9, 2 - 1e-9] so the result stays finite.
double inverse_coord_activation(double t, double beta = kDefaultBeta);

double sigmoid(double v);

struct Detection {
  Box box;
  int class_id = 0;
  double score = 0.0;  ///< objectness * class probability
  int anchor_id = 0;
  int cx = 0;  ///< producing cell
  int cy = 0;
  int scale = 0;
};

struct DecodeConfig {
  double beta = kDefaultBeta;
  double conf_thresh = kDefaultConfThresh;
  void validate() const;
};

/// One candidate per cell: argmax anchor and class, box from the activated
/// offsets and the chosen anchor, clipped to the image. Cells whose score is
/// below the threshold, or whose clipped box is empty, are skipped.
std::vector<Detection> decode_predictions(const RawPrediction& raw, std::span<const Anchor> anchors,
                                          const DecodeConfig& cfg = {}, int scale = 0);

/// Decodes every scale; `anchors` holds raws.size() * k anchors.
std::vector<Detection> decode_all(std::span<const RawPrediction> raws,
                                  std::span<const Anchor> anchors, const DecodeConfig& cfg = {});

/// Greedy per-class NMS. Candidates are visited by descending score (ties by
/// input order); one is dropped when its IoU with an already-kept detection
/// of the same class exceeds iou_thresh. Output is in visiting order.
std::vector<Detection> nms(std::span<const Detection> dets, double iou_thresh = kDefaultNmsThresh);

/// Raw outputs that decode exactly to a target: inverted coordinate
/// activation, identity size channels and +/-logit on the one-hot channels.
RawPrediction perfect_raw_from_target(const TargetTensor& target, double beta = kDefaultBeta,
                                      double logit = 30.0);

}  // namespace mgd
