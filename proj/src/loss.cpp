#include "mgd/loss.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mgd/encode.hpp"
#include "mgd/error.hpp"

namespace mgd {

void LossConfig::validate() const {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) throw ValidationError("lambda must be > 0");
  validate_beta(beta);
  if (!(iou_floor > 0.0 && iou_floor < 1.0)) throw ValidationError("iou_floor must be in (0, 1)");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
}

namespace {

// -log(sigmoid(-v)) = log(1 + e^v)
double softplus(double v) { return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))); }

// BCE-with-logits for target y in {0, 1}.
double bce(double logit, double y) { return softplus(logit) - y * logit; }

void check_shapes(const RawPrediction& raw, const TargetTensor& target) {
  if (!(raw.layout() == target.layout())) {
    const auto& a = raw.layout();
    const auto& b = target.layout();
    std::ostringstream os;
    os << "shape mismatch: raw " << a.grid.cells_x << "x" << a.grid.cells_y << "x" << a.channels()
       << " vs target " << b.grid.cells_x << "x" << b.grid.cells_y << "x" << b.channels();
    throw ValidationError(os.str());
  }
}

void check_anchors(const TargetTensor& target, std::span<const Anchor> anchors) {
  if (anchors.size() != static_cast<std::size_t>(target.layout().num_anchors)) {
    throw ValidationError("anchor count does not match the tensor's anchor channels");
  }
}

double onehot_bce(const RawPrediction& raw, const TargetTensor& target, int first, int count,
                  const LossConfig& cfg) {
  cfg.validate();
  check_shapes(raw, target);
  const GridSpec& g = raw.grid();
  double sum = 0.0;
  for (int cy = 0; cy < g.cells_y; ++cy) {
    for (int cx = 0; cx < g.cells_x; ++cx) {
      if (target.at(cx, cy, channel::kObj) <= 0.0) continue;
      for (int c = first; c < first + count; ++c) sum += bce(raw.at(cx, cy, c), target.at(cx, cy, c));
    }
  }
  return sum / cfg.batch_size;
}

// Normalized, square-rooted decoded parameters of one cell and their
// derivatives with respect to the four raw coordinate channels.
struct RootCoords {
  double v[4];
  double dv[4];
  double x, y, w, h;  // decoded box in pixels
};

RootCoords predicted_coords(const RawPrediction& raw, int cx, int cy, const Anchor& anchor,
                            double beta) {
  const GridSpec& g = raw.grid();
  const double span_x = g.image_w() + 2.0 * g.cell_w;
  const double span_y = g.image_h() + 2.0 * g.cell_h;
  const double zx = raw.at(cx, cy, channel::kTx);
  const double zy = raw.at(cx, cy, channel::kTy);
  const double zw = raw.at(cx, cy, channel::kTw);
  const double zh = raw.at(cx, cy, channel::kTh);

  RootCoords r;
  r.x = (cx + coord_activation(zx, beta)) * g.cell_w;
  r.y = (cy + coord_activation(zy, beta)) * g.cell_h;
  r.w = anchor.w * std::exp(zw);
  r.h = anchor.h * std::exp(zh);

  const double u = (r.x + g.cell_w) / span_x;
  const double uy = (r.y + g.cell_h) / span_y;
  const double nw = r.w / g.image_w();
  const double nh = r.h / g.image_h();
  r.v[0] = std::sqrt(u);
  r.v[1] = std::sqrt(uy);
  r.v[2] = std::sqrt(nw);
  r.v[3] = std::sqrt(nh);
  // d sqrt(u)/dz = f'(z) * cell / span / (2 sqrt(u)); d sqrt(a e^z / W)/dz = sqrt(.) / 2.
  r.dv[0] = coord_activation_grad(zx, beta) * g.cell_w / span_x / (2.0 * r.v[0]);
  r.dv[1] = coord_activation_grad(zy, beta) * g.cell_h / span_y / (2.0 * r.v[1]);
  r.dv[2] = 0.5 * r.v[2];
  r.dv[3] = 0.5 * r.v[3];
  return r;
}

RootCoords target_coords(const TargetTensor& target, int cx, int cy, const Anchor& anchor) {
  const GridSpec& g = target.grid();
  RootCoords r{};
  r.x = (cx + target.at(cx, cy, channel::kTx)) * g.cell_w;
  r.y = (cy + target.at(cx, cy, channel::kTy)) * g.cell_h;
  r.w = anchor.w * std::exp(target.at(cx, cy, channel::kTw));
  r.h = anchor.h * std::exp(target.at(cx, cy, channel::kTh));
  r.v[0] = std::sqrt((r.x + g.cell_w) / (g.image_w() + 2.0 * g.cell_w));
  r.v[1] = std::sqrt((r.y + g.cell_h) / (g.image_h() + 2.0 * g.cell_h));
  r.v[2] = std::sqrt(r.w / g.image_w());
  r.v[3] = std::sqrt(r.h / g.image_h());
  return r;
}

double raw_iou(const RootCoords& a, const RootCoords& b) {
  const double ax0 = a.x - 0.5 * a.w, ax1 = a.x + 0.5 * a.w, ay0 = a.y - 0.5 * a.h, ay1 = a.y + 0.5 * a.h;
  const double bx0 = b.x - 0.5 * b.w, bx1 = b.x + 0.5 * b.w, by0 = b.y - 0.5 * b.h, by1 = b.y + 0.5 * b.h;
  const double iw = std::min(ax1, bx1) - std::max(ax0, bx0);
  const double ih = std::min(ay1, by1) - std::max(ay0, by0);
  if (!(iw > 0.0) || !(ih > 0.0)) return 0.0;
  const double inter = iw * ih;
  const double uni = (ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter;
  if (!(uni > 0.0)) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

const Anchor& target_anchor(const TargetTensor& target, int cx, int cy,
                            std::span<const Anchor> anchors) {
  const int a = read_cell(target, cx, cy).anchor;
  if (a < 0) {
    std::ostringstream os;
    os << "object cell (" << cx << ", " << cy << ") has no anchor flag set";
    throw ValidationError(os.str());
  }
  return anchors[static_cast<std::size_t>(a)];
}

[[noreturn]] void non_finite(const char* what, int cx, int cy) {
  std::ostringstream os;
  os << "non-finite " << what << " at cell (" << cx << ", " << cy << ")";
  throw NumericError(os.str());
}

}  // namespace

double class_loss(const RawPrediction& raw, const TargetTensor& target, const LossConfig& cfg) {
  return onehot_bce(raw, target, target.layout().first_class(), target.layout().num_classes, cfg);
}

double anchor_loss(const RawPrediction& raw, const TargetTensor& target, const LossConfig& cfg) {
  return onehot_bce(raw, target, channel::kFirstAnchor, target.layout().num_anchors, cfg);
}

double objectness_loss(const RawPrediction& raw, const TargetTensor& target, const LossConfig& cfg) {
  cfg.validate();
  check_shapes(raw, target);
  const GridSpec& g = raw.grid();
  const int channels = raw.layout().channels();
  double sum = 0.0;
  for (int cy = 0; cy < g.cells_y; ++cy) {
    for (int cx = 0; cx < g.cells_x; ++cx) {
      if (target.at(cx, cy, channel::kObj) > 0.0) {
        sum += softplus(-raw.at(cx, cy, channel::kObj));
      } else {
        for (int c = channel::kObj; c < channels; ++c) sum += softplus(raw.at(cx, cy, c));
      }
    }
  }
  return sum / cfg.batch_size;
}

double coord_weight(double iou_score, const LossConfig& cfg) {
  if (iou_score >= 1.0) return 0.0;
  return -cfg.lambda * std::log(std::max(iou_score, cfg.iou_floor));
}

std::vector<double> coord_weights(const RawPrediction& raw, const TargetTensor& target,
                                  std::span<const Anchor> anchors, const LossConfig& cfg) {
  cfg.validate();
  check_shapes(raw, target);
  check_anchors(target, anchors);
  const GridSpec& g = raw.grid();
  std::vector<double> out(static_cast<std::size_t>(g.cell_count()), 0.0);
  for (int cy = 0; cy < g.cells_y; ++cy) {
    for (int cx = 0; cx < g.cells_x; ++cx) {
      if (target.at(cx, cy, channel::kObj) <= 0.0) continue;
      const Anchor& anchor = target_anchor(target, cx, cy, anchors);
      const RootCoords p = predicted_coords(raw, cx, cy, anchor, cfg.beta);
      const RootCoords t = target_coords(target, cx, cy, anchor);
      out[static_cast<std::size_t>(cy * g.cells_x + cx)] = coord_weight(raw_iou(p, t), cfg);
    }
  }
  return out;
}

namespace {

double coord_term(const RawPrediction& raw, const TargetTensor& target,
                  std::span<const Anchor> anchors, const LossConfig& cfg,
                  std::span<const double> weights, RawPrediction* grad) {
  const GridSpec& g = raw.grid();
  double sum = 0.0;
  for (int cy = 0; cy < g.cells_y; ++cy) {
    for (int cx = 0; cx < g.cells_x; ++cx) {
      if (target.at(cx, cy, channel::kObj) <= 0.0) continue;
      const double wgt = weights[static_cast<std::size_t>(cy * g.cells_x + cx)];
      if (wgt == 0.0) continue;
      const Anchor& anchor = target_anchor(target, cx, cy, anchors);
      const RootCoords p = predicted_coords(raw, cx, cy, anchor, cfg.beta);
      const RootCoords t = target_coords(target, cx, cy, anchor);
      double sse = 0.0;
      for (int i = 0; i < 4; ++i) {
        const double diff = t.v[i] - p.v[i];
        sse += diff * diff;
        if (grad != nullptr) grad->at(cx, cy, channel::kTx + i) += -2.0 * diff * p.dv[i] * wgt / cfg.batch_size;
      }
      if (!std::isfinite(sse)) non_finite("coordinate error", cx, cy);
      sum += wgt * sse;
    }
  }
  return sum / cfg.batch_size;
}

}  // namespace

double coord_loss(const RawPrediction& raw, const TargetTensor& target,
                  std::span<const Anchor> anchors, const LossConfig& cfg) {
  const auto w = coord_weights(raw, target, anchors, cfg);
  return coord_term(raw, target, anchors, cfg, w, nullptr);
}

LossBreakdown total_loss(const RawPrediction& raw, const TargetTensor& target,
                         std::span<const Anchor> anchors, const LossConfig& cfg,
                         std::span<const double> frozen_weights) {
  cfg.validate();
  check_shapes(raw, target);
  check_anchors(target, anchors);
  std::vector<double> weights;
  if (frozen_weights.empty()) {
    weights = coord_weights(raw, target, anchors, cfg);
    frozen_weights = weights;
  } else if (frozen_weights.size() != static_cast<std::size_t>(raw.grid().cell_count())) {
    throw ValidationError("frozen coordinate weights must have one entry per cell");
  }
  LossBreakdown out;
  out.class_loss = class_loss(raw, target, cfg);
  out.anchor_loss = anchor_loss(raw, target, cfg);
  out.coord_loss = coord_term(raw, target, anchors, cfg, frozen_weights, nullptr);
  out.obj_loss = objectness_loss(raw, target, cfg);
  out.total = out.class_loss + out.anchor_loss + out.coord_loss + out.obj_loss;
  return out;
}

LossAndGrad total_loss_and_grad(const RawPrediction& raw, const TargetTensor& target,
                                std::span<const Anchor> anchors, const LossConfig& cfg) {
  cfg.validate();
  check_shapes(raw, target);
  check_anchors(target, anchors);
  const HeadLayout& layout = raw.layout();
  const GridSpec& g = layout.grid;
  const int channels = layout.channels();
  const double inv_m = 1.0 / cfg.batch_size;

  LossAndGrad out{{}, RawPrediction(layout)};
  RawPrediction& grad = out.grad;

  for (int cy = 0; cy < g.cells_y; ++cy) {
    for (int cx = 0; cx < g.cells_x; ++cx) {
      const auto v = raw.cell(cx, cy);
      for (double x : v) {
        if (!std::isfinite(x)) non_finite("raw value", cx, cy);
      }
      if (target.at(cx, cy, channel::kObj) > 0.0) {
        const double z = v[channel::kObj];
        out.loss.obj_loss += softplus(-z);
        grad.at(cx, cy, channel::kObj) = (sigmoid(z) - 1.0) * inv_m;
        for (int c = channel::kFirstAnchor; c < channels; ++c) {
          const double y = target.at(cx, cy, c);
          const double l = bce(v[static_cast<std::size_t>(c)], y);
          if (c < layout.first_class()) out.loss.anchor_loss += l; else out.loss.class_loss += l;
          grad.at(cx, cy, c) = (sigmoid(v[static_cast<std::size_t>(c)]) - y) * inv_m;
        }
      } else {
        for (int c = channel::kObj; c < channels; ++c) {
          out.loss.obj_loss += softplus(v[static_cast<std::size_t>(c)]);
          grad.at(cx, cy, c) = sigmoid(v[static_cast<std::size_t>(c)]) * inv_m;
        }
      }
    }
  }
  out.loss.class_loss *= inv_m;
  out.loss.anchor_loss *= inv_m;
  out.loss.obj_loss *= inv_m;

  const auto weights = coord_weights(raw, target, anchors, cfg);
  out.loss.coord_loss = coord_term(raw, target, anchors, cfg, weights, &grad);
  out.loss.total = out.loss.class_loss + out.loss.anchor_loss + out.loss.coord_loss + out.loss.obj_loss;

  if (!std::isfinite(out.loss.total)) throw NumericError("non-finite total loss");
  for (int cy = 0; cy < g.cells_y; ++cy) {
    for (int cx = 0; cx < g.cells_x; ++cx) {
      for (double x : grad.cell(cx, cy)) {
        if (!std::isfinite(x)) non_finite("gradient", cx, cy);
      }
    }
  }
  return out;
}

LossBreakdown batch_loss(std::span<const RawPrediction> raws, std::span<const TargetTensor> targets,
                         std::span<const Anchor> anchors, const LossConfig& cfg) {
  if (raws.size() != targets.size()) throw ValidationError("one target per raw prediction required");
  LossConfig item = cfg;
  item.batch_size = 1;
  LossBreakdown sum;
  for (std::size_t i = 0; i < raws.size(); ++i) {
    const LossBreakdown l = total_loss(raws[i], targets[i], anchors, item);
    sum.class_loss += l.class_loss;
    sum.anchor_loss += l.anchor_loss;
    sum.coord_loss += l.coord_loss;
    sum.obj_loss += l.obj_loss;
  }
  const double m = raws.empty() ? 1.0 : static_cast<double>(raws.size());
  sum.class_loss /= m;
  sum.anchor_loss /= m;
  sum.coord_loss /= m;
  sum.obj_loss /= m;
  sum.total = sum.class_loss + sum.anchor_loss + sum.coord_loss + sum.obj_loss;
  return sum;
}

}  // namespace mgd
