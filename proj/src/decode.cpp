#include "mgd/decode.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mgd/error.hpp"

namespace mgd {

void validate_beta(double beta) {
  if (!(beta > 0.0 && beta <= 1.0)) {
    std::ostringstream os;
    os << "beta must be in (0, 1], got " << beta;
    throw ValidationError(os.str());
  }
}

void DecodeConfig::validate() const {
  validate_beta(beta);
  if (!(conf_thresh >= 0.0 && conf_thresh <= 1.0)) {
    throw ValidationError("confidence threshold must be in [0, 1]");
  }
}

double sigmoid(double v) {
  if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

double coord_activation(double z, double beta) {
  validate_beta(beta);
  const double s = beta * z;
  // Written as distance from the nearer asymptote so that tails keep
  // resolution: 2 - q for s >= 0, -1 + q otherwise.
  if (s >= 0.0) {
    const double e1 = std::exp(-s);
    const double e2 = e1 * e1;
    const double q = 2.0 * e2 / (1.0 + e2) + e1 / (1.0 + e1);
    return 2.0 - q;
  }
  const double e1 = std::exp(s);
  const double e2 = e1 * e1;
  const double q = 2.0 * e2 / (1.0 + e2) + e1 / (1.0 + e1);
  return -1.0 + q;
}

double coord_activation_grad(double z, double beta) {
  validate_beta(beta);
  const double s = beta * z;
  const double th = std::tanh(s);
  const double sg = sigmoid(s);
  return beta * ((1.0 - th * th) + sg * (1.0 - sg));
}

double inverse_coord_activation(double t, double beta) {
  validate_beta(beta);
  if (!std::isfinite(t)) throw ValidationError("cannot invert a non-finite activation value");
  constexpr double kMargin = 1e-9;
  t = std::clamp(t, -1.0 + kMargin, 2.0 - kMargin);
  // Bracket in s = beta * z; f(s) is within 1e-9 of its asymptotes by |s| = 22.
  double lo = -40.0, hi = 40.0;
  double s = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double f = coord_activation(s, 1.0) - t;
    if (f == 0.0) break;
    if (f > 0.0) hi = s; else lo = s;
    const double d = coord_activation_grad(s, 1.0);
    double next = s - f / d;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - s) < 1e-15 * std::max(1.0, std::abs(s))) {
      s = next;
      break;
    }
    s = next;
  }
  return s / beta;
}

namespace {

int argmax(std::span<const double> v) {
  return static_cast<int>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

}  // namespace

std::vector<Detection> decode_predictions(const RawPrediction& raw, std::span<const Anchor> anchors,
                                          const DecodeConfig& cfg, int scale) {
  cfg.validate();
  const HeadLayout& layout = raw.layout();
  if (anchors.size() != static_cast<std::size_t>(layout.num_anchors)) {
    throw ValidationError("anchor count does not match the raw tensor's anchor channels");
  }
  const GridSpec& g = layout.grid;
  std::vector<Detection> out;
  for (int cy = 0; cy < g.cells_y; ++cy) {
    for (int cx = 0; cx < g.cells_x; ++cx) {
      const auto v = raw.cell(cx, cy);
      const double obj = sigmoid(v[channel::kObj]);
      const auto anchor_logits = v.subspan(channel::kFirstAnchor, static_cast<std::size_t>(layout.num_anchors));
      const auto class_logits = v.subspan(static_cast<std::size_t>(layout.first_class()),
                                          static_cast<std::size_t>(layout.num_classes));
      const int a = argmax(anchor_logits);
      const int c = argmax(class_logits);
      const double score = obj * sigmoid(class_logits[static_cast<std::size_t>(c)]);
      if (!(score >= cfg.conf_thresh)) continue;

      const Anchor& anchor = anchors[static_cast<std::size_t>(a)];
      const double x = (cx + coord_activation(v[channel::kTx], cfg.beta)) * g.cell_w;
      const double y = (cy + coord_activation(v[channel::kTy], cfg.beta)) * g.cell_h;
      const double w = anchor.w * std::exp(v[channel::kTw]);
      const double h = anchor.h * std::exp(v[channel::kTh]);
      if (!std::isfinite(w) || !std::isfinite(h) || !(w > 0.0) || !(h > 0.0)) continue;
      double x0 = x - 0.5 * w, y0 = y - 0.5 * h, x1 = x + 0.5 * w, y1 = y + 0.5 * h;
      if (!clip_to_image(x0, y0, x1, y1, g.image_w(), g.image_h())) continue;
      out.push_back({from_corners(CornerBox(x0, y0, x1, y1)), c, std::clamp(score, 0.0, 1.0), a, cx,
                     cy, scale});
    }
  }
  return out;
}

std::vector<Detection> decode_all(std::span<const RawPrediction> raws,
                                  std::span<const Anchor> anchors, const DecodeConfig& cfg) {
  if (raws.empty()) return {};
  if (anchors.size() % raws.size() != 0) {
    throw ValidationError("anchor count must be a multiple of the scale count");
  }
  const std::size_t k = anchors.size() / raws.size();
  std::vector<Detection> out;
  for (std::size_t s = 0; s < raws.size(); ++s) {
    auto d = decode_predictions(raws[s], anchors.subspan(s * k, k), cfg, static_cast<int>(s));
    out.insert(out.end(), d.begin(), d.end());
  }
  return out;
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_thresh) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  std::vector<Detection> kept;
  std::vector<CornerBox> kept_corners;
  for (std::size_t i : order) {
    const Detection& d = dets[i];
    const CornerBox c = to_corners(d.box);
    bool suppressed = false;
    for (std::size_t j = 0; j < kept.size(); ++j) {
      if (kept[j].class_id == d.class_id && iou(kept_corners[j], c) > iou_thresh) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) {
      kept.push_back(d);
      kept_corners.push_back(c);
    }
  }
  return kept;
}

RawPrediction perfect_raw_from_target(const TargetTensor& target, double beta, double logit) {
  validate_beta(beta);
  const HeadLayout& layout = target.layout();
  RawPrediction raw(layout, -logit);
  const GridSpec& g = layout.grid;
  for (int cy = 0; cy < g.cells_y; ++cy) {
    for (int cx = 0; cx < g.cells_x; ++cx) {
      const CellTarget t = read_cell(target, cx, cy);
      auto v = raw.cell(cx, cy);
      if (t.objectness <= 0.0) {
        v[channel::kTx] = 0.0;
        v[channel::kTy] = 0.0;
        v[channel::kTw] = 0.0;
        v[channel::kTh] = 0.0;
        continue;
      }
      v[channel::kTx] = inverse_coord_activation(t.tx, beta);
      v[channel::kTy] = inverse_coord_activation(t.ty, beta);
      v[channel::kTw] = t.tw;
      v[channel::kTh] = t.th;
      v[channel::kObj] = logit;
      v[static_cast<std::size_t>(channel::kFirstAnchor + t.anchor)] = logit;
      v[static_cast<std::size_t>(layout.first_class() + t.class_id)] = logit;
    }
  }
  return raw;
}

}  // namespace mgd
