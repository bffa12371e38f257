// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "../eval_fixture.hpp"
#include "../synth_fixture.hpp"
#include "../test_util.hpp"
#include "mgd/anchors.hpp"
#include "mgd/augment.hpp"
#include "mgd/decode.hpp"
#include "mgd/encode.hpp"
#include "mgd/eval.hpp"
#include "mgd/loss.hpp"
#include "mgd/manifest.hpp"

namespace fs = std::filesystem;
using namespace mgd;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// ---- 1: round trip ----------------------------------------------------------

// Expected responsible cells: center cell plus in-bounds neighbors whose
// cell center is strictly inside the box.
int expected_cell_count(const Box& b, const GridSpec& g) {
  const int cx = static_cast<int>(std::floor(b.x() / g.cell_w));
  const int cy = static_cast<int>(std::floor(b.y() / g.cell_h));
  int n = 0;
  for (int dy = -1; dy <= 1; ++dy) {
    for (int dx = -1; dx <= 1; ++dx) {
      const int x = cx + dx, y = cy + dy;
      if (x < 0 || y < 0 || x >= g.cells_x || y >= g.cells_y) continue;
      if (dx == 0 && dy == 0) {
        ++n;
        continue;
      }
      const double ccx = (x + 0.5) * g.cell_w, ccy = (y + 0.5) * g.cell_h;
      if (ccx > b.x() - b.w() / 2 && ccx < b.x() + b.w() / 2 && ccy > b.y() - b.h() / 2 && ccy < b.y() + b.h() / 2) {
        ++n;
      }
    }
  }
  return n;
}

Outcome criterion_round_trip() {
  const auto t0 = Clock::now();
  const int image = 416, n_boxes = 10000, num_classes = 3;
  const auto grids = default_grids(image, image);
  const auto anchors = default_anchors();
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<std::size_t> pick_anchor(0, anchors.size() - 1);
  std::uniform_real_distribution<double> jitter(-0.4, 0.4), unit(0.0, 1.0);
  std::uniform_int_distribution<int> pick_class(0, num_classes - 1);

  double max_err = 0.0, t_min = 1e9, t_max = -1e9;
  int per_scale[3] = {0, 0, 0};
  int cell_mismatch = 0, missing = 0;
  for (int i = 0; i < n_boxes; ++i) {
    const Anchor& a = anchors[pick_anchor(rng)];
    const double w = std::min(a.w * std::exp(jitter(rng)), image - 2.0);
    const double h = std::min(a.h * std::exp(jitter(rng)), image - 2.0);
    const double x = w / 2 + unit(rng) * (image - w), y = h / 2 + unit(rng) * (image - h);
    const Annotation ann{Box(x, y, w, h), pick_class(rng), false};
    const auto enc = encode_ground_truth(std::span(&ann, 1), grids, anchors, num_classes);
    const int s = enc.scale_of[0];
    if (s < 0) {
      ++missing;
      continue;
    }
    ++per_scale[s];
    const TargetTensor& target = enc.scales[s].target;
    const GridSpec& g = grids[s];
    int object_cells = 0;
    for (int cy = 0; cy < g.cells_y; ++cy) {
      for (int cx = 0; cx < g.cells_x; ++cx) {
        if (target.at(cx, cy, channel::kObj) != 1.0) continue;
        ++object_cells;
        for (int ch : {channel::kTx, channel::kTy}) {
          t_min = std::min(t_min, target.at(cx, cy, ch));
          t_max = std::max(t_max, target.at(cx, cy, ch));
        }
      }
    }
    if (object_cells != expected_cell_count(ann.box, g)) ++cell_mismatch;

    std::vector<RawPrediction> raws;
    for (const auto& sc : enc.scales) raws.push_back(perfect_raw_from_target(sc.target));
    const auto dets = decode_all(raws, anchors);
    if (static_cast<int>(dets.size()) != object_cells) ++cell_mismatch;
    for (const auto& d : dets) {
      max_err = std::max({max_err, std::abs(d.box.x() - x), std::abs(d.box.y() - y), std::abs(d.box.w() - w),
                          std::abs(d.box.h() - h)});
    }
  }
  const double secs = seconds_since(t0);
  const bool all_scales = per_scale[0] > 0 && per_scale[1] > 0 && per_scale[2] > 0;
  const bool pass = max_err <= 1e-6 && t_min >= -1.0 && t_max <= 2.0 && cell_mismatch == 0 && missing == 0 &&
                    all_scales && secs < 10.0;
  return {pass, fmt("%d boxes (scales %d/%d/%d), max error %.3e px (tol 1e-6), t' in [%.4f, %.4f], "
                    "cell mismatches %d, dropped %d, %.2f s (limit 10 s)",
                    n_boxes, per_scale[0], per_scale[1], per_scale[2], max_err, t_min, t_max, cell_mismatch,
                    missing, secs)};
}

// ---- 2: multi-grid redundancy -----------------------------------------------

int encoded_cells(const Box& box, const GridSpec& g, const Anchor& anchor) {
  const Annotation ann{box, 0, false};
  const int local = 0;
  const auto enc = encode_scale(std::span(&ann, 1), std::span(&local, 1), g, std::span(&anchor, 1), 1);
  int n = 0;
  for (int cy = 0; cy < g.cells_y; ++cy) {
    for (int cx = 0; cx < g.cells_x; ++cx) n += enc.target.at(cx, cy, channel::kObj) == 1.0;
  }
  return n;
}

Outcome criterion_redundancy() {
  std::mt19937_64 rng(202);
  std::uniform_int_distribution<int> stride_pick(0, 2);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int trials = 5000;
  int large_bad = 0, small_bad = 0;
  for (int i = 0; i < trials; ++i) {
    const int stride = 8 << stride_pick(rng);
    const GridSpec g = GridSpec::for_image(416, 416, stride);
    const Anchor anchor{50.0, 50.0};

    // Larger than 3x3 cells, centered mid-cell, away from the grid border.
    std::uniform_int_distribution<int> cell(2, g.cells_x - 3);
    const double cx = (cell(rng) + 0.5) * stride, cy = (cell(rng) + 0.5) * stride;
    const double max_w = std::min(2 * cx, 2 * (416 - cx)), max_h = std::min(2 * cy, 2 * (416 - cy));
    const double w = 3.0 * stride + 1e-3 + unit(rng) * (max_w - 3.0 * stride - 1e-3);
    const double h = 3.0 * stride + 1e-3 + unit(rng) * (max_h - 3.0 * stride - 1e-3);
    const Box big(cx, cy, w, h);
    if (multi_grid_cells(big, g).size() != 9 || encoded_cells(big, g, anchor) != 9) ++large_bad;

    // Smaller than one cell, anywhere.
    const double sw = (0.05 + 0.949 * unit(rng)) * stride, sh = (0.05 + 0.949 * unit(rng)) * stride;
    const Box small(sw / 2 + unit(rng) * (416 - sw), sh / 2 + unit(rng) * (416 - sh), sw, sh);
    if (multi_grid_cells(small, g).size() != 1 || encoded_cells(small, g, anchor) != 1) ++small_bad;
  }
  return {large_bad == 0 && small_bad == 0,
          fmt("%d large boxes: %d not 9 cells; %d small boxes: %d not 1 cell", trials, large_bad, trials, small_bad)};
}

// ---- 3: activation bounds -----------------------------------------------------

Outcome criterion_activation() {
  const int n = 100000;
  double lo = 1e9, hi = -1e9, prev = -std::numeric_limits<double>::infinity();
  int inside_bad = 0, decreasing = 0, flat = 0;
  for (int i = 0; i < n; ++i) {
    const double z = -100.0 + 200.0 * i / (n - 1);
    const double f = coord_activation(z);
    lo = std::min(lo, f);
    hi = std::max(hi, f);
    if (!(f > -1.0 && f < 2.0)) ++inside_bad;
    if (f < prev) ++decreasing;
    if (f == prev) ++flat;
    prev = f;
  }
  const double at0 = coord_activation(0.0);
  return {inside_bad == 0 && decreasing == 0 && at0 == 0.5,
          fmt("%d points on [-100, 100]: range [%.17g, %.17g], outside (-1, 2) %d, decreasing steps %d, "
              "equal steps %d, f(0) = %.17g",
              n, lo, hi, inside_bad, decreasing, flat, at0)};
}

// ---- 4: gradient oracle -------------------------------------------------------

struct Instance {
  RawPrediction raw;
  TargetTensor target;
  std::vector<Anchor> anchors;
};

Instance random_instance(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> side(1, 4), kdist(1, 3), ndist(1, 3);
  std::uniform_real_distribution<double> unit(0.0, 1.0), anchor_size(8.0, 120.0);
  std::normal_distribution<double> logit(0.0, 1.5);
  HeadLayout layout;
  layout.grid = GridSpec{32, 32, side(rng), side(rng)};
  layout.num_anchors = kdist(rng);
  layout.num_classes = ndist(rng);
  Instance inst{RawPrediction(layout), TargetTensor(layout), {}};
  for (int a = 0; a < layout.num_anchors; ++a) inst.anchors.push_back({anchor_size(rng), anchor_size(rng)});
  std::uniform_int_distribution<int> pick_anchor(0, layout.num_anchors - 1), pick_class(0, layout.num_classes - 1);
  for (int cy = 0; cy < layout.grid.cells_y; ++cy) {
    for (int cx = 0; cx < layout.grid.cells_x; ++cx) {
      if (unit(rng) < 0.5) {
        inst.target.at(cx, cy, channel::kTx) = -1.0 + 3.0 * unit(rng);
        inst.target.at(cx, cy, channel::kTy) = -1.0 + 3.0 * unit(rng);
        inst.target.at(cx, cy, channel::kTw) = -1.0 + 2.0 * unit(rng);
        inst.target.at(cx, cy, channel::kTh) = -1.0 + 2.0 * unit(rng);
        inst.target.at(cx, cy, channel::kObj) = 1.0;
        inst.target.at(cx, cy, channel::kFirstAnchor + pick_anchor(rng)) = 1.0;
        inst.target.at(cx, cy, layout.first_class() + pick_class(rng)) = 1.0;
      }
    }
  }
  for (double& v : inst.raw.values()) v = logit(rng);
  return inst;
}

Outcome criterion_gradient() {
  const auto t0 = Clock::now();
  const int instances = 100;
  const double h = 1e-5, floor = 1e-4, tol = 1e-5;
  std::mt19937_64 rng(404);
  double max_rel = 0.0;
  std::size_t values = 0, over = 0;
  for (int i = 0; i < instances; ++i) {
    Instance inst = random_instance(rng);
    const auto analytic = total_loss_and_grad(inst.raw, inst.target, inst.anchors);
    const auto frozen = coord_weights(inst.raw, inst.target, inst.anchors);
    auto& v = inst.raw.values();
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double keep = v[j];
      v[j] = keep + h;
      const double up = total_loss(inst.raw, inst.target, inst.anchors, {}, frozen).total;
      v[j] = keep - h;
      const double down = total_loss(inst.raw, inst.target, inst.anchors, {}, frozen).total;
      v[j] = keep;
      const double numeric = (up - down) / (2 * h);
      const double a = analytic.grad.values()[j];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      max_rel = std::max(max_rel, rel);
      over += rel > tol;
      ++values;
    }
  }
  const double secs = seconds_since(t0);
  return {max_rel <= tol && secs < 60.0,
          fmt("%d instances, %zu values, h = 1e-5, max relative error %.3e (tol 1e-5, denominator floor 1e-4), "
              "%zu over, %.2f s (limit 60 s)",
              instances, values, max_rel, over, secs)};
}

// ---- 5: loss sanity -----------------------------------------------------------

Outcome criterion_loss_sanity() {
  std::mt19937_64 rng(505);
  const auto anchors = default_anchors();
  const auto grids = default_grids(416, 416);
  std::uniform_real_distribution<double> unit(0.0, 1.0), size(6.0, 400.0);
  std::uniform_int_distribution<int> count(1, 6), cls(0, 4);
  double worst_total = 0.0;
  const int images = 50;
  for (int i = 0; i < images; ++i) {
    std::vector<Annotation> anns;
    const int n = count(rng);
    for (int k = 0; k < n; ++k) {
      const double w = size(rng), h = size(rng);
      anns.push_back({Box(w / 2 + unit(rng) * (416 - w), h / 2 + unit(rng) * (416 - h), w, h), cls(rng), false});
    }
    const auto enc = encode_ground_truth(anns, grids, anchors, 5);
    for (std::size_t s = 0; s < enc.scales.size(); ++s) {
      const auto& target = enc.scales[s].target;
      const auto raw = perfect_raw_from_target(target);
      const std::span<const Anchor> scale_anchors(anchors.data() + 3 * s, 3);
      worst_total = std::max(worst_total, total_loss(raw, target, scale_anchors).total);
    }
  }

  // Raw centers at z = 0 decode to exactly 0.5 and raw sizes copy the
  // target, so every object cell has IoU exactly 1.
  HeadLayout layout{GridSpec{32, 32, 4, 3}, 2, 2};
  TargetTensor target(layout);
  RawPrediction raw(layout, -30.0);
  const std::vector<Anchor> pair{{40.0, 30.0}, {90.0, 120.0}};
  int object_cells = 0;
  for (int cy = 0; cy < 3; ++cy) {
    for (int cx = 0; cx < 4; ++cx) {
      if ((cx + cy) % 2 != 0) continue;
      CellTarget c{0.5, 0.5, 0.1 * cx - 0.2, 0.3 - 0.1 * cy, 1.0, (cx + cy) % 4 == 0 ? 0 : 1, cy % 2};
      write_cell(target, cx, cy, c);
      for (int ch = 0; ch < layout.channels(); ++ch) raw.at(cx, cy, ch) = target.at(cx, cy, ch) > 0.5 ? 30.0 : -30.0;
      raw.at(cx, cy, channel::kTx) = 0.0;
      raw.at(cx, cy, channel::kTy) = 0.0;
      raw.at(cx, cy, channel::kTw) = c.tw;
      raw.at(cx, cy, channel::kTh) = c.th;
      ++object_cells;
    }
  }
  const double coord = coord_loss(raw, target, pair);
  const auto weights = coord_weights(raw, target, pair);
  const bool weights_zero = std::all_of(weights.begin(), weights.end(), [](double w) { return w == 0.0; });
  const bool weight_at_one = coord_weight(1.0) == 0.0;
  return {worst_total < 1e-6 && coord == 0.0 && weights_zero && weight_at_one,
          fmt("%d encoded images: max perfect total loss %.3e (limit 1e-6); IoU = 1 on %d cells: coord term %.17g, "
              "all weights zero %s, weight(1) = %.17g",
              images, worst_total, object_cells, coord, weights_zero ? "yes" : "no", coord_weight(1.0))};
}

// ---- 6: k-means oracle --------------------------------------------------------

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double oracle_iou(double w1, double h1, double w2, double h2) {
  const double inter = std::min(w1, w2) * std::min(h1, h2);
  return inter / (w1 * h1 + w2 * h2 - inter);
}

double oracle_score(const std::vector<BoxSize>& boxes, const std::vector<Anchor>& centroids) {
  double sum = 0.0;
  for (const auto& b : boxes) {
    double best = 0.0;
    for (const auto& c : centroids) best = std::max(best, oracle_iou(b.w, b.h, c.w, c.h));
    sum += best;
  }
  return sum / static_cast<double>(boxes.size());
}

// Best mean IoU over every partition into k non-empty groups with median
// centroids.
double brute_force_kmeans(const std::vector<BoxSize>& boxes, int k) {
  const int n = static_cast<int>(boxes.size());
  std::vector<int> label(n, 0);
  double best = 0.0;
  std::function<void(int)> rec = [&](int i) {
    if (i == n) {
      std::vector<Anchor> cents;
      for (int c = 0; c < k; ++c) {
        std::vector<double> ws, hs;
        for (int j = 0; j < n; ++j) {
          if (label[j] == c) {
            ws.push_back(boxes[j].w);
            hs.push_back(boxes[j].h);
          }
        }
        if (ws.empty()) return;
        cents.push_back({median(ws), median(hs)});
      }
      best = std::max(best, oracle_score(boxes, cents));
      return;
    }
    for (int c = 0; c < k; ++c) {
      label[i] = c;
      rec(i + 1);
    }
  };
  rec(0);
  return best;
}

Outcome criterion_kmeans() {
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<int> kdist(1, 3), side(4, 200);
  const int sets = 25;
  double worst = 0.0;
  int mismatches = 0;
  for (int s = 0; s < sets; ++s) {
    const int k = kdist(rng);
    const int n = std::uniform_int_distribution<int>(k, 6)(rng);
    std::vector<BoxSize> boxes;
    while (static_cast<int>(boxes.size()) < n) {
      const BoxSize b{double(side(rng)), double(side(rng))};
      if (std::find(boxes.begin(), boxes.end(), b) == boxes.end()) boxes.push_back(b);
    }
    ClusterConfig cfg;
    cfg.k = k;
    cfg.seed = 1000 + s;
    const auto result = kmeans_iou(boxes, cfg);
    const double got = oracle_score(boxes, result.anchors);
    const double diff = std::abs(brute_force_kmeans(boxes, k) - got);
    worst = std::max(worst, diff);
    mismatches += diff > 1e-4;
  }
  return {mismatches == 0, fmt("%d sets (n <= 6, k <= 3): max |mean IoU - brute force| %.3e (tol 1e-4), %d mismatches",
                               sets, worst, mismatches)};
}

// ---- 7: NMS oracle ------------------------------------------------------------

double corner_iou(const Box& a, const Box& b) {
  const double ax0 = a.x() - a.w() / 2, ax1 = a.x() + a.w() / 2, ay0 = a.y() - a.h() / 2, ay1 = a.y() + a.h() / 2;
  const double bx0 = b.x() - b.w() / 2, bx1 = b.x() + b.w() / 2, by0 = b.y() - b.h() / 2, by1 = b.y() + b.h() / 2;
  const double iw = std::min(ax1, bx1) - std::max(ax0, bx0);
  const double ih = std::min(ay1, by1) - std::max(ay0, by0);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  return inter / ((ax1 - ax0) * (ay1 - ay0) + (bx1 - bx0) * (by1 - by0) - inter);
}

// Repeatedly take the best remaining detection (earliest on ties) and drop
// every remaining same-class detection overlapping it above the threshold.
std::vector<Detection> reference_nms(std::vector<Detection> rest, double thresh) {
  std::vector<Detection> kept;
  while (!rest.empty()) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < rest.size(); ++i) {
      if (rest[i].score > rest[best].score) best = i;
    }
    const Detection top = rest[best];
    kept.push_back(top);
    rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(best));
    std::vector<Detection> next;
    for (const auto& d : rest) {
      if (!(d.class_id == top.class_id && corner_iou(d.box, top.box) > thresh)) next.push_back(d);
    }
    rest = std::move(next);
  }
  return kept;
}

bool same_bits(const Detection& a, const Detection& b) {
  return a.box == b.box && a.score == b.score && a.class_id == b.class_id && a.anchor_id == b.anchor_id &&
         a.cx == b.cx && a.cy == b.cy && a.scale == b.scale;
}

Outcome criterion_nms() {
  std::mt19937_64 rng(707);
  std::uniform_int_distribution<int> count(0, 50), cls(0, 2), coarse(1, 10);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int sets = 1000;
  int mismatches = 0;
  std::size_t kept_total = 0;
  for (int s = 0; s < sets; ++s) {
    const int n = count(rng);
    const bool ties = s % 2 == 1;
    std::vector<Detection> dets;
    for (int i = 0; i < n; ++i) {
      Detection d{Box(20 + unit(rng) * 160, 20 + unit(rng) * 160, 10 + unit(rng) * 60, 10 + unit(rng) * 60),
                  cls(rng), ties ? coarse(rng) / 10.0 : unit(rng), i % 3, i, i / 7, 0};
      dets.push_back(d);
    }
    const double thresh = s % 3 == 0 ? kDefaultNmsThresh : 0.1 + 0.8 * unit(rng);
    const auto got = nms(dets, thresh);
    const auto want = reference_nms(dets, thresh);
    kept_total += want.size();
    bool ok = got.size() == want.size();
    for (std::size_t i = 0; ok && i < got.size(); ++i) ok = same_bits(got[i], want[i]);
    mismatches += !ok;
  }
  return {mismatches == 0, fmt("%d sets of 0-50 detections (half with tied scores), %zu kept in total, %d mismatches",
                               sets, kept_total, mismatches)};
}

// ---- 8: eval oracle -----------------------------------------------------------

Outcome criterion_eval() {
  const auto gts = testing::eval_fixture_gt();
  const auto r = evaluate(testing::eval_fixture_dets(), gts);
  // Interpolated precision at recall 0, 0.1, ..., 1, worked out by hand.
  const double p0[11] = {1, 1, 1, 1, 2.0 / 3, 2.0 / 3, 2.0 / 3, 0.6, 0.6, 0.6, 0.6};
  const double p1[11] = {1, 1, 1, 1, 0.5, 0.5, 0.5, 0, 0, 0, 0};
  double want0 = 0.0, want1 = 0.0;
  for (int i = 0; i < 11; ++i) {
    want0 += p0[i];
    want1 += p1[i];
  }
  want0 /= 11;
  want1 /= 11;
  double ap0 = -1, ap1 = -1;
  for (const auto& c : r.classes) {
    if (c.class_id == 0 && c.ap) ap0 = *c.ap;
    if (c.class_id == 1 && c.ap) ap1 = *c.ap;
  }
  const double d0 = std::abs(ap0 - want0), d1 = std::abs(ap1 - want1);
  const auto perfect = evaluate(testing::perfect_dets(gts), gts);
  const bool pass = d0 <= 1e-12 && d1 <= 1e-12 && perfect.map == 1.0;
  return {pass, fmt("11-point AP class 0 %.17g (hand %.17g, diff %.1e), class 1 %.17g (hand %.17g, diff %.1e), "
                    "tol 1e-12; perfect mAP %.17g",
                    ap0, want0, d0, ap1, want1, d1, perfect.map)};
}

// ---- 9: synthesis validity ----------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

Outcome criterion_synthesis() {
  testing::TempDir dir("acceptance_synth");
  testing::write_synthesis_inputs(dir.path(), 200, 8, 909);
  SynthesisConfig cfg;
  cfg.output_count = 1000;
  cfg.seed = 99;
  const int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  const auto t0 = Clock::now();
  const auto first = synthesize_dataset(cfg, dir / "sources.jsonl", dir / "bg", dir / "run1", jobs);
  const double secs = seconds_since(t0);
  const auto second = synthesize_dataset(cfg, dir / "sources.jsonl", dir / "bg", dir / "run2", jobs);

  int overlaps = 0, out_of_bounds = 0, margin_bad = 0, unpaired = 0;
  std::size_t boxes = 0;
  double min_margin = 1e9;
  for (const auto& r : first.records) {
    if (r.patches.size() != r.boxes.size()) {
      ++unpaired;
      continue;
    }
    for (std::size_t i = 0; i < r.patches.size(); ++i) {
      const auto& p = r.patches[i];
      for (std::size_t j = i + 1; j < r.patches.size(); ++j) {
        const auto& o = r.patches[j];
        const int iw = std::min(p.x + p.w, o.x + o.w) - std::max(p.x, o.x);
        const int ih = std::min(p.y + p.h, o.y + o.h) - std::max(p.y, o.y);
        overlaps += iw > 0 && ih > 0;
      }
      const auto& b = r.boxes[i];
      ++boxes;
      if (b.x_min < 0 || b.y_min < 0 || b.x_max > r.width || b.y_max > r.height || p.x < 0 || p.y < 0 ||
          p.x + p.w > r.width || p.y + p.h > r.height) {
        ++out_of_bounds;
      }
      const double margin = std::min({b.x_min - p.x, b.y_min - p.y, p.x + p.w - b.x_max, p.y + p.h - b.y_max});
      min_margin = std::min(min_margin, margin);
      margin_bad += margin < cfg.border_min;
    }
  }

  bool identical = first.records.size() == second.records.size() &&
                   slurp(dir / "run1" / "manifest.jsonl") == slurp(dir / "run2" / "manifest.jsonl");
  for (std::size_t i = 0; identical && i < first.records.size(); ++i) {
    identical = slurp(dir / "run1" / first.records[i].image) == slurp(dir / "run2" / second.records[i].image);
  }
  const bool pass = first.records.size() == 1000 && overlaps == 0 && out_of_bounds == 0 && margin_bad == 0 &&
                    unpaired == 0 && boxes > 0 && identical && secs < 300.0;
  return {pass, fmt("%zu images, %zu boxes: patch overlaps %d, out of bounds %d, margin < %d px %d (min %.0f px), "
                    "unpaired %d, regeneration %s, %.1f s per run with %d jobs (limit 300 s)",
                    first.records.size(), boxes, overlaps, out_of_bounds, cfg.border_min, margin_bad, min_margin,
                    unpaired, identical ? "byte-identical" : "DIFFERS", secs, jobs)};
}

// ---- 10: end to end -----------------------------------------------------------

std::vector<ManifestRecord> end_to_end_fixture() {
  auto rec = [](std::string id, int w, int h, std::vector<BoxRecord> boxes) {
    return ManifestRecord{id, id + ".png", w, h, std::move(boxes), {}};
  };
  return {
      rec("e01", 500, 375, {{10, 20, 200, 300, 0}, {300, 100, 330, 140, 1}}),
      rec("e02", 640, 480, {{0, 0, 640, 480, 1}}),
      rec("e03", 416, 416, {{100, 100, 108, 108, 2}, {200, 200, 380, 260, 0}}),
      rec("e04", 320, 240, {{20, 30, 120, 200, 2}, {150, 40, 300, 220, 0}}),
      rec("e05", 800, 600, {{50, 60, 90, 100, 0}, {400, 300, 760, 580, 1}, {600, 40, 640, 80, 2}}),
      rec("e06", 300, 500, {{30, 40, 270, 460, 2}}),
      rec("e07", 1024, 768, {{100, 100, 180, 160, 0}, {300, 300, 340, 320, 0}, {700, 200, 1000, 700, 1},
                             {10, 600, 60, 760, 2}}),
      rec("e08", 416, 234, {{5, 5, 60, 60, 1}, {200, 100, 400, 230, 2}}),
      rec("e09", 200, 200, {{80, 80, 120, 120, 0}}),
      rec("e10", 640, 360, {{0, 200, 100, 360, 1}, {300, 50, 340, 90, 1}, {450, 150, 630, 350, 0}}),
  };
}

Outcome criterion_end_to_end() {
  const auto records = end_to_end_fixture();
  const auto anchors = default_anchors();
  const int input = 416, num_classes = 3;
  const auto grids = default_grids(input, input);
  std::vector<ImageDetection> all;
  std::size_t objects = 0, candidates = 0;
  for (const auto& r : records) {
    const Letterbox lb = Letterbox::fit(r.width, r.height, input, input);
    std::vector<Annotation> anns;
    for (const auto& b : r.boxes) {
      anns.push_back({lb.apply(Box((b.x_min + b.x_max) / 2, (b.y_min + b.y_max) / 2, b.x_max - b.x_min,
                                  b.y_max - b.y_min)),
                      b.class_id, false});
    }
    objects += anns.size();
    const auto enc = encode_ground_truth(anns, grids, anchors, num_classes);
    std::vector<RawPrediction> raws;
    for (const auto& s : enc.scales) raws.push_back(perfect_raw_from_target(s.target));
    std::vector<Detection> dets;
    for (auto d : decode_all(raws, anchors)) {
      d.box = lb.invert(d.box);
      dets.push_back(d);
    }
    candidates += dets.size();
    for (const auto& d : nms(dets)) all.push_back(to_image_detection(r.id, d));
  }
  const auto report = evaluate(all, records);
  return {report.map == 1.0 && all.size() == objects,
          fmt("%zu images, %zu objects, %zu decoded candidates, %zu after NMS, mAP %.17g", records.size(), objects,
              candidates, all.size(), report.map)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"round-trip exactness", criterion_round_trip},
      {"multi-grid redundancy", criterion_redundancy},
      {"activation bounds", criterion_activation},
      {"gradient oracle", criterion_gradient},
      {"loss sanity", criterion_loss_sanity},
      {"k-means oracle", criterion_kmeans},
      {"NMS oracle", criterion_nms},
      {"eval oracle", criterion_eval},
      {"synthesis validity", criterion_synthesis},
      {"end-to-end fixture", criterion_end_to_end},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
