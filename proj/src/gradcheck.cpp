#include "mgd/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mgd/encode.hpp"
#include "mgd/error.hpp"

namespace mgd {

void GradCheckConfig::validate() const {
  if (instances < 0) throw ValidationError("instances must be >= 0");
  if (max_cells < 1 || max_anchors < 1 || max_classes < 1) {
    throw ValidationError("grid side, anchor and class limits must be >= 1");
  }
  if (!(step > 0.0) || !(tolerance > 0.0) || !(floor >= 0.0)) {
    throw ValidationError("step and tolerance must be > 0, floor >= 0");
  }
  loss.validate();
}

GradCheckReport run_gradient_check(const GradCheckConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<int> side(1, cfg.max_cells), k_dist(1, cfg.max_anchors),
      n_dist(1, cfg.max_classes);
  std::uniform_real_distribution<double> anchor_side(8.0, 120.0), offset(-1.0, 2.0), log_ratio(-1.0, 1.0);
  std::normal_distribution<double> raw_value(0.0, 1.5);
  std::bernoulli_distribution object(0.5);

  GradCheckReport report;
  for (int inst = 0; inst < cfg.instances; ++inst) {
    const GridSpec grid{32, 32, side(rng), side(rng)};
    const int k = k_dist(rng), n = n_dist(rng);
    std::vector<Anchor> anchors(static_cast<std::size_t>(k));
    for (auto& a : anchors) a = {anchor_side(rng), anchor_side(rng)};

    TargetTensor target(HeadLayout{grid, k, n});
    for (int cy = 0; cy < grid.cells_y; ++cy) {
      for (int cx = 0; cx < grid.cells_x; ++cx) {
        if (!object(rng)) continue;
        CellTarget c;
        c.tx = offset(rng);
        c.ty = offset(rng);
        c.tw = log_ratio(rng);
        c.th = log_ratio(rng);
        c.objectness = 1.0;
        c.anchor = std::uniform_int_distribution<int>(0, k - 1)(rng);
        c.class_id = std::uniform_int_distribution<int>(0, n - 1)(rng);
        write_cell(target, cx, cy, c);
      }
    }
    RawPrediction raw(target.layout());
    for (double& v : raw.values()) v = raw_value(rng);

    const auto analytic = total_loss_and_grad(raw, target, anchors, cfg.loss);
    const auto frozen = coord_weights(raw, target, anchors, cfg.loss);
    for (std::size_t i = 0; i < raw.values().size(); ++i) {
      RawPrediction plus = raw, minus = raw;
      plus.values()[i] += cfg.step;
      minus.values()[i] -= cfg.step;
      const double numeric = (total_loss(plus, target, anchors, cfg.loss, frozen).total -
                              total_loss(minus, target, anchors, cfg.loss, frozen).total) /
                             (2.0 * cfg.step);
      const double a = analytic.grad.values()[i];
      const double abs_err = std::abs(a - numeric);
      const double rel_err = abs_err / std::max({std::abs(a), std::abs(numeric), cfg.floor});
      report.max_abs_error = std::max(report.max_abs_error, abs_err);
      if (rel_err > report.max_rel_error || report.worst_instance < 0) {
        report.max_rel_error = std::max(report.max_rel_error, rel_err);
        report.worst_instance = inst;
        report.worst_index = i;
      }
      ++report.values;
    }
    ++report.instances;
  }
  report.passed = report.max_rel_error <= cfg.tolerance;
  return report;
}

}  // namespace mgd
