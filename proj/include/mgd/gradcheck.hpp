#pragma once

#include <cstddef>
#include <cstdint>

#include "mgd/loss.hpp"

namespace mgd {

/// Finite-difference check of total_loss_and_grad on random small instances.
struct GradCheckConfig {
  int instances = 100;
  int max_cells = 4;  ///< grid side, cells_x and cells_y drawn from [1, max_cells]
  int max_anchors = 3;
  int max_classes = 3;
  double step = 1e-5;  ///< central-difference step h
  double tolerance = 1e-5;
  /// Relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-4;
  std::uint64_t seed = 0;
  LossConfig loss;

  void validate() const;
};

struct GradCheckReport {
  int instances = 0;
  std::size_t values = 0;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  int worst_instance = -1;
  std::size_t worst_index = 0;
  bool passed = true;
};

/// The coordinate weights are frozen at the unperturbed prediction while
/// differencing, matching the stop-gradient in the analytic gradient.
GradCheckReport run_gradient_check(const GradCheckConfig& cfg);

}  // namespace mgd
