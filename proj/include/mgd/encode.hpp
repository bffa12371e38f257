#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mgd/anchors.hpp"
#include "mgd/geometry.hpp"
#include "mgd/tensor.hpp"

namespace mgd {

struct Annotation {
  Box box;
  int class_id = 0;
  /// VOC "difficult": excluded from matching penalties and GT counts.
  bool difficult = false;
};

/// Grid cell that holds a box center.
struct CellIndex {
  int cx = 0;
  int cy = 0;
  friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

/// Box parameters relative to its center cell and anchor.
struct TransformParams {
  double tx = 0.0;  ///< in [0, 1)
  double ty = 0.0;  ///< in [0, 1)
  double tw = 0.0;
  double th = 0.0;
};

/// One cell responsible for an object: the center cell shifted by (dx, dy).
struct CellAssignment {
  int cx = 0;  ///< cell column, center column + dx
  int cy = 0;  ///< cell row, center row + dy
  int dx = 0;  ///< in {-1, 0, 1}
  int dy = 0;
  double tx = 0.0;  ///< offset from this cell, in [-1, 2]
  double ty = 0.0;
};

/// Decoded view of one cell of a TargetTensor.
struct CellTarget {
  double tx = 0.0;
  double ty = 0.0;
  double tw = 0.0;
  double th = 0.0;
  double objectness = 0.0;
  int anchor = -1;  ///< -1 when objectness is 0
  int class_id = -1;
};

CellTarget read_cell(const TargetTensor& t, int cx, int cy);
void write_cell(TargetTensor& t, int cx, int cy, const CellTarget& c);

/// Center cell: floor(x / cell_w), floor(y / cell_h). Throws ValidationError
/// when the center is outside the grid.
CellIndex cell_index(const Box& box, const GridSpec& grid);

TransformParams forward_transform(const Box& box, const GridSpec& grid, const Anchor& anchor);

/// Center = (cx + tx) * cell_w, size = anchor * exp(t).
Box inverse_transform(int cx, int cy, const TransformParams& t, const GridSpec& grid,
                      const Anchor& anchor);

/// The center cell plus every in-bounds neighbor whose cell center lies
/// strictly inside the box. Ordered by dy then dx.
std::vector<CellAssignment> multi_grid_cells(const Box& box, const GridSpec& grid);

/// Why an annotation did not make it into the targets.
struct EncodeWarning {
  std::size_t annotation = 0;
  std::string message;
};

/// Owner map value for cells nobody claimed.
inline constexpr int kNoOwner = -1;

struct ScaleEncoding {
  TargetTensor target;
  /// Per cell (row-major), the index of the annotation that won it.
  std::vector<int> owner;
};

struct EncodeResult {
  std::vector<ScaleEncoding> scales;
  /// Annotation index -> scale index, or -1 when dropped.
  std::vector<int> scale_of;
  std::vector<EncodeWarning> warnings;
};

/// Encodes annotations already assigned to one scale. `local_anchor[i]` is
/// the index into `anchors` for annotations[i]; a negative value skips it.
///
/// A cell claimed by several objects goes to the one for which it is the
/// center cell, then to the larger box/cell overlap, then to the lower
/// annotation index.
ScaleEncoding encode_scale(std::span<const Annotation> annotations,
                           std::span<const int> local_anchor, const GridSpec& grid,
                           std::span<const Anchor> anchors, int num_classes);

/// Full ground-truth encoding across scales.
///
/// `anchors` holds grids.size() * k anchors ascending by area; scale s owns
/// anchors [s*k, (s+1)*k). Every grid must cover the same image. Boxes are
/// clipped to the image first; clipped boxes under 1 px^2 are dropped with a
/// warning. Each object is encoded only at the scale of its best-IoU anchor.
EncodeResult encode_ground_truth(std::span<const Annotation> annotations,
                                 std::span<const GridSpec> grids, std::span<const Anchor> anchors,
                                 int num_classes);

/// Uniform scaling plus centered padding into a dst_w x dst_h canvas.
struct Letterbox {
  double scale = 1.0;
  double pad_x = 0.0;
  double pad_y = 0.0;

  static Letterbox fit(int src_w, int src_h, int dst_w, int dst_h);
  Box apply(const Box& b) const;
  /// Maps a canvas box back to source pixels.
  Box invert(const Box& b) const;
};

}  // namespace mgd
