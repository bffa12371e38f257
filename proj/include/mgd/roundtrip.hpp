#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mgd/anchors.hpp"
#include "mgd/manifest.hpp"
#include "mgd/tensor.hpp"

namespace mgd {

struct RoundTripConfig {
  /// Square network input the images are letterboxed into; 0 keeps each
  /// image at its own size (which must then be a multiple of 32).
  int input_size = 416;
  /// Three per scale, ascending by area.
  std::vector<Anchor> anchors;
  double beta = 0.25;
  double tolerance = 1e-4;  ///< max coordinate error, source pixels
  int num_classes = -1;     ///< inferred from the records when negative

  void validate() const;
};

struct RecordIssue {
  std::string record;
  std::string message;
};

struct RoundTripReport {
  std::size_t records = 0;
  std::size_t checked_records = 0;
  std::size_t objects = 0;
  /// Largest |difference| over center and size of any decoded cell, in
  /// source pixels.
  double max_error = 0.0;
  /// cell_histogram[c] = objects decoded from exactly c cells (c = 0 means
  /// dropped or lost every cell to other objects).
  std::array<std::size_t, 10> cell_histogram{};
  std::vector<RecordIssue> invalid_records;  ///< skipped, reported only
  std::vector<RecordIssue> failures;         ///< objects above tolerance
  std::vector<RecordIssue> warnings;

  bool passed() const { return failures.empty(); }
};

/// Encodes every valid record, builds the exactly-matching raw tensors,
/// decodes them and compares each decoded cell against its object. When
/// `raws` is given it receives one set of per-scale tensors per checked
/// record, in record order.
RoundTripReport roundtrip_check(std::span<const ManifestRecord> records, const RoundTripConfig& cfg,
                                std::vector<std::vector<RawPrediction>>* raws = nullptr);

std::string format_roundtrip_report(const RoundTripReport& r);

}  // namespace mgd
