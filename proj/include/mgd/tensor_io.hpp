#pragma once

#include <filesystem>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "mgd/tensor.hpp"

namespace mgd {

/// Raw tensor file, all integers uint32 and all values float32, little-endian:
///
///   "MGRT" | version (1) | scale count
///   per scale: cells_x | cells_y | cell_w | cell_h | k | n
///              cells_y * cells_x * (5 + k + n) values, row-major
///              (row, column, channel)
inline constexpr char kRawMagic[4] = {'M', 'G', 'R', 'T'};
inline constexpr std::uint32_t kRawVersion = 1;

void write_raw(std::ostream& os, std::span<const RawPrediction> scales);
void write_raw(const std::filesystem::path& path, std::span<const RawPrediction> scales);
std::vector<RawPrediction> read_raw(std::istream& is);
std::vector<RawPrediction> read_raw(const std::filesystem::path& path);

}  // namespace mgd
