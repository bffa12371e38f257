#pragma once

#include <filesystem>
#include <random>
#include <string>

#include "mgd/geometry.hpp"

namespace mgd::testing {

/// Box with its center inside a w x h image and a positive size.
inline Box random_box(std::mt19937_64& rng, double image_w, double image_h, double max_size) {
  std::uniform_real_distribution<double> cx(0.0, image_w);
  std::uniform_real_distribution<double> cy(0.0, image_h);
  std::uniform_real_distribution<double> size(1.0, max_size);
  return {cx(rng), cy(rng), size(rng), size(rng)};
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("mgd_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace mgd::testing
