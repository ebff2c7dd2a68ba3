#pragma once

#include <filesystem>
#include <random>
#include <string>

#include <unistd.h>

#include "bathymap/bathymap.hpp"

namespace bathymap::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("bathymap_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
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

inline GridGeometry small_geometry(std::size_t rows, std::size_t cols, double size = 30.0) {
  return GridGeometry{0.0, 0.0, size, rows, cols, "test"};
}

inline Grid mask_grid(const GridGeometry& g, const std::vector<int>& cells) {
  Grid m(g);
  Band& b = m.add_band("water", kDefaultNodata, 0.0f);
  for (std::size_t i = 0; i < cells.size(); ++i) b.values[i] = static_cast<float>(cells[i]);
  return m;
}

// Six-band scene with per-cell values drawn from `rng` in [lo, hi).
inline Grid random_scene(const GridGeometry& g, std::mt19937_64& rng, double lo = 0.001, double hi = 0.2) {
  std::uniform_real_distribution<double> u(lo, hi);
  Grid s(g);
  for (const auto& name : default_feature_bands()) {
    Band& b = s.add_band(name);
    for (auto& v : b.values) v = static_cast<float>(u(rng));
  }
  return s;
}

inline Grid qa_grid(const GridGeometry& g, float fill = 0.0f) {
  Grid q(g);
  q.add_band("qa", 255.0f, fill);
  return q;
}

}  // namespace bathymap::testing
