#pragma once

#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bathymap/error.hpp"

namespace bathymap {

inline constexpr float kDefaultNodata = -9999.0f;

struct PixelIndex {
  std::size_t row = 0;
  std::size_t col = 0;

  auto operator<=>(const PixelIndex&) const = default;
};

// Row 0 is the northernmost row: origin_(x, y) is the top-left outer corner
// and y decreases as the row index grows.
struct GridGeometry {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double pixel_size = 30.0;
  std::size_t n_rows = 1;
  std::size_t n_cols = 1;
  std::string crs_tag;

  bool operator==(const GridGeometry&) const = default;

  std::size_t cell_count() const { return n_rows * n_cols; }
  std::size_t index(PixelIndex p) const { return p.row * n_cols + p.col; }
  std::size_t index(std::size_t row, std::size_t col) const { return row * n_cols + col; }
  PixelIndex pixel(std::size_t index) const { return {index / n_cols, index % n_cols}; }

  void validate() const {
    if (!(pixel_size > 0.0) || !std::isfinite(pixel_size))
      throw DataError("grid geometry: pixel_size must be positive and finite");
    if (n_rows == 0 || n_cols == 0) throw DataError("grid geometry: empty dimensions");
    if (!std::isfinite(origin_x) || !std::isfinite(origin_y))
      throw DataError("grid geometry: non-finite origin");
  }
};

// Half-open pixel footprints: x in [ox + c*s, ox + (c+1)*s), y in (oy - (r+1)*s, oy - r*s].
// Indices come from floor((x - ox)/s) and floor((oy - y)/s).
inline std::optional<PixelIndex> world_to_pixel(const GridGeometry& g, double x, double y) {
  if (!std::isfinite(x) || !std::isfinite(y)) return std::nullopt;
  const double c = std::floor((x - g.origin_x) / g.pixel_size);
  const double r = std::floor((g.origin_y - y) / g.pixel_size);
  if (c < 0.0 || r < 0.0 || c >= static_cast<double>(g.n_cols) ||
      r >= static_cast<double>(g.n_rows))
    return std::nullopt;
  return PixelIndex{static_cast<std::size_t>(r), static_cast<std::size_t>(c)};
}

inline std::pair<double, double> pixel_center(const GridGeometry& g, PixelIndex p) {
  return {g.origin_x + (static_cast<double>(p.col) + 0.5) * g.pixel_size,
          g.origin_y - (static_cast<double>(p.row) + 0.5) * g.pixel_size};
}

struct Band {
  std::string name;
  float nodata = kDefaultNodata;
  std::vector<float> values;

  bool valid(std::size_t i) const { return values[i] != nodata && std::isfinite(values[i]); }

  bool operator==(const Band&) const = default;
};

// Multi-band raster. All bands share the grid dimensions.
class Grid {
 public:
  Grid() = default;
  explicit Grid(GridGeometry geometry) : geometry_(std::move(geometry)) { geometry_.validate(); }

  const GridGeometry& geometry() const { return geometry_; }
  std::size_t band_count() const { return bands_.size(); }
  const std::deque<Band>& bands() const { return bands_; }

  Band& add_band(std::string name, float nodata = kDefaultNodata) {
    return add_band(std::move(name), nodata, nodata);
  }

  Band& add_band(std::string name, float nodata, float fill) {
    if (find_band(name)) throw DataError("duplicate band name '" + name + "'");
    bands_.push_back(Band{std::move(name), nodata,
                          std::vector<float>(geometry_.cell_count(), fill)});
    return bands_.back();
  }

  Band& add_band(Band band) {
    if (band.values.size() != geometry_.cell_count())
      throw DataError("band '" + band.name + "' size does not match grid dimensions");
    if (find_band(band.name)) throw DataError("duplicate band name '" + band.name + "'");
    bands_.push_back(std::move(band));
    return bands_.back();
  }

  std::optional<std::size_t> find_band(std::string_view name) const {
    for (std::size_t i = 0; i < bands_.size(); ++i)
      if (bands_[i].name == name) return i;
    return std::nullopt;
  }

  const Band& band(std::size_t i) const { return bands_.at(i); }
  Band& band(std::size_t i) { return bands_.at(i); }

  const Band& band(std::string_view name) const { return bands_[require_band(name)]; }
  Band& band(std::string_view name) { return bands_[require_band(name)]; }

  std::size_t require_band(std::string_view name) const {
    if (auto i = find_band(name)) return *i;
    throw DataError("grid has no band named '" + std::string(name) + "'");
  }

  std::size_t valid_count(std::size_t band_index) const {
    const Band& b = bands_.at(band_index);
    std::size_t n = 0;
    for (std::size_t i = 0; i < b.values.size(); ++i) n += b.valid(i) ? 1 : 0;
    return n;
  }

  bool operator==(const Grid&) const = default;

 private:
  GridGeometry geometry_;
  std::deque<Band> bands_;  // deque: references from add_band stay valid
};

inline void require_same_geometry(const GridGeometry& a, const GridGeometry& b,
                                  std::string_view what) {
  if (!(a == b)) throw DataError("geometry mismatch: " + std::string(what));
}

// Dense 4-connected water-body labels; 0 is land.
struct LakeLabelGrid {
  GridGeometry geometry;
  std::vector<std::uint32_t> labels;
  std::uint32_t lake_count = 0;

  std::uint32_t at(PixelIndex p) const { return labels[geometry.index(p)]; }
  std::uint32_t at(std::size_t row, std::size_t col) const {
    return labels[geometry.index(row, col)];
  }
};

// Water is any valid, nonzero value of `band_index`; nodata counts as land.
// Labels are assigned 1..K in row-major order of each component's first pixel.
inline LakeLabelGrid label_lakes(const Grid& water_mask, std::size_t band_index = 0) {
  const GridGeometry& g = water_mask.geometry();
  const Band& mask = water_mask.band(band_index);
  LakeLabelGrid out{g, std::vector<std::uint32_t>(g.cell_count(), 0), 0};

  auto is_water = [&](std::size_t i) { return mask.valid(i) && mask.values[i] != 0.0f; };

  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < g.cell_count(); ++start) {
    if (!is_water(start) || out.labels[start] != 0) continue;
    const std::uint32_t label = ++out.lake_count;
    out.labels[start] = label;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const std::size_t r = i / g.n_cols, c = i % g.n_cols;
      auto visit = [&](std::size_t j) {
        if (out.labels[j] == 0 && is_water(j)) {
          out.labels[j] = label;
          stack.push_back(j);
        }
      };
      if (r > 0) visit(i - g.n_cols);
      if (r + 1 < g.n_rows) visit(i + g.n_cols);
      if (c > 0) visit(i - 1);
      if (c + 1 < g.n_cols) visit(i + 1);
    }
  }
  return out;
}

}  // namespace bathymap
