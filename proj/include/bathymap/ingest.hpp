#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "bathymap/io_util.hpp"
#include "bathymap/raster.hpp"
#include "bathymap/training_table.hpp"

namespace bathymap {

struct SonarPoint {
  double x = 0.0;
  double y = 0.0;
  double depth = 0.0;  // meters, positive down
  std::optional<std::int64_t> lake_id;
  std::optional<std::string> timestamp;

  bool operator==(const SonarPoint&) const = default;
};

struct SonarLoadResult {
  std::vector<SonarPoint> points;
  std::size_t skipped = 0;
  std::vector<std::string> warnings;
};

// Header `x,y,depth_m[,lake_id][,timestamp]`. Malformed rows and rows with
// non-positive depth are skipped and reported; a missing required column or
// an empty file is an error.
inline SonarLoadResult parse_sonar_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line) || io::trim(line).empty())
    throw DataError(source + ": empty sonar file");
  const auto header = io::split(io::trim(line), ',');
  std::optional<std::size_t> cx, cy, cd, cl, ct;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const auto h = io::trim(header[i]);
    if (h == "x") cx = i;
    else if (h == "y") cy = i;
    else if (h == "depth_m") cd = i;
    else if (h == "lake_id") cl = i;
    else if (h == "timestamp") ct = i;
  }
  if (!cx || !cy || !cd) throw DataError(source + ": sonar header must contain x, y and depth_m");

  SonarLoadResult result;
  std::size_t line_no = 1;
  auto skip = [&](const std::string& why) {
    ++result.skipped;
    result.warnings.push_back(source + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = io::trim(line);
    if (t.empty()) continue;
    const auto cells = io::split(t, ',');
    if (cells.size() != header.size()) {
      skip("wrong column count");
      continue;
    }
    const auto x = io::parse_number<double>(cells[*cx]);
    const auto y = io::parse_number<double>(cells[*cy]);
    const auto d = io::parse_number<double>(cells[*cd]);
    if (!x || !y || !d || !std::isfinite(*x) || !std::isfinite(*y) || !std::isfinite(*d)) {
      skip("malformed coordinate or depth");
      continue;
    }
    if (*d <= 0.0) {
      skip("non-positive depth");
      continue;
    }
    SonarPoint p{*x, *y, *d, std::nullopt, std::nullopt};
    if (cl && !io::trim(cells[*cl]).empty()) {
      const auto id = io::parse_number<std::int64_t>(cells[*cl]);
      if (!id) {
        skip("malformed lake_id");
        continue;
      }
      p.lake_id = *id;
    }
    if (ct && !io::trim(cells[*ct]).empty()) p.timestamp = std::string(io::trim(cells[*ct]));
    result.points.push_back(std::move(p));
  }
  return result;
}

inline SonarLoadResult load_sonar_points(const std::filesystem::path& path) {
  auto in = io::open_in(path);
  return parse_sonar_csv(in, path.string());
}

inline void write_sonar_points(std::span<const SonarPoint> points, const std::filesystem::path& path) {
  auto out = io::open_out(path);
  out << "x,y,depth_m,lake_id,timestamp\n";
  for (const auto& p : points) {
    out << io::format_real(p.x) << ',' << io::format_real(p.y) << ',' << io::format_real(p.depth)
        << ',';
    if (p.lake_id) out << *p.lake_id;
    out << ',';
    if (p.timestamp) out << *p.timestamp;
    out << '\n';
  }
}

struct DepthPixel {
  PixelIndex pixel;
  double mean_depth = 0.0;
  std::size_t point_count = 0;
  std::uint32_t lake_id = 0;

  bool operator==(const DepthPixel&) const = default;
};

struct DepthPixelSet {
  std::vector<DepthPixel> pixels;  // sorted by (row, col)
  std::size_t dropped_outside_grid = 0;
  std::size_t dropped_not_water = 0;

  bool operator==(const DepthPixelSet&) const = default;
};

// Reduces the depths that fell into one pixel (given in ascending order).
using DepthAggregator = std::function<double(std::span<const double>)>;

inline double mean_of_sorted(std::span<const double> sorted_depths) {
  double sum = 0.0;
  for (double d : sorted_depths) sum += d;
  return sum / static_cast<double>(sorted_depths.size());
}

// Pixel-mean aggregation of soundings. Contributions are sorted before
// reduction so the result does not depend on input order.
inline DepthPixelSet aggregate_points_to_pixels(std::span<const SonarPoint> points,
                                                const GridGeometry& geom,
                                                const LakeLabelGrid& lakes,
                                                const DepthAggregator& aggregator = mean_of_sorted) {
  require_same_geometry(geom, lakes.geometry, "sonar aggregation geometry vs lake labels");
  std::map<PixelIndex, std::vector<double>> bins;
  DepthPixelSet out;
  for (const auto& p : points) {
    const auto px = world_to_pixel(geom, p.x, p.y);
    if (!px) {
      ++out.dropped_outside_grid;
      continue;
    }
    if (lakes.at(*px) == 0) {
      ++out.dropped_not_water;
      continue;
    }
    bins[*px].push_back(p.depth);
  }
  out.pixels.reserve(bins.size());
  for (auto& [px, depths] : bins) {
    std::sort(depths.begin(), depths.end());
    out.pixels.push_back({px, aggregator(depths), depths.size(), lakes.at(px)});
  }
  return out;
}

inline void write_depth_pixels(const DepthPixelSet& set, const std::filesystem::path& path) {
  auto out = io::open_out(path);
  out << "row,col,mean_depth_m,point_count,lake_id\n";
  for (const auto& p : set.pixels)
    out << p.pixel.row << ',' << p.pixel.col << ',' << io::format_real(p.mean_depth) << ','
        << p.point_count << ',' << p.lake_id << '\n';
}

inline DepthPixelSet read_depth_pixels(const std::filesystem::path& path) {
  auto in = io::open_in(path);
  std::string line;
  if (!std::getline(in, line) || io::trim(line) != "row,col,mean_depth_m,point_count,lake_id")
    throw DataError(path.string() + ": unexpected depth pixel header");
  DepthPixelSet set;
  while (std::getline(in, line)) {
    if (io::trim(line).empty()) continue;
    const auto c = io::split(io::trim(line), ',');
    if (c.size() != 5) throw DataError(path.string() + ": wrong column count");
    const auto r = io::parse_number<std::size_t>(c[0]);
    const auto col = io::parse_number<std::size_t>(c[1]);
    const auto d = io::parse_number<double>(c[2]);
    const auto n = io::parse_number<std::size_t>(c[3]);
    const auto l = io::parse_number<std::uint32_t>(c[4]);
    if (!r || !col || !d || !n || !l) throw DataError(path.string() + ": malformed depth pixel row");
    set.pixels.push_back({{*r, *col}, *d, *n, *l});
  }
  std::sort(set.pixels.begin(), set.pixels.end(),
            [](const DepthPixel& a, const DepthPixel& b) { return a.pixel < b.pixel; });
  return set;
}

// Scene QA codes: 0 clear, 1 cloud, 2 ice. Nodata QA is always rejected.
inline constexpr int kQaClear = 0;
inline constexpr int kQaCloud = 1;
inline constexpr int kQaIce = 2;

struct QaPolicy {
  std::set<int> accepted_flag_values{kQaClear};
  bool reject_nodata = true;

  void validate() const {
    if (accepted_flag_values.empty()) throw ConfigError("QA policy accepts no codes");
  }

  bool accepts(const Band& qa, std::size_t cell) const {
    if (!qa.valid(cell)) return false;
    const float v = qa.values[cell];
    const auto code = static_cast<int>(v);
    return static_cast<float>(code) == v && accepted_flag_values.contains(code);
  }
};

// Resolves named feature bands of a scene to band indices.
inline std::vector<std::size_t> resolve_bands(const Grid& scene,
                                              const std::vector<std::string>& names) {
  std::vector<std::size_t> idx;
  idx.reserve(names.size());
  for (const auto& n : names) idx.push_back(scene.require_band(n));
  return idx;
}

// Reads the feature vector at `cell`; false when any band is nodata.
inline bool read_features(const Grid& scene, std::span<const std::size_t> band_idx,
                          std::size_t cell, std::span<double> out) {
  for (std::size_t f = 0; f < band_idx.size(); ++f) {
    const Band& b = scene.band(band_idx[f]);
    if (!b.valid(cell)) return false;
    out[f] = b.values[cell];
  }
  return true;
}

// One in-situ row per location that is QA-clear and has every feature band valid.
inline TrainingTable extract_spectra(const Grid& scene, std::string_view scene_id,
                                     const DepthPixelSet& locations, const Grid& qa,
                                     const QaPolicy& policy,
                                     const std::vector<std::string>& feature_bands = default_feature_bands()) {
  require_same_geometry(scene.geometry(), qa.geometry(), "scene vs QA");
  const GridGeometry& g = scene.geometry();
  const auto band_idx = resolve_bands(scene, feature_bands);
  const Band& qa_band = qa.band(0);
  TrainingTable table(feature_bands);
  std::vector<double> features(feature_bands.size());
  for (const auto& loc : locations.pixels) {
    if (loc.pixel.row >= g.n_rows || loc.pixel.col >= g.n_cols)
      throw DataError("depth pixel outside scene extent");
    const std::size_t cell = g.index(loc.pixel);
    if (!policy.accepts(qa_band, cell)) continue;
    if (!read_features(scene, band_idx, cell, features)) continue;
    table.add_row(scene_id, loc.pixel, features, loc.mean_depth, Provenance::InSitu);
  }
  return table;
}

}  // namespace bathymap
