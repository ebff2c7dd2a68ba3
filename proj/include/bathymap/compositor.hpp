#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bathymap/grid_io.hpp"
#include "bathymap/io_util.hpp"
#include "bathymap/parallel.hpp"
#include "bathymap/raster.hpp"
#include "bathymap/stats.hpp"

namespace bathymap {

struct CompositeWindow {
  int start_year = 2016;
  int end_year = 2018;

  bool contains(int year) const { return year >= start_year && year <= end_year; }
  bool operator==(const CompositeWindow&) const = default;
};

// One per-scene depth prediction in a time series.
struct ScenePrediction {
  std::string scene_id;
  int year = 0;
  const Grid* depth = nullptr;  // band 0 is depth in meters
};

inline constexpr std::string_view kMedianBand = "median_depth_m";
inline constexpr std::string_view kMaxBand = "max_depth_m";
inline constexpr std::string_view kCountBand = "obs_count";
inline constexpr std::string_view kStdBand = "std_m";
inline constexpr std::string_view kNmadBand = "nmad_m";
inline constexpr std::string_view kMeanBand = "mean_depth_m";

struct CompositeStack {
  Grid layers;  // median, max, count, std, nmad [, mean]
  CompositeWindow window;
  std::vector<std::string> scene_ids;  // contributing scenes, sorted

  const GridGeometry& geometry() const { return layers.geometry(); }
  const Band& median() const { return layers.band(kMedianBand); }
  const Band& max() const { return layers.band(kMaxBand); }
  const Band& count() const { return layers.band(kCountBand); }
  const Band& std_dev() const { return layers.band(kStdBand); }
  const Band& nmad() const { return layers.band(kNmadBand); }

  bool operator==(const CompositeStack&) const = default;
};

struct CompositeOptions {
  bool include_mean = false;
  std::size_t tile_size = 64;
  unsigned workers = 0;
};

struct PixelSummary {
  double median, max, std_dev, nmad, mean;
  std::size_t count;
};

// Statistics of one pixel's valid observations. Values are sorted first, so
// the result is independent of observation order.
inline PixelSummary summarize_pixel(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  PixelSummary s{};
  s.count = values.size();
  s.median = median_sorted(values);
  s.max = values.back();
  s.mean = mean(values);
  double acc = 0.0;
  for (double v : values) acc += (v - s.mean) * (v - s.mean);
  s.std_dev = std::sqrt(acc / static_cast<double>(values.size()));
  for (double& v : values) v = std::fabs(v - s.median);
  std::sort(values.begin(), values.end());
  s.nmad = kNmadScale * median_sorted(values);
  return s;
}

// Per-pixel reduction over the predictions whose year falls in the window.
// Only non-nodata observations count; pixels with none are nodata in every
// layer (count included).
inline CompositeStack composite_stack(std::span<const ScenePrediction> predictions,
                                      const CompositeWindow& window,
                                      const CompositeOptions& opts = {}) {
  std::vector<const ScenePrediction*> used;
  for (const auto& p : predictions)
    if (window.contains(p.year)) used.push_back(&p);
  if (used.empty()) throw DataError("no predictions fall inside the composite window");
  const GridGeometry& g = used.front()->depth->geometry();
  for (const auto* p : used) require_same_geometry(g, p->depth->geometry(), "composite inputs");
  if (opts.tile_size == 0) throw ConfigError("tile size must be positive");

  CompositeStack out{Grid(g), window, {}};
  for (const auto* p : used) out.scene_ids.push_back(p->scene_id);
  std::sort(out.scene_ids.begin(), out.scene_ids.end());

  Band& med = out.layers.add_band(std::string(kMedianBand));
  Band& mx = out.layers.add_band(std::string(kMaxBand));
  Band& cnt = out.layers.add_band(std::string(kCountBand));
  Band& sd = out.layers.add_band(std::string(kStdBand));
  Band& nm = out.layers.add_band(std::string(kNmadBand));
  Band* mean_band = opts.include_mean ? &out.layers.add_band(std::string(kMeanBand)) : nullptr;

  const std::size_t tiles_r = (g.n_rows + opts.tile_size - 1) / opts.tile_size;
  const std::size_t tiles_c = (g.n_cols + opts.tile_size - 1) / opts.tile_size;
  parallel_for(tiles_r * tiles_c, opts.workers, [&](std::size_t tile) {
    const std::size_t r0 = (tile / tiles_c) * opts.tile_size;
    const std::size_t c0 = (tile % tiles_c) * opts.tile_size;
    std::vector<double> values;
    for (std::size_t r = r0; r < std::min(g.n_rows, r0 + opts.tile_size); ++r) {
      for (std::size_t c = c0; c < std::min(g.n_cols, c0 + opts.tile_size); ++c) {
        const std::size_t cell = g.index(r, c);
        values.clear();
        for (const auto* p : used) {
          const Band& b = p->depth->band(0);
          if (b.valid(cell)) values.push_back(b.values[cell]);
        }
        if (values.empty()) continue;
        const PixelSummary s = summarize_pixel(values);
        med.values[cell] = static_cast<float>(s.median);
        mx.values[cell] = static_cast<float>(s.max);
        cnt.values[cell] = static_cast<float>(s.count);
        sd.values[cell] = static_cast<float>(s.std_dev);
        nm.values[cell] = static_cast<float>(s.nmad);
        if (mean_band) mean_band->values[cell] = static_cast<float>(s.mean);
      }
    }
  });
  return out;
}

inline std::filesystem::path composite_manifest_path(const std::filesystem::path& grid_path) {
  auto p = grid_path;
  p.replace_extension(".manifest");
  return p;
}

// Grid file plus a key-value sidecar listing the window and contributing scenes.
inline void write_composite(const CompositeStack& c, const std::filesystem::path& grid_path) {
  write_grid(c.layers, grid_path);
  auto out = io::open_out(composite_manifest_path(grid_path));
  out << "format = BCOMPOSITE1\n"
      << "window_start_year = " << c.window.start_year << "\n"
      << "window_end_year = " << c.window.end_year << "\n"
      << "scene_count = " << c.scene_ids.size() << "\n";
  for (std::size_t i = 0; i < c.scene_ids.size(); ++i)
    out << "scene." << i << " = " << c.scene_ids[i] << "\n";
}

inline CompositeStack read_composite(const std::filesystem::path& grid_path) {
  CompositeStack c{read_grid(grid_path), {}, {}};
  for (auto name : {kMedianBand, kMaxBand, kCountBand, kStdBand, kNmadBand}) c.layers.require_band(name);
  const auto mpath = composite_manifest_path(grid_path);
  auto in = io::open_in(mpath);
  const auto kv = io::parse_key_values(in, mpath.string());
  const std::string src = mpath.string();
  if (io::require_key(kv, "format", src) != "BCOMPOSITE1") throw DataError(src + ": bad format tag");
  c.window.start_year = io::require_number<int>(kv, "window_start_year", src);
  c.window.end_year = io::require_number<int>(kv, "window_end_year", src);
  const auto n = io::require_number<std::size_t>(kv, "scene_count", src);
  for (std::size_t i = 0; i < n; ++i)
    c.scene_ids.push_back(io::require_key(kv, "scene." + std::to_string(i), src));
  return c;
}

}  // namespace bathymap
