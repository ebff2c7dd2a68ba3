#pragma once

// Synthetic lakes, scenes, QA masks and sonar tracks with known truth.
//
// Forward model per band (exponential attenuation over a two-way path):
//   R = g * [R_inf + (s * R_b - R_inf) * exp(-2 k z)] + eps,  eps ~ N(0, sigma)
// with per-scene gain g, substrate multiplier s and depth z, clipped into
// (0, 1). Scenes may add band-wise atmosphere on top: g_b = g * exp(a_b) and an
// additive path term c_b, both drawn once per scene.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bathymap/ingest.hpp"
#include "bathymap/parallel.hpp"
#include "bathymap/raster.hpp"
#include "bathymap/rng.hpp"
#include "bathymap/training_table.hpp"

namespace bathymap {

inline constexpr std::size_t kSpectralBands = 6;
using Spectrum = std::array<double, kSpectralBands>;

inline constexpr double kMinReflectance = 1e-6;
inline constexpr double kMaxReflectance = 1.0 - 1e-6;

struct OpticalParams {
  Spectrum bottom{};       // R_b, bright substrate
  Spectrum deep{};         // R_inf, optically deep water
  Spectrum attenuation{};  // k, 1/m

  // Blue/green log ratio roughly linear to ~10 m and flattening beyond;
  // red and infrared bands are extinguished within the first meter or two.
  static OpticalParams arctic_default() {
    return {{0.100, 0.140, 0.120, 0.080, 0.030, 0.020},
            {0.015, 0.012, 0.006, 0.003, 0.0015, 0.001},
            {0.045, 0.090, 0.350, 1.800, 4.000, 5.000}};
  }

  void validate() const {
    for (std::size_t b = 0; b < kSpectralBands; ++b) {
      if (!(bottom[b] > 0.0 && bottom[b] < 1.0) || !(deep[b] > 0.0 && deep[b] < 1.0))
        throw ConfigError("optical reflectances must lie in (0, 1)");
      if (!(attenuation[b] > 0.0)) throw ConfigError("attenuation must be positive");
    }
    for (std::size_t b = 0; b < 3; ++b)
      if (!(bottom[b] > deep[b])) throw ConfigError("visible bottom reflectance must exceed deep-water reflectance");
  }

  bool operator==(const OpticalParams&) const = default;
};

// Noise-free bracket term of band b.
inline double forward_reflectance(double depth_m, const OpticalParams& optics, std::size_t b,
                                  double substrate = 1.0) {
  const double rb = substrate * optics.bottom[b];
  return optics.deep[b] + (rb - optics.deep[b]) * std::exp(-2.0 * optics.attenuation[b] * depth_m);
}

inline Spectrum reflectance_from_depth(double depth_m, const OpticalParams& optics, double gain,
                                       double noise_sigma, Rng& rng, double substrate = 1.0) {
  if (!(depth_m >= 0.0)) throw DataError("negative depth passed to the forward model");
  Spectrum r{};
  for (std::size_t b = 0; b < kSpectralBands; ++b) {
    double v = gain * forward_reflectance(depth_m, optics, b, substrate);
    if (noise_sigma > 0.0) v += noise_sigma * rng.normal();
    r[b] = std::clamp(v, kMinReflectance, kMaxReflectance);
  }
  return r;
}

// Single-band analytic inversion of the noise-free forward model.
inline double invert_band_depth(double reflectance, double bottom, double deep, double attenuation,
                                double gain = 1.0) {
  return std::log((bottom - deep) / (reflectance / gain - deep)) / (2.0 * attenuation);
}

struct LakeSpec {
  double center_x = 0.0;  // map coordinates, meters
  double center_y = 0.0;
  double radius_m = 300.0;
  double max_depth_m = 5.0;
  double shape_exponent = 2.0;
  double substrate_brightness = 1.0;

  void validate() const {
    if (!(radius_m > 0.0)) throw ConfigError("lake radius must be positive");
    if (!(max_depth_m > 0.0 && max_depth_m <= 25.0)) throw ConfigError("lake max depth must lie in (0, 25] m");
    if (!(shape_exponent > 0.0)) throw ConfigError("lake shape exponent must be positive");
    if (!(substrate_brightness > 0.0)) throw ConfigError("substrate brightness must be positive");
  }

  double depth_at(double x, double y) const {
    const double r = std::hypot(x - center_x, y - center_y);
    if (r >= radius_m) return 0.0;
    return std::max(0.0, max_depth_m * (1.0 - std::pow(r / radius_m, shape_exponent)));
  }

  bool operator==(const LakeSpec&) const = default;
};

struct DepthField {
  Grid depth;        // "depth_m", 0 on land
  Grid water_mask;   // "water", 1 where depth > 0
  Grid substrate;    // "substrate", brightness multiplier of the deepest lake covering the pixel
};

// Depth at pixel centers; overlapping lakes take the maximum. The substrate
// multiplier is the lake's brightness times a static per-pixel lognormal
// texture (sd `texture_sd` in log space) drawn from Rng(seed) in row-major order.
inline DepthField gen_depth_field(std::span<const LakeSpec> specs, const GridGeometry& geom,
                                  std::uint64_t seed = 0, double texture_sd = 0.0) {
  if (!(texture_sd >= 0.0)) throw ConfigError("substrate texture sd must be non-negative");
  Rng rng(seed);
  geom.validate();
  for (const auto& s : specs) s.validate();
  DepthField f{Grid(geom), Grid(geom), Grid(geom)};
  Band& depth = f.depth.add_band("depth_m", kDefaultNodata, 0.0f);
  Band& water = f.water_mask.add_band("water", kDefaultNodata, 0.0f);
  Band& sub = f.substrate.add_band("substrate", kDefaultNodata, 1.0f);
  for (std::size_t cell = 0; cell < geom.cell_count(); ++cell) {
    const auto [x, y] = pixel_center(geom, geom.pixel(cell));
    double best = 0.0;
    double best_sub = 1.0;
    for (const auto& s : specs) {
      const double d = s.depth_at(x, y);
      if (d > best) {
        best = d;
        best_sub = s.substrate_brightness;
      }
    }
    if (best > 0.0 && texture_sd > 0.0) best_sub *= std::exp(texture_sd * rng.normal());
    depth.values[cell] = static_cast<float>(best);
    water.values[cell] = best > 0.0 ? 1.0f : 0.0f;
    sub.values[cell] = static_cast<float>(best_sub);
  }
  return f;
}

struct SceneSpec {
  double gain_mean = 1.0;
  double gain_sd = 0.0;
  double gain_min = 0.5;
  double gain_max = 1.5;
  double band_gain_sd = 0.0;  // sd of a_b
  double path_sd = 0.0;       // sd of c_b
  double cloud_fraction = 0.0;
  double noise_sigma = 0.0;
  Spectrum land{0.04, 0.07, 0.06, 0.28, 0.22, 0.13};
  Spectrum cloud{0.55, 0.55, 0.55, 0.50, 0.35, 0.25};
};

struct SimulatedScene {
  std::string id;
  int year = 0;
  double gain = 1.0;
  Spectrum band_gain{1, 1, 1, 1, 1, 1};  // g_b
  Spectrum path{};                        // c_b
  Grid scene;  // the six reflective bands
  Grid qa;     // "qa": 0 clear, 1 cloud
};

// Places random discs until at least `fraction` of the cells are covered.
inline std::vector<std::uint8_t> cloud_blobs(const GridGeometry& g, double fraction, Rng& rng) {
  std::vector<std::uint8_t> cloud(g.cell_count(), 0);
  const auto target = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(g.cell_count())));
  const double r_max = std::max(2.0, static_cast<double>(std::min(g.n_rows, g.n_cols)) / 12.0);
  std::size_t covered = 0;
  while (covered < target) {
    const double cr = static_cast<double>(rng.below(g.n_rows));
    const double cc = static_cast<double>(rng.below(g.n_cols));
    const double rad = rng.uniform(1.5, r_max);
    const auto lo_r = static_cast<std::size_t>(std::max(0.0, std::floor(cr - rad)));
    const auto hi_r = static_cast<std::size_t>(std::min<double>(static_cast<double>(g.n_rows) - 1, std::ceil(cr + rad)));
    const auto lo_c = static_cast<std::size_t>(std::max(0.0, std::floor(cc - rad)));
    const auto hi_c = static_cast<std::size_t>(std::min<double>(static_cast<double>(g.n_cols) - 1, std::ceil(cc + rad)));
    for (std::size_t r = lo_r; r <= hi_r; ++r)
      for (std::size_t c = lo_c; c <= hi_c; ++c) {
        const double dr = static_cast<double>(r) - cr, dc = static_cast<double>(c) - cc;
        if (dr * dr + dc * dc > rad * rad) continue;
        auto& cell = cloud[g.index(r, c)];
        if (!cell) {
          cell = 1;
          ++covered;
        }
      }
  }
  return cloud;
}

// Draw order from Rng(seed): scene gain, band factors a_b (when band_gain_sd > 0),
// path terms c_b (when path_sd > 0), cloud discs, then per-pixel band noise
// in row-major order (water and land pixels alike; cloud pixels draw nothing).
inline SimulatedScene gen_scene(const DepthField& field, const OpticalParams& optics,
                                const SceneSpec& spec, std::uint64_t seed) {
  if (!(spec.cloud_fraction >= 0.0 && spec.cloud_fraction < 1.0))
    throw ConfigError("cloud fraction must lie in [0, 1)");
  optics.validate();
  const GridGeometry& g = field.depth.geometry();
  Rng rng(seed);
  SimulatedScene s;
  s.gain = spec.gain_sd > 0.0 ? std::clamp(rng.normal(spec.gain_mean, spec.gain_sd), spec.gain_min, spec.gain_max)
                              : spec.gain_mean;
  for (std::size_t b = 0; b < kSpectralBands; ++b)
    s.band_gain[b] = s.gain * (spec.band_gain_sd > 0.0 ? std::exp(spec.band_gain_sd * rng.normal()) : 1.0);
  if (spec.path_sd > 0.0)
    for (std::size_t b = 0; b < kSpectralBands; ++b) s.path[b] = spec.path_sd * rng.normal();
  const auto cloud = cloud_blobs(g, spec.cloud_fraction, rng);

  s.scene = Grid(g);
  std::array<Band*, kSpectralBands> bands{};
  for (std::size_t b = 0; b < kSpectralBands; ++b) bands[b] = &s.scene.add_band(default_feature_bands()[b]);
  s.qa = Grid(g);
  Band& qa = s.qa.add_band("qa", 255.0f, 0.0f);

  const Band& depth = field.depth.band(0);
  const Band& water = field.water_mask.band(0);
  const Band& sub = field.substrate.band(0);
  for (std::size_t cell = 0; cell < g.cell_count(); ++cell) {
    Spectrum r{};
    if (cloud[cell]) {
      qa.values[cell] = static_cast<float>(kQaCloud);
      for (std::size_t b = 0; b < kSpectralBands; ++b) r[b] = spec.cloud[b];
    } else {
      const bool wet = water.values[cell] != 0.0f;
      for (std::size_t b = 0; b < kSpectralBands; ++b) {
        double v = s.band_gain[b] * (wet ? forward_reflectance(depth.values[cell], optics, b, sub.values[cell])
                                         : spec.land[b]) + s.path[b];
        if (spec.noise_sigma > 0.0) v += spec.noise_sigma * rng.normal();
        r[b] = std::clamp(v, kMinReflectance, kMaxReflectance);
      }
    }
    for (std::size_t b = 0; b < kSpectralBands; ++b) bands[b]->values[cell] = static_cast<float>(r[b]);
  }
  return s;
}

struct TrackPattern {
  enum class Kind { Cross, Chords };
  Kind kind = Kind::Chords;
  std::size_t chords_per_lake = 2;
  double min_offset = 0.0;  // chord offset from the lake centroid, fraction of radius
  double max_offset = 0.8;

  bool operator==(const TrackPattern&) const = default;
};

// Sonar soundings along straight transects through every lake of the depth
// grid. Points are evenly spaced along each line, allocated to lines in
// proportion to line length; only points over water are kept.
inline std::vector<SonarPoint> gen_sonar_track(const Grid& depth_grid, std::size_t n_points,
                                               const TrackPattern& pattern, double depth_sigma,
                                               std::uint64_t seed) {
  const GridGeometry& g = depth_grid.geometry();
  const Band& depth = depth_grid.band(0);
  Grid mask(g);
  Band& m = mask.add_band("water", kDefaultNodata, 0.0f);
  for (std::size_t i = 0; i < g.cell_count(); ++i) m.values[i] = depth.values[i] > 0.0f ? 1.0f : 0.0f;
  const LakeLabelGrid lakes = label_lakes(mask);
  if (lakes.lake_count == 0 || n_points == 0) return {};

  std::vector<double> sx(lakes.lake_count + 1, 0.0), sy(lakes.lake_count + 1, 0.0);
  std::vector<std::size_t> area(lakes.lake_count + 1, 0);
  for (std::size_t cell = 0; cell < g.cell_count(); ++cell) {
    const auto id = lakes.labels[cell];
    if (!id) continue;
    const auto [x, y] = pixel_center(g, g.pixel(cell));
    sx[id] += x;
    sy[id] += y;
    ++area[id];
  }

  struct Line {
    double x0, y0, dx, dy, half;  // center, unit direction, half length
    std::uint32_t lake;
  };
  std::vector<Line> lines;
  Rng rng(seed);
  for (std::uint32_t id = 1; id <= lakes.lake_count; ++id) {
    const double cx = sx[id] / static_cast<double>(area[id]);
    const double cy = sy[id] / static_cast<double>(area[id]);
    const double radius = std::sqrt(static_cast<double>(area[id]) / std::numbers::pi) * g.pixel_size;
    const double theta0 = rng.uniform(0.0, std::numbers::pi);
    const std::size_t n_lines = pattern.kind == TrackPattern::Kind::Cross ? 2 : pattern.chords_per_lake;
    for (std::size_t k = 0; k < n_lines; ++k) {
      double theta = theta0, offset = 0.0;
      if (pattern.kind == TrackPattern::Kind::Cross) {
        theta = theta0 + static_cast<double>(k) * std::numbers::pi / 2.0;
      } else {
        theta = rng.uniform(0.0, std::numbers::pi);
        offset = rng.uniform(pattern.min_offset, pattern.max_offset) * radius;
        if (rng.uniform() < 0.5) offset = -offset;
      }
      const double dx = std::cos(theta), dy = std::sin(theta);
      const double half = std::sqrt(std::max(0.0, radius * radius - offset * offset));
      if (half <= 0.0) continue;
      lines.push_back({cx - dy * offset, cy + dx * offset, dx, dy, half, id});
    }
  }

  double total = 0.0;
  for (const auto& l : lines) total += 2.0 * l.half;
  std::vector<SonarPoint> out;
  std::size_t assigned = 0;
  for (std::size_t li = 0; li < lines.size(); ++li) {
    const auto& l = lines[li];
    const std::size_t n_line =
        li + 1 == lines.size()
            ? n_points - assigned
            : static_cast<std::size_t>(std::llround(static_cast<double>(n_points) * 2.0 * l.half / total));
    assigned += n_line;
    for (std::size_t k = 0; k < n_line; ++k) {
      const double t = -l.half + (static_cast<double>(k) + 0.5) * 2.0 * l.half / static_cast<double>(n_line);
      const double x = l.x0 + t * l.dx, y = l.y0 + t * l.dy;
      const auto px = world_to_pixel(g, x, y);
      if (!px) continue;
      const double truth = depth.values[g.index(*px)];
      if (!(truth > 0.0)) continue;
      double d = truth;
      if (depth_sigma > 0.0) d = std::max(0.01, truth + depth_sigma * rng.normal());
      out.push_back({x, y, d, static_cast<std::int64_t>(lakes.at(*px)), std::nullopt});
    }
  }
  return out;
}

struct SceneSchedule {
  int year = 2017;
  std::size_t count = 0;

  bool operator==(const SceneSchedule&) const = default;
};

// Everything needed to regenerate a simulated study area.
struct FixtureDescriptor {
  std::string name = "custom";
  GridGeometry geometry;
  OpticalParams optics = OpticalParams::arctic_default();
  std::vector<LakeSpec> lakes;
  Spectrum land{0.04, 0.07, 0.06, 0.28, 0.22, 0.13};
  double gain_mean = 1.0;
  double gain_sd = 0.1;
  double gain_min = 0.75;
  double gain_max = 1.25;
  double band_gain_sd = 0.0;
  double path_sd = 0.0;
  double substrate_texture_sd = 0.0;
  double noise_sigma = 0.002;
  double clear_scene_probability = 0.25;
  double cloud_fraction_min = 0.05;
  double cloud_fraction_max = 0.6;
  std::vector<SceneSchedule> schedule;
  int insitu_year = 2017;
  std::size_t sonar_points = 13735;
  TrackPattern track;
  double sonar_sigma = 0.15;
  std::uint64_t seed = 1;

  std::size_t scene_count() const {
    std::size_t n = 0;
    for (const auto& s : schedule) n += s.count;
    return n;
  }

  bool operator==(const FixtureDescriptor&) const = default;
};

// The pinned desk-scale study area: 17 lakes on a 128 x 128 grid of 30 m
// pixels, mostly shallow with a few deep basins and one dark-substrate lake,
// observed by 208 scenes over 2016-2018 (31 in the in-situ year).
inline FixtureDescriptor northslope_desk_v1() {
  FixtureDescriptor d;
  d.name = "northslope-desk-v1";
  d.geometry = GridGeometry{500000.0, 7800000.0, 30.0, 128, 128, "sim:northslope-local"};
  struct Row {
    double col, row, radius_px, depth, shape, substrate;
  };
  // clang-format off
  const Row rows[] = {
      {13.0, 13.0,  9.0,  2.5, 2.0, 1.00}, {38.5, 13.0,  7.0,  3.0, 1.5, 1.00},
      {64.0, 13.0, 10.0,  4.0, 2.0, 1.05}, {89.5, 13.0,  8.0,  3.5, 2.5, 0.95},
      {115.0, 13.0, 11.0, 12.0, 2.0, 1.00}, {13.0, 38.5,  6.0,  2.0, 2.0, 1.10},
      {38.5, 38.5,  9.0,  5.5, 2.0, 0.55}, {64.0, 38.5, 10.0,  8.0, 2.0, 1.00},
      {89.5, 38.5, 11.0, 21.0, 2.0, 1.00}, {115.0, 38.5,  8.0,  6.0, 1.8, 0.90},
      {13.0, 64.0,  9.0,  4.5, 2.0, 1.00}, {38.5, 64.0, 11.0, 16.0, 2.2, 1.00},
      {64.0, 64.0,  7.0,  3.0, 2.0, 1.05}, {89.5, 64.0, 10.0,  9.5, 2.0, 0.95},
      {115.0, 64.0,  8.0,  5.0, 2.0, 1.00}, {38.5, 89.5, 11.0, 14.0, 2.0, 1.00},
      {89.5, 89.5,  9.0,  7.0, 2.0, 1.00},
  };
  // clang-format on
  for (const auto& r : rows) {
    const double ps = d.geometry.pixel_size;
    d.lakes.push_back({d.geometry.origin_x + (r.col + 0.5) * ps, d.geometry.origin_y - (r.row + 0.5) * ps,
                       r.radius_px * ps, r.depth, r.shape, r.substrate});
  }
  d.schedule = {{2016, 88}, {2017, 31}, {2018, 89}};
  // Chords run off-centre, so sonar coverage is mostly shallow margin.
  d.track = TrackPattern{TrackPattern::Kind::Chords, 2, 0.5, 0.95};
  d.substrate_texture_sd = 0.35;
  d.band_gain_sd = 0.08;
  d.path_sd = 0.003;
  d.noise_sigma = 0.0007;
  return d;
}

struct Fixture {
  FixtureDescriptor descriptor;
  DepthField field;
  LakeLabelGrid lakes;
  std::vector<SimulatedScene> scenes;  // schedule order; scenes[0] is the reference scene
  std::vector<SonarPoint> sonar;

  const SimulatedScene& reference_scene() const { return scenes.front(); }
};

inline std::string scene_id_for(int year, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sim%d_%03zu", year, index);
  return buf;
}

// Stream layout under the descriptor seed: 1 sonar track, 2 substrate texture,
// 100 + i scene i.
// The first scene of the schedule is the cloud-free reference scene.
inline Fixture generate_fixture(const FixtureDescriptor& desc, unsigned workers = 0) {
  desc.optics.validate();
  if (desc.lakes.empty()) throw ConfigError("fixture has no lakes");
  if (desc.scene_count() == 0) throw ConfigError("fixture schedules no scenes");
  Fixture f;
  f.descriptor = desc;
  f.field = gen_depth_field(desc.lakes, desc.geometry, derive_seed(desc.seed, 2), desc.substrate_texture_sd);
  f.lakes = label_lakes(f.field.water_mask);

  struct Pending {
    std::string id;
    int year;
  };
  std::vector<Pending> pending;
  for (const auto& s : desc.schedule)
    for (std::size_t i = 0; i < s.count; ++i) pending.push_back({scene_id_for(s.year, i), s.year});

  f.scenes.resize(pending.size());
  parallel_for(pending.size(), workers, [&](std::size_t i) {
    Rng draw = Rng::stream(desc.seed, 100 + i);
    SceneSpec spec;
    spec.gain_mean = desc.gain_mean;
    spec.gain_sd = desc.gain_sd;
    spec.gain_min = desc.gain_min;
    spec.gain_max = desc.gain_max;
    spec.band_gain_sd = desc.band_gain_sd;
    spec.path_sd = desc.path_sd;
    spec.noise_sigma = desc.noise_sigma;
    spec.land = desc.land;
    const bool clear = i == 0 || draw.uniform() < desc.clear_scene_probability;
    spec.cloud_fraction = clear ? 0.0 : draw.uniform(desc.cloud_fraction_min, desc.cloud_fraction_max);
    SimulatedScene s = gen_scene(f.field, desc.optics, spec, draw.next());
    s.id = pending[i].id;
    s.year = pending[i].year;
    f.scenes[i] = std::move(s);
  });
  f.sonar = gen_sonar_track(f.field.depth, desc.sonar_points, desc.track, desc.sonar_sigma,
                            derive_seed(desc.seed, 1));
  return f;
}

}  // namespace bathymap
