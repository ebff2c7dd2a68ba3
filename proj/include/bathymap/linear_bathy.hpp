#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bathymap/ingest.hpp"
#include "bathymap/io_util.hpp"
#include "bathymap/raster.hpp"
#include "bathymap/training_table.hpp"

namespace bathymap {

// Log-ratio band pair of the per-lake model.
struct LinearConfig {
  std::string band_i = "blue";   // numerator
  std::string band_j = "green";  // denominator
  double n_scale = 1000.0;
  std::size_t min_rows = 3;
  // When set, each lake picks the pair with the best fit_r2 from these bands.
  std::vector<std::string> candidate_bands;
};

struct LinearLakeModel {
  std::uint32_t lake_id = 0;
  std::string band_i;
  std::string band_j;
  double n_scale = 1000.0;
  double m1 = 0.0;  // meters per unit ratio
  double m0 = 0.0;  // meters
  double fit_r2 = 0.0;
  std::size_t n_samples = 0;

  double predict_raw(double ratio) const { return m1 * ratio + m0; }

  bool operator==(const LinearLakeModel&) const = default;
};

// ln(n*Ri) / ln(n*Rj), or nullopt when either reflectance is non-positive or
// either scaled log is not strictly positive.
inline std::optional<double> try_ratio_feature(double r_i, double r_j, double n_scale) {
  if (!(r_i > 0.0) || !(r_j > 0.0) || !(n_scale > 0.0)) return std::nullopt;
  const double li = std::log(n_scale * r_i);
  const double lj = std::log(n_scale * r_j);
  if (!(li > 0.0) || !(lj > 0.0) || !std::isfinite(li) || !std::isfinite(lj)) return std::nullopt;
  return li / lj;
}

inline double ratio_feature(double r_i, double r_j, double n_scale) {
  if (auto v = try_ratio_feature(r_i, r_j, n_scale)) return *v;
  throw NumericError("log-ratio feature undefined for reflectances " + io::format_real(r_i) +
                     ", " + io::format_real(r_j));
}

struct LinearSample {
  double ratio;
  double depth;
};

// Ordinary least squares of depth on ratio.
inline LinearLakeModel fit_linear_samples(std::span<const LinearSample> samples, std::uint32_t lake_id,
                                          const std::string& band_i, const std::string& band_j,
                                          double n_scale, std::size_t min_rows = 3) {
  if (samples.size() < std::max<std::size_t>(min_rows, 2))
    throw DataError("lake " + std::to_string(lake_id) + ": need at least " +
                    std::to_string(min_rows) + " samples with defined ratio, have " +
                    std::to_string(samples.size()));
  const double n = static_cast<double>(samples.size());
  double mx = 0.0, my = 0.0;
  for (const auto& s : samples) {
    mx += s.ratio;
    my += s.depth;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& s : samples) {
    const double dx = s.ratio - mx, dy = s.depth - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > std::numeric_limits<double>::epsilon() * mx * mx * n))
    throw NumericError("lake " + std::to_string(lake_id) + ": singular fit (no ratio variance)");

  LinearLakeModel m;
  m.lake_id = lake_id;
  m.band_i = band_i;
  m.band_j = band_j;
  m.n_scale = n_scale;
  m.m1 = sxy / sxx;
  m.m0 = my - m.m1 * mx;
  double ss_res = 0.0;
  for (const auto& s : samples) {
    const double r = s.depth - m.predict_raw(s.ratio);
    ss_res += r * r;
  }
  m.fit_r2 = syy > 0.0 ? 1.0 - ss_res / syy : std::numeric_limits<double>::quiet_NaN();
  m.n_samples = samples.size();
  return m;
}

inline std::vector<LinearSample> linear_samples(const TrainingTable& table,
                                                std::span<const std::size_t> rows,
                                                const std::string& band_i,
                                                const std::string& band_j, double n_scale) {
  const auto& names = table.feature_names();
  const auto fi = std::find(names.begin(), names.end(), band_i);
  const auto fj = std::find(names.begin(), names.end(), band_j);
  if (fi == names.end() || fj == names.end())
    throw ConfigError("linear model band pair " + band_i + "/" + band_j +
                      " is not in the training table");
  if (fi == fj) throw ConfigError("linear model band pair must name two different bands");
  const auto ii = static_cast<std::size_t>(fi - names.begin());
  const auto jj = static_cast<std::size_t>(fj - names.begin());
  std::vector<LinearSample> out;
  for (std::size_t r : rows) {
    const auto f = table.features(r);
    if (auto ratio = try_ratio_feature(f[ii], f[jj], n_scale)) out.push_back({*ratio, table.depth(r)});
  }
  return out;
}

// Fits one lake from the given table rows (all rows must belong to the lake).
inline LinearLakeModel fit_lake_linear(const TrainingTable& table, std::span<const std::size_t> rows,
                                       std::uint32_t lake_id, const LinearConfig& cfg = {}) {
  if (cfg.candidate_bands.empty()) {
    const auto samples = linear_samples(table, rows, cfg.band_i, cfg.band_j, cfg.n_scale);
    return fit_linear_samples(samples, lake_id, cfg.band_i, cfg.band_j, cfg.n_scale, cfg.min_rows);
  }
  std::optional<LinearLakeModel> best;
  for (const auto& bi : cfg.candidate_bands) {
    for (const auto& bj : cfg.candidate_bands) {
      if (bi == bj) continue;
      const auto samples = linear_samples(table, rows, bi, bj, cfg.n_scale);
      try {
        auto m = fit_linear_samples(samples, lake_id, bi, bj, cfg.n_scale, cfg.min_rows);
        if (!best || m.fit_r2 > best->fit_r2) best = m;
      } catch (const Error&) {
      }
    }
  }
  if (!best) throw NumericError("lake " + std::to_string(lake_id) + ": no candidate band pair fits");
  return *best;
}

struct LinearFitSummary {
  std::vector<LinearLakeModel> models;            // ascending lake_id
  std::vector<std::pair<std::uint32_t, std::string>> skipped;  // lake, reason
};

// Groups rows by the lake label under their pixel and fits each lake independently.
inline LinearFitSummary fit_lakes_linear(const TrainingTable& table, const LakeLabelGrid& lakes,
                                         const LinearConfig& cfg = {}) {
  std::map<std::uint32_t, std::vector<std::size_t>> by_lake;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const auto id = lakes.at(table.pixel(i));
    if (id != 0) by_lake[id].push_back(i);
  }
  LinearFitSummary out;
  for (const auto& [id, rows] : by_lake) {
    try {
      out.models.push_back(fit_lake_linear(table, rows, id, cfg));
    } catch (const Error& e) {
      out.skipped.emplace_back(id, e.what());
    }
  }
  return out;
}

inline constexpr std::string_view kDepthBand = "depth_m";

// Writes m1*ratio + m0 (clamped at 0) into `out` at the model's lake pixels.
inline void paint_lake_linear(const LinearLakeModel& model, const Grid& scene,
                              const LakeLabelGrid& lakes, Band& out) {
  const GridGeometry& g = scene.geometry();
  require_same_geometry(g, lakes.geometry, "scene vs lake labels");
  if (model.lake_id == 0 || model.lake_id > lakes.lake_count)
    throw DataError("lake " + std::to_string(model.lake_id) + " is not in the lake label grid");
  const Band& bi = scene.band(model.band_i);
  const Band& bj = scene.band(model.band_j);
  for (std::size_t cell = 0; cell < g.cell_count(); ++cell) {
    if (lakes.labels[cell] != model.lake_id) continue;
    if (!bi.valid(cell) || !bj.valid(cell)) continue;
    const auto ratio = try_ratio_feature(bi.values[cell], bj.values[cell], model.n_scale);
    if (!ratio) continue;
    out.values[cell] = static_cast<float>(std::max(0.0, model.predict_raw(*ratio)));
  }
}

inline Grid predict_lake_linear(const LinearLakeModel& model, const Grid& scene,
                                const LakeLabelGrid& lakes) {
  Grid out(scene.geometry());
  Band& depth = out.add_band(std::string(kDepthBand));
  paint_lake_linear(model, scene, lakes, depth);
  return out;
}

// All lakes painted into one depth grid (the prior map).
inline Grid predict_lakes_linear(std::span<const LinearLakeModel> models, const Grid& scene,
                                 const LakeLabelGrid& lakes) {
  Grid out(scene.geometry());
  Band& depth = out.add_band(std::string(kDepthBand));
  for (const auto& m : models) paint_lake_linear(m, scene, lakes, depth);
  return out;
}

inline constexpr std::string_view kLinearFormat = "BLINEAR1";

inline void write_linear_models(std::span<const LinearLakeModel> models,
                                const std::filesystem::path& path) {
  auto out = io::open_out(path);
  out << "format = " << kLinearFormat << "\n";
  out << "lake_count = " << models.size() << "\n";
  for (std::size_t k = 0; k < models.size(); ++k) {
    const auto& m = models[k];
    const std::string p = "model." + std::to_string(k) + ".";
    out << p << "lake_id = " << m.lake_id << "\n"
        << p << "band_i = " << m.band_i << "\n"
        << p << "band_j = " << m.band_j << "\n"
        << p << "n_scale = " << io::format_real(m.n_scale) << "\n"
        << p << "m1 = " << io::format_real(m.m1) << "\n"
        << p << "m0 = " << io::format_real(m.m0) << "\n"
        << p << "fit_r2 = " << io::format_real(m.fit_r2) << "\n"
        << p << "n_samples = " << m.n_samples << "\n";
  }
}

inline std::vector<LinearLakeModel> read_linear_models(const std::filesystem::path& path) {
  auto in = io::open_in(path);
  const std::string src = path.string();
  const auto kv = io::parse_key_values(in, src);
  if (io::require_key(kv, "format", src) != kLinearFormat)
    throw DataError(src + ": unsupported linear model format");
  const auto n = io::require_number<std::size_t>(kv, "lake_count", src);
  std::vector<LinearLakeModel> models(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::string p = "model." + std::to_string(k) + ".";
    auto& m = models[k];
    m.lake_id = io::require_number<std::uint32_t>(kv, p + "lake_id", src);
    m.band_i = io::require_key(kv, p + "band_i", src);
    m.band_j = io::require_key(kv, p + "band_j", src);
    m.n_scale = io::require_number<double>(kv, p + "n_scale", src);
    m.m1 = io::require_number<double>(kv, p + "m1", src);
    m.m0 = io::require_number<double>(kv, p + "m0", src);
    m.fit_r2 = io::require_number<double>(kv, p + "fit_r2", src);
    m.n_samples = io::require_number<std::size_t>(kv, p + "n_samples", src);
  }
  return models;
}

}  // namespace bathymap
