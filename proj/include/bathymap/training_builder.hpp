#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "bathymap/ingest.hpp"
#include "bathymap/parallel.hpp"
#include "bathymap/raster.hpp"
#include "bathymap/rng.hpp"
#include "bathymap/training_table.hpp"

namespace bathymap {

// A co-registered reflectance scene and its QA codes.
struct SceneRef {
  std::string id;
  const Grid* scene = nullptr;
  const Grid* qa = nullptr;
};

inline TrainingTable build_exp1(const SceneRef& scene, const QaPolicy& policy,
                                const DepthPixelSet& depth_pixels,
                                const std::vector<std::string>& bands = default_feature_bands()) {
  return extract_spectra(*scene.scene, scene.id, depth_pixels, *scene.qa, policy, bands);
}

// Per-scene extraction at the fixed in-situ locations; each observation keeps
// the location's (time-invariant) sonar depth.
inline TrainingTable build_exp2(std::span<const SceneRef> scenes, const QaPolicy& policy,
                                const DepthPixelSet& depth_pixels,
                                const std::vector<std::string>& bands = default_feature_bands(),
                                unsigned workers = 0) {
  std::vector<TrainingTable> parts(scenes.size(), TrainingTable(bands));
  parallel_for(scenes.size(), workers, [&](std::size_t i) {
    parts[i] = extract_spectra(*scenes[i].scene, scenes[i].id, depth_pixels, *scenes[i].qa, policy, bands);
  });
  TrainingTable out(bands);
  for (const auto& p : parts) out.append(p);
  out.sort_canonical();
  return out;
}

struct SyntheticSamplingPolicy {
  std::optional<std::size_t> max_rows_per_scene;
  double probability = 1.0;
  std::uint64_t seed = 0;
  std::set<PixelIndex> exclusion_set;  // in-situ pixels withheld for validation

  void validate() const {
    if (!(probability > 0.0 && probability <= 1.0))
      throw ConfigError("synthetic sampling probability must lie in (0, 1]");
  }
};

// Samples every clear, valid scene pixel under a prior depth map (first map
// in list order wins where maps overlap) and labels it with the map's depth.
// Scene i draws its Bernoulli(p) keep decisions from Rng::stream(seed, i) in
// row-major order; a per-scene cap keeps a seeded random subset.
inline TrainingTable build_exp3(std::span<const Grid> prior_maps, std::span<const SceneRef> scenes,
                                const QaPolicy& policy, const SyntheticSamplingPolicy& sampling,
                                const std::vector<std::string>& bands = default_feature_bands(),
                                unsigned workers = 0) {
  sampling.validate();
  if (prior_maps.empty()) throw DataError("exp3 needs at least one prior depth map");
  const GridGeometry& g = prior_maps.front().geometry();
  for (const auto& m : prior_maps) require_same_geometry(g, m.geometry(), "prior maps");

  // Label per cell from the prior maps; excluded pixels never become candidates.
  std::vector<float> label(g.cell_count(), kDefaultNodata);
  std::vector<std::size_t> candidates;
  for (std::size_t cell = 0; cell < g.cell_count(); ++cell) {
    if (sampling.exclusion_set.contains(g.pixel(cell))) continue;
    for (const auto& m : prior_maps) {
      const Band& b = m.band(0);
      if (b.valid(cell) && b.values[cell] >= 0.0f) {
        label[cell] = b.values[cell];
        candidates.push_back(cell);
        break;
      }
    }
  }

  std::vector<TrainingTable> parts(scenes.size(), TrainingTable(bands));
  parallel_for(scenes.size(), workers, [&](std::size_t s) {
    const Grid& scene = *scenes[s].scene;
    const Grid& qa = *scenes[s].qa;
    require_same_geometry(g, scene.geometry(), "prior map vs scene " + scenes[s].id);
    require_same_geometry(g, qa.geometry(), "prior map vs QA " + scenes[s].id);
    const auto band_idx = resolve_bands(scene, bands);
    Rng rng = Rng::stream(sampling.seed, s);
    std::vector<std::size_t> kept;
    std::vector<double> x(bands.size());
    for (std::size_t cell : candidates) {
      if (!policy.accepts(qa.band(0), cell)) continue;
      if (!read_features(scene, band_idx, cell, x)) continue;
      if (sampling.probability < 1.0 && !(rng.uniform() < sampling.probability)) continue;
      kept.push_back(cell);
    }
    if (sampling.max_rows_per_scene && kept.size() > *sampling.max_rows_per_scene) {
      for (std::size_t i = 0; i < *sampling.max_rows_per_scene; ++i)
        std::swap(kept[i], kept[i + static_cast<std::size_t>(rng.below(kept.size() - i))]);
      kept.resize(*sampling.max_rows_per_scene);
      std::sort(kept.begin(), kept.end());
    }
    TrainingTable& t = parts[s];
    for (std::size_t cell : kept) {
      read_features(scene, band_idx, cell, x);
      t.add_row(scenes[s].id, g.pixel(cell), x, label[cell], Provenance::Synthetic);
    }
  });
  TrainingTable out(bands);
  for (const auto& p : parts) out.append(p);
  out.sort_canonical();
  return out;
}

inline std::set<PixelIndex> pixel_set(const DepthPixelSet& pixels) {
  std::set<PixelIndex> s;
  for (const auto& p : pixels.pixels) s.insert(p.pixel);
  return s;
}

}  // namespace bathymap
