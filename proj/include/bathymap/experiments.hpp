#pragma once

// The three training-data experiments and the final composite map, on
// in-memory inputs. File handling lives in pipeline.hpp.

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "bathymap/compositor.hpp"
#include "bathymap/forest.hpp"
#include "bathymap/ingest.hpp"
#include "bathymap/linear_bathy.hpp"
#include "bathymap/metrics.hpp"
#include "bathymap/raster.hpp"
#include "bathymap/stats.hpp"
#include "bathymap/training_builder.hpp"

namespace bathymap {

enum class Experiment { Exp1, Exp2, Exp3, FinalMap };

inline std::string_view experiment_name(Experiment e) {
  switch (e) {
    case Experiment::Exp1: return "exp1";
    case Experiment::Exp2: return "exp2";
    case Experiment::Exp3: return "exp3";
    case Experiment::FinalMap: return "final-map";
  }
  return "?";
}

inline Experiment parse_experiment(std::string_view s) {
  if (s == "exp1") return Experiment::Exp1;
  if (s == "exp2") return Experiment::Exp2;
  if (s == "exp3") return Experiment::Exp3;
  if (s == "final-map") return Experiment::FinalMap;
  throw ConfigError("unknown experiment '" + std::string(s) + "' (expected exp1, exp2, exp3, final-map)");
}

struct DatedScene {
  SceneRef ref;
  int year = 0;
};

struct ExperimentInputs {
  std::vector<DatedScene> scenes;  // the full stack
  std::string reference_scene_id;  // single scene of exp1 and the prior maps
  int insitu_year = 2017;          // scenes of exp2 and of validation
  DepthPixelSet insitu;
  LakeLabelGrid lakes;
  const Grid* water_mask = nullptr;

  const DatedScene& reference() const {
    for (const auto& s : scenes)
      if (s.ref.id == reference_scene_id) return s;
    throw DataError("reference scene '" + reference_scene_id + "' is not in the scene stack");
  }

  std::vector<SceneRef> scenes_of_year(int year) const {
    std::vector<SceneRef> out;
    for (const auto& s : scenes)
      if (s.year == year) out.push_back(s.ref);
    return out;
  }

  std::vector<SceneRef> scenes_in(const CompositeWindow& w) const {
    std::vector<SceneRef> out;
    for (const auto& s : scenes)
      if (w.contains(s.year)) out.push_back(s.ref);
    return out;
  }

  std::vector<SceneRef> all_scenes() const {
    std::vector<SceneRef> out;
    for (const auto& s : scenes) out.push_back(s.ref);
    return out;
  }
};

// Held-out in-situ pixels: a random subset of pixels, or every pixel of a
// random subset of lakes.
enum class HoldoutMode { Pixel, Lake };

inline std::string_view holdout_name(HoldoutMode m) { return m == HoldoutMode::Pixel ? "pixel" : "lake"; }

inline HoldoutMode parse_holdout(std::string_view s) {
  if (s == "pixel") return HoldoutMode::Pixel;
  if (s == "lake") return HoldoutMode::Lake;
  throw ConfigError("unknown holdout mode '" + std::string(s) + "' (expected pixel or lake)");
}

// Scenes over which held-out pixels are scored: the in-situ year only, or
// every stack scene inside the composite window.
enum class ValidationScenes { InSituYear, Window };

inline std::string_view validation_scenes_name(ValidationScenes v) {
  return v == ValidationScenes::InSituYear ? "insitu-year" : "window";
}

inline ValidationScenes parse_validation_scenes(std::string_view s) {
  if (s == "insitu-year") return ValidationScenes::InSituYear;
  if (s == "window") return ValidationScenes::Window;
  throw ConfigError("unknown validation scene set '" + std::string(s) + "' (expected insitu-year or window)");
}

struct ExperimentSettings {
  std::vector<std::string> bands = default_feature_bands();
  QaPolicy qa;
  ForestParams forest;
  LinearConfig linear;
  double test_fraction = 0.2;
  HoldoutMode holdout = HoldoutMode::Pixel;
  ValidationScenes validation_scenes = ValidationScenes::Window;
  double synthetic_probability = 0.05;
  std::optional<std::size_t> synthetic_max_rows_per_scene;
  CompositeWindow window;
  std::uint64_t seed = 1;
  unsigned workers = 0;
};

struct HeldOutScore {
  std::optional<double> r2;
  double mae = 0.0;
  std::size_t n = 0;
};

struct ExperimentResult {
  Experiment experiment = Experiment::Exp1;
  DepthPixelSet train_pixels;
  DepthPixelSet test_pixels;  // held out of every training table
  TrainingTable training{default_feature_bands()};
  std::vector<LinearLakeModel> linear_models;  // exp3 and final-map
  std::vector<std::pair<std::uint32_t, std::string>> linear_skipped;
  std::optional<Grid> prior_map;
  ForestModel model;
  std::optional<double> train_r2;
  HeldOutScore validation;                   // held-out pixels, every clear in-situ-year observation
  std::optional<HeldOutScore> same_scene;    // exp1 only: held-out pixels on the training scene
};

inline DepthPixelSet pixel_subset(const DepthPixelSet& set, std::span<const std::size_t> idx) {
  DepthPixelSet out;
  for (auto i : idx) out.pixels.push_back(set.pixels[i]);
  return out;
}

// Seeded train/test partition of the in-situ pixels.
inline std::pair<DepthPixelSet, DepthPixelSet> holdout_split(const DepthPixelSet& insitu, HoldoutMode mode,
                                                             double test_fraction, std::uint64_t seed) {
  if (mode == HoldoutMode::Pixel) {
    const auto s = split_indices(insitu.pixels.size(), test_fraction, seed);
    return {pixel_subset(insitu, s.train), pixel_subset(insitu, s.test)};
  }
  std::vector<std::uint32_t> lakes;
  for (const auto& p : insitu.pixels) lakes.push_back(p.lake_id);
  std::sort(lakes.begin(), lakes.end());
  lakes.erase(std::unique(lakes.begin(), lakes.end()), lakes.end());
  if (lakes.size() < 2) throw DataError("lake holdout needs in-situ pixels in at least two lakes");
  const auto s = split_indices(lakes.size(), test_fraction, seed);
  std::set<std::uint32_t> test_lakes;
  for (auto i : s.test) test_lakes.insert(lakes[i]);
  std::pair<DepthPixelSet, DepthPixelSet> out;
  for (const auto& p : insitu.pixels) (test_lakes.contains(p.lake_id) ? out.second : out.first).pixels.push_back(p);
  return out;
}

// Per-observation score of a model at the given pixels over a scene list.
inline HeldOutScore score_pixels(const ForestModel& model, std::span<const SceneRef> scenes,
                                 const DepthPixelSet& pixels, const QaPolicy& qa,
                                 const std::vector<std::string>& bands, unsigned workers = 0) {
  const TrainingTable obs = build_exp2(scenes, qa, pixels, bands, workers);
  HeldOutScore s;
  s.n = obs.size();
  if (s.n == 0) return s;
  std::vector<double> pred(s.n);
  parallel_for(s.n, workers, [&](std::size_t i) { pred[i] = model.predict_unchecked(obs.features(i)); });
  const auto truth = obs.labels();
  s.r2 = r2(pred, truth);
  s.mae = mae(pred, truth);
  return s;
}

inline double training_r2_or_nan(const ForestModel& model, const TrainingTable& t, unsigned workers) {
  std::vector<double> pred(t.size());
  parallel_for(t.size(), workers, [&](std::size_t i) { pred[i] = model.predict_unchecked(t.features(i)); });
  return r2(pred, t.labels()).value_or(std::numeric_limits<double>::quiet_NaN());
}

// Per-lake linear fits on the reference scene, painted into one prior depth map.
inline void fit_prior(ExperimentResult& res, const ExperimentInputs& in, const ExperimentSettings& st,
                      const DepthPixelSet& fit_pixels) {
  const auto& ref = in.reference();
  std::vector<std::string> linear_bands{st.linear.band_i, st.linear.band_j};
  for (const auto& b : st.linear.candidate_bands) linear_bands.push_back(b);
  std::sort(linear_bands.begin(), linear_bands.end());
  linear_bands.erase(std::unique(linear_bands.begin(), linear_bands.end()), linear_bands.end());
  const TrainingTable table = build_exp1(ref.ref, st.qa, fit_pixels, linear_bands);
  auto summary = fit_lakes_linear(table, in.lakes, st.linear);
  if (summary.models.empty()) throw DataError("no lake admits a linear fit; cannot build a prior map");
  res.linear_models = std::move(summary.models);
  res.linear_skipped = std::move(summary.skipped);
  res.prior_map = predict_lakes_linear(res.linear_models, *ref.ref.scene, in.lakes);
}

// exp1: reference scene at training pixels. exp2: every in-situ-year scene at
// training pixels. exp3: prior-map labels over the whole stack, with every
// in-situ pixel excluded. final-map: as exp3 with the prior fit on all in-situ
// pixels. Held-out pixels come from a seeded split of the in-situ pixels.
inline ExperimentResult run_experiment(Experiment e, const ExperimentInputs& in, const ExperimentSettings& st) {
  st.qa.validate();
  if (in.insitu.pixels.size() < 2) throw DataError("need at least two in-situ depth pixels");
  ExperimentResult res;
  res.experiment = e;
  res.training = TrainingTable(st.bands);
  if (e == Experiment::FinalMap) {
    res.train_pixels = in.insitu;
    res.test_pixels = in.insitu;
  } else {
    std::tie(res.train_pixels, res.test_pixels) = holdout_split(in.insitu, st.holdout, st.test_fraction, st.seed);
  }

  const auto insitu_scenes = in.scenes_of_year(in.insitu_year);
  if (insitu_scenes.empty()) throw DataError("no scene in the in-situ year");
  const auto validation_scenes =
      st.validation_scenes == ValidationScenes::InSituYear ? insitu_scenes : in.scenes_in(st.window);
  if (validation_scenes.empty()) throw DataError("no scene to validate on");
  switch (e) {
    case Experiment::Exp1:
      res.training = build_exp1(in.reference().ref, st.qa, res.train_pixels, st.bands);
      break;
    case Experiment::Exp2:
      res.training = build_exp2(insitu_scenes, st.qa, res.train_pixels, st.bands, st.workers);
      break;
    case Experiment::Exp3:
    case Experiment::FinalMap: {
      fit_prior(res, in, st, res.train_pixels);
      SyntheticSamplingPolicy sp;
      sp.probability = st.synthetic_probability;
      sp.max_rows_per_scene = st.synthetic_max_rows_per_scene;
      sp.seed = derive_seed(st.seed, 3);
      sp.exclusion_set = pixel_set(in.insitu);
      const auto stack = in.all_scenes();
      res.training = build_exp3(std::span<const Grid>(&*res.prior_map, 1), stack, st.qa, sp, st.bands, st.workers);
      for (std::size_t i = 0; i < res.training.size(); ++i)
        if (sp.exclusion_set.contains(res.training.pixel(i)))
          throw DataError("synthetic training row intersects the in-situ validation set");
      break;
    }
  }
  if (res.training.size() == 0) throw DataError(std::string(experiment_name(e)) + ": empty training table");

  ForestParams fp = st.forest;
  fp.seed = derive_seed(st.seed, 7);
  res.model = fit_forest(res.training, fp, st.workers);
  res.train_r2 = training_r2_or_nan(res.model, res.training, st.workers);
  res.validation = score_pixels(res.model, validation_scenes, res.test_pixels, st.qa, st.bands, st.workers);
  if (e == Experiment::Exp1) {
    const SceneRef ref = in.reference().ref;
    res.same_scene = score_pixels(res.model, std::span<const SceneRef>(&ref, 1), res.test_pixels, st.qa,
                                  st.bands, st.workers);
  }
  return res;
}

// Per-scene depth maps for every stack scene inside the window.
inline std::vector<std::pair<DatedScene, Grid>> predict_stack(const ForestModel& model, const ExperimentInputs& in,
                                                              const ExperimentSettings& st) {
  std::vector<std::pair<DatedScene, Grid>> out;
  for (const auto& s : in.scenes) {
    if (!st.window.contains(s.year)) continue;
    out.emplace_back(s, predict_grid(model, *s.ref.scene, *in.water_mask, *s.ref.qa, st.qa,
                                     GridPredictOptions{64, st.workers}));
  }
  return out;
}

}  // namespace bathymap
