#pragma once

// Config-driven runs: load inputs, run one experiment, write artifacts and a
// manifest that pins everything needed to reproduce them.

#include <chrono>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "bathymap/compositor.hpp"
#include "bathymap/experiments.hpp"
#include "bathymap/fixture_io.hpp"
#include "bathymap/forest.hpp"
#include "bathymap/grid_io.hpp"
#include "bathymap/ingest.hpp"
#include "bathymap/io_util.hpp"
#include "bathymap/linear_bathy.hpp"
#include "bathymap/metrics.hpp"
#include "bathymap/training_table.hpp"

namespace bathymap {

inline constexpr std::string_view kToolVersion = "bathymap 1.0.0";

// Structured progress lines on stderr: stage, scene, elapsed time, message.
class Logger {
 public:
  explicit Logger(bool quiet = false, std::ostream& out = std::cerr) : quiet_(quiet), out_(&out) {}

  void log(std::string_view stage, std::string_view message, std::string_view scene = "-") const {
    if (quiet_) return;
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start_).count();
    *out_ << "stage=" << stage << " scene=" << scene << " t_ms=" << ms << " msg=\"" << message << "\"\n";
  }

  bool quiet() const { return quiet_; }

 private:
  using Clock = std::chrono::steady_clock;
  bool quiet_;
  std::ostream* out_;
  Clock::time_point start_ = Clock::now();
};

struct PipelinePaths {
  std::filesystem::path scene_list;  // scene_id,year,scene_path,qa_path
  std::filesystem::path sonar;
  std::filesystem::path water_mask;
  std::filesystem::path output_dir;
};

struct PipelineConfig {
  Experiment experiment = Experiment::Exp3;
  std::optional<std::uint64_t> seed;  // required; no implicit randomness
  PipelinePaths paths;
  std::string reference_scene;
  int insitu_year = 2017;
  ExperimentSettings settings;
  ToleranceRule tolerance;
  bool include_mean = false;

  // Fail fast: checks everything that can be checked before compute.
  void validate() const {
    if (!seed) throw ConfigError("config: 'seed' is required");
    if (reference_scene.empty()) throw ConfigError("config: 'reference_scene' is required");
    for (const auto& [key, p] : {std::pair{"paths.scene_list", paths.scene_list},
                                 std::pair{"paths.sonar", paths.sonar},
                                 std::pair{"paths.water_mask", paths.water_mask}}) {
      if (p.empty()) throw ConfigError(std::string("config: '") + key + "' is required");
      if (!std::filesystem::exists(p))
        throw ConfigError(std::string("config: ") + key + " does not exist: " + p.string());
    }
    if (paths.output_dir.empty()) throw ConfigError("config: 'paths.output_dir' is required");
    if (settings.bands.empty()) throw ConfigError("config: 'bands' must not be empty");
    settings.qa.validate();
    settings.forest.validate(settings.bands.size());
    if (!(settings.test_fraction > 0.0 && settings.test_fraction < 1.0))
      throw ConfigError("config: holdout.test_fraction must lie in (0, 1)");
    if (!(settings.synthetic_probability > 0.0 && settings.synthetic_probability <= 1.0))
      throw ConfigError("config: sampling.probability must lie in (0, 1]");
    if (!(settings.linear.n_scale > 0.0)) throw ConfigError("config: linear.n_scale must be positive");
    if (settings.window.start_year > settings.window.end_year)
      throw ConfigError("config: composite window starts after it ends");
    if (!(tolerance.absolute_m >= 0.0 && tolerance.relative >= 0.0))
      throw ConfigError("config: tolerance terms must be non-negative");
  }
};

namespace detail {

inline std::filesystem::path resolve_path(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  return j.contains(key) && !j.at(key).is_null() ? j.at(key).get<T>() : fallback;
}

}  // namespace detail

inline Json config_to_json(const PipelineConfig& c) {
  const auto& s = c.settings;
  Json j;
  j["experiment"] = std::string(experiment_name(c.experiment));
  j["seed"] = c.seed ? Json(*c.seed) : Json(nullptr);
  j["paths"] = {{"scene_list", c.paths.scene_list.string()},
                {"sonar", c.paths.sonar.string()},
                {"water_mask", c.paths.water_mask.string()},
                {"output_dir", c.paths.output_dir.string()}};
  j["reference_scene"] = c.reference_scene;
  j["insitu_year"] = c.insitu_year;
  j["bands"] = s.bands;
  j["qa"] = {{"accepted", std::vector<int>(s.qa.accepted_flag_values.begin(), s.qa.accepted_flag_values.end())}};
  std::string mf = "sqrt";
  if (s.forest.max_features.rule == MaxFeatures::Rule::All) mf = "all";
  j["forest"] = {{"n_trees", s.forest.n_trees},
                 {"max_features", s.forest.max_features.rule == MaxFeatures::Rule::Explicit
                                      ? Json(s.forest.max_features.count)
                                      : Json(mf)},
                 {"min_samples_leaf", s.forest.min_samples_leaf},
                 {"max_depth", s.forest.max_depth ? Json(*s.forest.max_depth) : Json(nullptr)},
                 {"bootstrap", s.forest.bootstrap}};
  j["linear"] = {{"band_i", s.linear.band_i},
                 {"band_j", s.linear.band_j},
                 {"n_scale", s.linear.n_scale},
                 {"min_rows", s.linear.min_rows},
                 {"candidate_bands", s.linear.candidate_bands}};
  j["holdout"] = {{"mode", std::string(holdout_name(s.holdout))},
                  {"test_fraction", s.test_fraction},
                  {"validation_scenes", std::string(validation_scenes_name(s.validation_scenes))}};
  j["sampling"] = {{"probability", s.synthetic_probability},
                   {"max_rows_per_scene",
                    s.synthetic_max_rows_per_scene ? Json(*s.synthetic_max_rows_per_scene) : Json(nullptr)}};
  j["composite"] = {{"start_year", s.window.start_year}, {"end_year", s.window.end_year},
                    {"include_mean", c.include_mean}};
  j["tolerance"] = {{"absolute_m", c.tolerance.absolute_m}, {"relative", c.tolerance.relative}};
  j["workers"] = s.workers;
  return j;
}

// Relative paths resolve against `base` (the config file's directory).
inline PipelineConfig config_from_json(const Json& j, const std::filesystem::path& base = {}) {
  using detail::get_or;
  try {
    PipelineConfig c;
    auto& s = c.settings;
    if (j.contains("experiment")) c.experiment = parse_experiment(j.at("experiment").get<std::string>());
    if (j.contains("seed") && !j.at("seed").is_null()) c.seed = j.at("seed").get<std::uint64_t>();
    const Json& p = j.at("paths");
    c.paths.scene_list = detail::resolve_path(base, p.at("scene_list").get<std::string>());
    c.paths.sonar = detail::resolve_path(base, p.at("sonar").get<std::string>());
    c.paths.water_mask = detail::resolve_path(base, p.at("water_mask").get<std::string>());
    c.paths.output_dir = detail::resolve_path(base, p.at("output_dir").get<std::string>());
    c.reference_scene = get_or<std::string>(j, "reference_scene", "");
    c.insitu_year = get_or<int>(j, "insitu_year", 2017);
    if (j.contains("bands")) s.bands = j.at("bands").get<std::vector<std::string>>();
    if (j.contains("qa")) {
      const auto codes = j.at("qa").at("accepted").get<std::vector<int>>();
      s.qa.accepted_flag_values = std::set<int>(codes.begin(), codes.end());
    }
    if (j.contains("forest")) {
      const Json& f = j.at("forest");
      s.forest.n_trees = get_or<std::size_t>(f, "n_trees", s.forest.n_trees);
      if (f.contains("max_features")) {
        const Json& mf = f.at("max_features");
        if (mf.is_number_unsigned()) s.forest.max_features = MaxFeatures::exactly(mf.get<std::size_t>());
        else if (mf == "sqrt") s.forest.max_features = MaxFeatures::sqrt();
        else if (mf == "all") s.forest.max_features = MaxFeatures::all();
        else throw ConfigError("config: forest.max_features must be sqrt, all or a positive count");
      }
      s.forest.min_samples_leaf = get_or<std::size_t>(f, "min_samples_leaf", s.forest.min_samples_leaf);
      if (f.contains("max_depth") && !f.at("max_depth").is_null())
        s.forest.max_depth = f.at("max_depth").get<std::size_t>();
      s.forest.bootstrap = get_or<bool>(f, "bootstrap", s.forest.bootstrap);
    }
    if (j.contains("linear")) {
      const Json& l = j.at("linear");
      s.linear.band_i = get_or<std::string>(l, "band_i", s.linear.band_i);
      s.linear.band_j = get_or<std::string>(l, "band_j", s.linear.band_j);
      s.linear.n_scale = get_or<double>(l, "n_scale", s.linear.n_scale);
      s.linear.min_rows = get_or<std::size_t>(l, "min_rows", s.linear.min_rows);
      if (l.contains("candidate_bands"))
        s.linear.candidate_bands = l.at("candidate_bands").get<std::vector<std::string>>();
    }
    if (j.contains("holdout")) {
      const Json& h = j.at("holdout");
      if (h.contains("mode")) s.holdout = parse_holdout(h.at("mode").get<std::string>());
      s.test_fraction = get_or<double>(h, "test_fraction", s.test_fraction);
      if (h.contains("validation_scenes"))
        s.validation_scenes = parse_validation_scenes(h.at("validation_scenes").get<std::string>());
    }
    if (j.contains("sampling")) {
      const Json& sp = j.at("sampling");
      s.synthetic_probability = get_or<double>(sp, "probability", s.synthetic_probability);
      if (sp.contains("max_rows_per_scene") && !sp.at("max_rows_per_scene").is_null())
        s.synthetic_max_rows_per_scene = sp.at("max_rows_per_scene").get<std::size_t>();
    }
    if (j.contains("composite")) {
      const Json& w = j.at("composite");
      s.window.start_year = get_or<int>(w, "start_year", s.window.start_year);
      s.window.end_year = get_or<int>(w, "end_year", s.window.end_year);
      c.include_mean = get_or<bool>(w, "include_mean", false);
    }
    if (j.contains("tolerance")) {
      const Json& t = j.at("tolerance");
      c.tolerance.absolute_m = get_or<double>(t, "absolute_m", c.tolerance.absolute_m);
      c.tolerance.relative = get_or<double>(t, "relative", c.tolerance.relative);
    }
    s.workers = get_or<unsigned>(j, "workers", 0u);
    if (c.seed) s.seed = *c.seed;
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

inline PipelineConfig read_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file does not exist: " + path.string());
  Json j = Json::parse(io::read_file(path), nullptr, false);
  if (j.is_discarded()) throw ConfigError(path.string() + ": not valid JSON");
  return config_from_json(j, path.parent_path());
}

inline void write_config(const PipelineConfig& c, const std::filesystem::path& path) {
  auto out = io::open_out(path);
  out << config_to_json(c).dump(2) << '\n';
}

// A config for a fixture written by write_fixture.
inline PipelineConfig fixture_config(const FixtureDescriptor& d, const std::filesystem::path& fixture_root,
                                     const std::filesystem::path& output_dir, Experiment e) {
  const FixtureLayout lay{fixture_root};
  PipelineConfig c;
  c.experiment = e;
  c.seed = d.seed;
  c.settings.seed = d.seed;
  c.paths = {lay.scene_list(), lay.sonar(), lay.water_mask(), output_dir};
  c.insitu_year = d.insitu_year;
  for (const auto& s : d.schedule)
    if (s.count > 0) {
      c.reference_scene = scene_id_for(s.year, 0);
      break;
    }
  return c;
}

struct SceneListEntry {
  std::string id;
  int year = 0;
  std::filesystem::path scene;
  std::filesystem::path qa;
};

inline std::vector<SceneListEntry> read_scene_list(const std::filesystem::path& path) {
  auto in = io::open_in(path);
  std::string line;
  if (!std::getline(in, line) || io::trim(line) != "scene_id,year,scene_path,qa_path")
    throw DataError(path.string() + ": expected header scene_id,year,scene_path,qa_path");
  std::vector<SceneListEntry> out;
  std::set<std::string> seen;
  while (std::getline(in, line)) {
    const auto t = io::trim(line);
    if (t.empty()) continue;
    const auto c = io::split(t, ',');
    if (c.size() != 4) throw DataError(path.string() + ": scene list rows need 4 columns");
    const auto year = io::parse_number<int>(c[1]);
    if (!year) throw DataError(path.string() + ": bad year '" + std::string(c[1]) + "'");
    SceneListEntry e{std::string(c[0]), *year, detail::resolve_path(path.parent_path(), std::string(c[2])),
                     detail::resolve_path(path.parent_path(), std::string(c[3]))};
    if (!seen.insert(e.id).second) throw DataError(path.string() + ": duplicate scene id " + e.id);
    out.push_back(std::move(e));
  }
  if (out.empty()) throw DataError(path.string() + ": no scenes listed");
  return out;
}

// Owned inputs with stable addresses for the SceneRefs in `inputs`.
struct LoadedInputs {
  std::vector<SceneListEntry> entries;
  std::deque<Grid> grids;
  Grid water_mask;
  SonarLoadResult sonar;
  ExperimentInputs inputs;
  std::map<std::string, std::string> checksums;  // input file -> fnv1a-64
};

inline std::string file_checksum(const std::filesystem::path& p) { return io::hex64(io::fnv1a(io::read_file(p))); }

inline void load_inputs(const PipelineConfig& cfg, LoadedInputs& out, const Logger& log) {
  out.entries = read_scene_list(cfg.paths.scene_list);
  for (const auto& e : out.entries) {
    if (!std::filesystem::exists(e.scene)) throw ConfigError("scene file does not exist: " + e.scene.string());
    if (!std::filesystem::exists(e.qa)) throw ConfigError("QA file does not exist: " + e.qa.string());
  }
  auto note = [&](const std::filesystem::path& p) { out.checksums[p.lexically_normal().string()] = file_checksum(p); };
  note(cfg.paths.scene_list);
  note(cfg.paths.sonar);
  note(cfg.paths.water_mask);
  note(grid_payload_path(cfg.paths.water_mask));

  out.water_mask = read_grid(cfg.paths.water_mask);
  out.inputs.water_mask = &out.water_mask;
  out.inputs.lakes = label_lakes(out.water_mask);
  out.inputs.insitu_year = cfg.insitu_year;
  out.inputs.reference_scene_id = cfg.reference_scene;
  log.log("load", "water mask: " + std::to_string(out.inputs.lakes.lake_count) + " lakes");

  for (const auto& e : out.entries) {
    out.grids.push_back(read_grid(e.scene));
    const Grid* scene = &out.grids.back();
    out.grids.push_back(read_grid(e.qa));
    const Grid* qa = &out.grids.back();
    require_same_geometry(out.water_mask.geometry(), scene->geometry(), "water mask vs scene " + e.id);
    for (const auto& p : {e.scene, grid_payload_path(e.scene), e.qa, grid_payload_path(e.qa)}) note(p);
    out.inputs.scenes.push_back({{e.id, scene, qa}, e.year});
  }
  log.log("load", std::to_string(out.entries.size()) + " scenes");

  out.sonar = load_sonar_points(cfg.paths.sonar);
  for (const auto& w : out.sonar.warnings) log.log("load", w);
  out.inputs.insitu = aggregate_points_to_pixels(out.sonar.points, out.water_mask.geometry(), out.inputs.lakes);
  log.log("aggregate", std::to_string(out.sonar.points.size()) + " soundings -> " +
                           std::to_string(out.inputs.insitu.pixels.size()) + " depth pixels");
  bool found = false;
  for (const auto& s : out.inputs.scenes) found = found || s.ref.id == cfg.reference_scene;
  if (!found) throw ConfigError("reference scene '" + cfg.reference_scene + "' is not in the scene list");
}

struct RunSummary {
  ExperimentResult result;
  ValidationReport report;
  std::vector<std::string> artifacts;  // relative to output_dir, sorted
};

inline void write_experiment_stats(const ExperimentResult& r, const std::filesystem::path& path) {
  auto out = io::open_out(path);
  out << "format = BSTATS1\n"
      << "experiment = " << experiment_name(r.experiment) << "\n"
      << "training_rows = " << r.training.size() << "\n"
      << "train_pixels = " << r.train_pixels.pixels.size() << "\n"
      << "test_pixels = " << r.test_pixels.pixels.size() << "\n"
      << "training_r2 = " << format_optional(r.train_r2) << "\n"
      << "validation_r2 = " << format_optional(r.validation.r2) << "\n"
      << "validation_mae_m = " << io::format_real(r.validation.mae) << "\n"
      << "validation_observations = " << r.validation.n << "\n"
      << "oob_r2 = " << format_optional(r.model.oob_r2) << "\n";
  if (r.same_scene)
    out << "same_scene_validation_r2 = " << format_optional(r.same_scene->r2) << "\n"
        << "same_scene_validation_mae_m = " << io::format_real(r.same_scene->mae) << "\n";
}

// Outputs land only under output_dir. A RUNNING marker exists while the run
// is in progress and is replaced by FAILED (with the error) or removed once
// manifest.json, written last, is complete.
inline RunSummary run_pipeline(const PipelineConfig& cfg, const Logger& log = Logger(true)) {
  cfg.validate();
  namespace fs = std::filesystem;
  const fs::path out_dir = cfg.paths.output_dir;
  fs::create_directories(out_dir);
  fs::remove(out_dir / "manifest.json");
  fs::remove(out_dir / "FAILED");
  { io::open_out(out_dir / "RUNNING") << "in progress\n"; }
  try {
    LoadedInputs li;
    load_inputs(cfg, li, log);
    RunSummary sum;
    std::vector<std::string> artifacts;
    auto rel = [&](const fs::path& p) {
      artifacts.push_back(p.lexically_relative(out_dir).generic_string());
      return p;
    };

    ExperimentSettings st = cfg.settings;
    st.seed = *cfg.seed;
    log.log(experiment_name(cfg.experiment), "training");
    sum.result = run_experiment(cfg.experiment, li.inputs, st);
    const auto& r = sum.result;
    log.log(experiment_name(cfg.experiment),
            std::to_string(r.training.size()) + " training rows, validation r2 " + format_optional(r.validation.r2));

    write_depth_pixels(li.inputs.insitu, rel(out_dir / "depth_pixels.csv"));
    write_depth_pixels(r.test_pixels, rel(out_dir / "holdout_pixels.csv"));
    write_training_table(r.training, rel(out_dir / "training.btable"));
    write_forest(r.model, rel(out_dir / "model.bforest"));
    if (!r.linear_models.empty()) write_linear_models(r.linear_models, rel(out_dir / "linear.blinear"));
    if (r.prior_map) {
      write_grid(*r.prior_map, rel(out_dir / "prior_depth.bgrid"));
      rel(grid_payload_path(out_dir / "prior_depth.bgrid"));
    }
    write_experiment_stats(r, rel(out_dir / "stats.kv"));

    const auto preds = predict_stack(r.model, li.inputs, st);
    std::vector<ScenePrediction> sp;
    {
      auto list = io::open_out(rel(out_dir / "predictions.csv"));
      list << "scene_id,year,path\n";
      for (const auto& [scene, grid] : preds) {
        const fs::path p = out_dir / "predictions" / (scene.ref.id + ".bgrid");
        write_grid(grid, rel(p));
        rel(grid_payload_path(p));
        list << scene.ref.id << ',' << scene.year << ",predictions/" << scene.ref.id << ".bgrid\n";
        sp.push_back({scene.ref.id, scene.year, &grid});
        log.log("predict", "written", scene.ref.id);
      }
    }
    CompositeOptions co;
    co.include_mean = cfg.include_mean;
    co.workers = st.workers;
    const CompositeStack comp = composite_stack(sp, st.window, co);
    write_composite(comp, rel(out_dir / "composite.bgrid"));
    rel(grid_payload_path(out_dir / "composite.bgrid"));
    rel(composite_manifest_path(out_dir / "composite.bgrid"));
    log.log("composite", std::to_string(comp.scene_ids.size()) + " scenes");

    sum.report = validate_map(comp, r.test_pixels, cfg.tolerance);
    write_validation_report(sum.report, rel(out_dir / "report.kv"), rel(out_dir / "report.txt"));
    log.log("validate", "composite r2 " + format_optional(sum.report.r2));

    std::sort(artifacts.begin(), artifacts.end());
    Json manifest;
    manifest["tool"] = std::string(kToolVersion);
    manifest["experiment"] = std::string(experiment_name(cfg.experiment));
    manifest["seed"] = *cfg.seed;
    const std::string cfg_text = config_to_json(cfg).dump();
    manifest["config_hash"] = io::hex64(io::fnv1a(cfg_text));
    manifest["config"] = config_to_json(cfg);
    Json inputs = Json::object();
    for (const auto& [p, h] : li.checksums) inputs[p] = h;
    manifest["inputs"] = inputs;
    Json outs = Json::object();
    for (const auto& a : artifacts) outs[a] = file_checksum(out_dir / a);
    manifest["artifacts"] = outs;
    { io::open_out(out_dir / "manifest.json") << manifest.dump(2) << '\n'; }
    sum.artifacts = artifacts;
    fs::remove(out_dir / "RUNNING");
    log.log("done", "manifest written");
    return sum;
  } catch (const std::exception& e) {
    fs::remove(out_dir / "RUNNING");
    io::open_out(out_dir / "FAILED") << e.what() << '\n';
    throw;
  }
}

}  // namespace bathymap
