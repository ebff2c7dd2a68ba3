// bathymap: simulate, fit, train, predict, composite and validate lake depth maps.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bathymap/bathymap.hpp"

namespace fs = std::filesystem;
using namespace bathymap;

namespace {

struct Common {
  unsigned workers = 0;
  bool quiet = false;
};

Grid load_required_grid(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw ConfigError(std::string(what) + " does not exist: " + p.string());
  return read_grid(p);
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw ConfigError(std::string(what) + " does not exist: " + p.string());
}

// Config file plus per-flag overrides, shared by run and build-training.
struct ConfigFlags {
  std::string config;
  std::optional<std::string> experiment;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  std::optional<std::size_t> n_trees;
  std::optional<double> probability;

  void add(CLI::App* app) {
    app->add_option("--config", config, "pipeline config (JSON)")->required();
    app->add_option("--experiment", experiment, "exp1 | exp2 | exp3 | final-map");
    app->add_option("--seed", seed, "override config seed");
    app->add_option("--output-dir", output_dir, "override paths.output_dir");
    app->add_option("--n-trees", n_trees, "override forest.n_trees");
    app->add_option("--sampling-probability", probability, "override sampling.probability");
  }

  PipelineConfig load(const Common& common) const {
    PipelineConfig c = read_config(config);
    if (experiment) c.experiment = parse_experiment(*experiment);
    if (seed) c.seed = *seed;
    if (c.seed) c.settings.seed = *c.seed;
    if (output_dir) c.paths.output_dir = *output_dir;
    if (n_trees) c.settings.forest.n_trees = *n_trees;
    if (probability) c.settings.synthetic_probability = *probability;
    if (common.workers) c.settings.workers = common.workers;
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lake bathymetry from multispectral scenes"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--workers", common.workers, "worker threads for every parallel stage (0 = all cores)");
  app.add_flag("--quiet,-q", common.quiet, "suppress progress lines");

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic study area with known depths");
  std::string sim_fixture = "northslope-desk-v1", sim_descriptor, sim_out = "fixture";
  std::optional<std::uint64_t> sim_seed;
  bool sim_config = true;
  sim->add_option("--fixture", sim_fixture, "named fixture");
  sim->add_option("--descriptor", sim_descriptor, "fixture descriptor JSON (overrides --fixture)");
  sim->add_option("--out", sim_out, "output directory");
  sim->add_option("--seed", sim_seed, "override the descriptor seed");
  sim->add_flag("!--no-config", sim_config, "do not write a ready-to-run config.json");

  // aggregate
  auto* agg = app.add_subcommand("aggregate", "grid sonar soundings to per-pixel mean depths");
  std::string agg_sonar, agg_mask, agg_out;
  agg->add_option("--sonar", agg_sonar, "sonar CSV")->required();
  agg->add_option("--water-mask", agg_mask, "water mask grid")->required();
  agg->add_option("--out", agg_out, "depth pixel CSV")->required();

  // fit-linear
  auto* fl = app.add_subcommand("fit-linear", "per-lake log-ratio models and the prior depth map");
  std::string fl_scene, fl_qa, fl_pixels, fl_mask, fl_out, fl_map;
  LinearConfig fl_cfg;
  fl->add_option("--scene", fl_scene, "scene grid")->required();
  fl->add_option("--qa", fl_qa, "QA grid")->required();
  fl->add_option("--depth-pixels", fl_pixels, "depth pixel CSV")->required();
  fl->add_option("--water-mask", fl_mask, "water mask grid")->required();
  fl->add_option("--out", fl_out, "model file")->required();
  fl->add_option("--map-out", fl_map, "also write the painted depth map");
  fl->add_option("--band-i", fl_cfg.band_i, "numerator band");
  fl->add_option("--band-j", fl_cfg.band_j, "denominator band");
  fl->add_option("--n-scale", fl_cfg.n_scale, "reflectance scale inside the logs");

  // build-training
  auto* bt = app.add_subcommand("build-training", "assemble the training table of an experiment");
  ConfigFlags bt_flags;
  std::string bt_out;
  bt_flags.add(bt);
  bt->add_option("--out", bt_out, "table (.btable binary, otherwise CSV)")->required();

  // train
  auto* tr = app.add_subcommand("train", "fit a random forest on a training table");
  std::string tr_table, tr_out, tr_mf = "sqrt";
  ForestParams tr_params;
  std::optional<std::size_t> tr_depth;
  tr->add_option("--table", tr_table, "training table")->required();
  tr->add_option("--out", tr_out, "model file")->required();
  tr->add_option("--n-trees", tr_params.n_trees, "trees");
  tr->add_option("--max-features", tr_mf, "sqrt | all | count");
  tr->add_option("--min-leaf", tr_params.min_samples_leaf, "minimum rows per leaf");
  tr->add_option("--max-depth", tr_depth, "maximum tree depth");
  tr->add_option("--seed", tr_params.seed, "forest seed")->required();

  // predict
  auto* pr = app.add_subcommand("predict", "apply a forest to one scene");
  std::string pr_model, pr_scene, pr_qa, pr_mask, pr_out;
  std::size_t pr_tile = 64;
  pr->add_option("--model", pr_model, "model file")->required();
  pr->add_option("--scene", pr_scene, "scene grid")->required();
  pr->add_option("--qa", pr_qa, "QA grid")->required();
  pr->add_option("--water-mask", pr_mask, "water mask grid")->required();
  pr->add_option("--out", pr_out, "depth grid")->required();
  pr->add_option("--tile-size", pr_tile, "tile edge in pixels");

  // composite
  auto* co = app.add_subcommand("composite", "per-pixel statistics over a time series of depth maps");
  std::string co_list, co_out;
  int co_start = 2016, co_end = 2018;
  bool co_mean = false;
  co->add_option("--predictions", co_list, "CSV scene_id,year,path")->required();
  co->add_option("--out", co_out, "composite grid")->required();
  co->add_option("--start-year", co_start, "first year of the window");
  co->add_option("--end-year", co_end, "last year of the window");
  co->add_flag("--mean", co_mean, "also write a mean layer");

  // validate
  auto* va = app.add_subcommand("validate", "score a composite against in-situ depth pixels");
  std::string va_comp, va_pixels, va_out;
  ToleranceRule va_rule;
  va->add_option("--composite", va_comp, "composite grid")->required();
  va->add_option("--depth-pixels", va_pixels, "depth pixel CSV")->required();
  va->add_option("--out-prefix", va_out, "writes <prefix>.kv and <prefix>.txt")->required();
  va->add_option("--abs-tolerance", va_rule.absolute_m, "absolute tolerance, m");
  va->add_option("--rel-tolerance", va_rule.relative, "relative tolerance");

  // run
  auto* ru = app.add_subcommand("run", "run one experiment end to end from a config");
  ConfigFlags ru_flags;
  ru_flags.add(ru);

  // diff
  auto* di = app.add_subcommand("diff", "difference map and histogram of two depth maps");
  std::string di_a, di_b, di_out, di_hist;
  std::string di_band_a, di_band_b;
  di->add_option("--a", di_a, "first depth grid")->required();
  di->add_option("--b", di_b, "second depth grid")->required();
  di->add_option("--band-a", di_band_a, "band of the first grid (default: first band)");
  di->add_option("--band-b", di_band_b, "band of the second grid (default: first band)");
  di->add_option("--out", di_out, "difference grid (a - b)")->required();
  di->add_option("--histogram", di_hist, "histogram CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : exit_code(ErrorCategory::Config);
  }

  const Logger log(common.quiet);
  try {
    if (*sim) {
      FixtureDescriptor d = sim_descriptor.empty() ? named_fixture(sim_fixture) : read_descriptor(sim_descriptor);
      if (sim_seed) d.seed = *sim_seed;
      log.log("simulate", "generating " + d.name);
      const Fixture f = generate_fixture(d, common.workers);
      write_fixture(f, sim_out);
      if (sim_config) {
        PipelineConfig c = fixture_config(d, fs::path(sim_out), fs::path(sim_out) / "run", Experiment::Exp3);
        Json j = config_to_json(c);
        j["paths"] = {{"scene_list", "scenes.csv"}, {"sonar", "sonar.csv"}, {"water_mask", "water_mask.bgrid"},
                      {"output_dir", "run"}};
        io::open_out(fs::path(sim_out) / "config.json") << j.dump(2) << '\n';
      }
      log.log("simulate", std::to_string(f.scenes.size()) + " scenes, " + std::to_string(f.sonar.size()) +
                              " soundings written to " + sim_out);
    } else if (*agg) {
      require_file(agg_sonar, "sonar file");
      const Grid mask = load_required_grid(agg_mask, "water mask");
      const auto lakes = label_lakes(mask);
      const auto sonar = load_sonar_points(agg_sonar);
      for (const auto& w : sonar.warnings) log.log("aggregate", w);
      const auto px = aggregate_points_to_pixels(sonar.points, mask.geometry(), lakes);
      write_depth_pixels(px, agg_out);
      log.log("aggregate", std::to_string(px.pixels.size()) + " depth pixels (" +
                               std::to_string(px.dropped_outside_grid) + " soundings outside grid, " +
                               std::to_string(px.dropped_not_water) + " not over water)");
    } else if (*fl) {
      const Grid scene = load_required_grid(fl_scene, "scene");
      const Grid qa = load_required_grid(fl_qa, "QA grid");
      const Grid mask = load_required_grid(fl_mask, "water mask");
      require_file(fl_pixels, "depth pixel file");
      const auto lakes = label_lakes(mask);
      const auto pixels = read_depth_pixels(fl_pixels);
      const TrainingTable t = extract_spectra(scene, "scene", pixels, qa, QaPolicy{},
                                              std::vector<std::string>{fl_cfg.band_i, fl_cfg.band_j});
      const auto summary = fit_lakes_linear(t, lakes, fl_cfg);
      for (const auto& [id, why] : summary.skipped) log.log("fit-linear", "lake " + std::to_string(id) + " skipped: " + why);
      if (summary.models.empty()) throw DataError("no lake admits a linear fit");
      write_linear_models(summary.models, fl_out);
      if (!fl_map.empty()) write_grid(predict_lakes_linear(summary.models, scene, lakes), fl_map);
      log.log("fit-linear", std::to_string(summary.models.size()) + " lake models");
    } else if (*bt) {
      const PipelineConfig c = bt_flags.load(common);
      c.validate();
      LoadedInputs li;
      load_inputs(c, li, log);
      const auto res = run_experiment(c.experiment, li.inputs, c.settings);
      write_training_table(res.training, bt_out);
      log.log("build-training", std::to_string(res.training.size()) + " rows");
    } else if (*tr) {
      require_file(tr_table, "training table");
      const TrainingTable t = read_training_table(tr_table);
      if (tr_mf == "sqrt") tr_params.max_features = MaxFeatures::sqrt();
      else if (tr_mf == "all") tr_params.max_features = MaxFeatures::all();
      else if (auto n = io::parse_number<std::size_t>(tr_mf)) tr_params.max_features = MaxFeatures::exactly(*n);
      else throw ConfigError("--max-features must be sqrt, all or a count");
      tr_params.max_depth = tr_depth;
      const ForestModel m = fit_forest(t, tr_params, common.workers);
      write_forest(m, tr_out);
      log.log("train", std::to_string(t.size()) + " rows, OOB r2 " + format_optional(m.oob_r2));
    } else if (*pr) {
      require_file(pr_model, "model");
      const ForestModel m = read_forest(pr_model);
      const Grid scene = load_required_grid(pr_scene, "scene");
      const Grid qa = load_required_grid(pr_qa, "QA grid");
      const Grid mask = load_required_grid(pr_mask, "water mask");
      write_grid(predict_grid(m, scene, mask, qa, QaPolicy{}, GridPredictOptions{pr_tile, common.workers}), pr_out);
    } else if (*co) {
      require_file(co_list, "prediction list");
      auto in = io::open_in(co_list);
      std::string line;
      if (!std::getline(in, line) || io::trim(line) != "scene_id,year,path")
        throw DataError(co_list + ": expected header scene_id,year,path");
      std::deque<Grid> grids;
      std::vector<ScenePrediction> preds;
      while (std::getline(in, line)) {
        const auto t = io::trim(line);
        if (t.empty()) continue;
        const auto c = io::split(t, ',');
        const auto year = c.size() == 3 ? io::parse_number<int>(c[1]) : std::nullopt;
        if (!year) throw DataError(co_list + ": malformed row '" + std::string(t) + "'");
        fs::path p{std::string(c[2])};
        if (p.is_relative()) p = fs::path(co_list).parent_path() / p;
        grids.push_back(load_required_grid(p, "prediction grid"));
        preds.push_back({std::string(c[0]), *year, &grids.back()});
      }
      CompositeOptions opts;
      opts.include_mean = co_mean;
      opts.workers = common.workers;
      write_composite(composite_stack(preds, CompositeWindow{co_start, co_end}, opts), co_out);
    } else if (*va) {
      require_file(va_pixels, "depth pixel file");
      require_file(va_comp, "composite");
      const auto rep = validate_map(read_composite(va_comp), read_depth_pixels(va_pixels), va_rule);
      write_validation_report(rep, va_out + ".kv", va_out + ".txt");
      std::cout << io::read_file(va_out + ".txt");
    } else if (*ru) {
      const PipelineConfig c = ru_flags.load(common);
      const auto sum = run_pipeline(c, log);
      const auto& r = sum.result;
      std::cout << experiment_name(c.experiment) << ": training rows " << r.training.size() << ", training r2 "
                << format_optional(r.train_r2) << ", validation r2 " << format_optional(r.validation.r2)
                << ", MAE " << io::format_real(r.validation.mae) << " m, OOB r2 " << format_optional(r.model.oob_r2)
                << "\ncomposite vs held-out pixels: r2 " << format_optional(sum.report.r2) << " over "
                << sum.report.n << " pixels\n";
    } else if (*di) {
      const Grid a = load_required_grid(di_a, "grid a");
      const Grid b = load_required_grid(di_b, "grid b");
      auto pick = [](const Grid& g, const std::string& band) {
        Grid one(g.geometry());
        one.add_band(band.empty() ? g.band(0) : g.band(band));
        return one;
      };
      const auto d = difference_grid(pick(a, di_band_a), pick(b, di_band_b));
      write_grid(d.difference, di_out);
      if (!di_hist.empty()) write_histogram_csv(d, di_hist);
      std::cout << "valid pixels " << d.n_valid << "\n";
      for (const auto& w : d.within)
        std::cout << "within +/-" << io::format_real(w.tolerance) << " m: " << io::format_real(w.fraction) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "error [" << category_name(e.category()) << "]: " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error [io]: " << e.what() << "\n";
    return exit_code(ErrorCategory::Io);
  }
  return 0;
}
