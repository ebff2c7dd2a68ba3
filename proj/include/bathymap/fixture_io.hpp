#pragma once

// Fixture descriptors as JSON, and writing a generated fixture to disk.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "bathymap/grid_io.hpp"
#include "bathymap/ingest.hpp"
#include "bathymap/io_util.hpp"
#include "bathymap/simulator.hpp"

namespace bathymap {

using Json = nlohmann::ordered_json;

inline Json spectrum_to_json(const Spectrum& s) { return Json(std::vector<double>(s.begin(), s.end())); }

inline Spectrum spectrum_from_json(const Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != kSpectralBands)
    throw ConfigError(what + " must be an array of " + std::to_string(kSpectralBands) + " numbers");
  Spectrum s{};
  for (std::size_t b = 0; b < kSpectralBands; ++b) s[b] = j[b].get<double>();
  return s;
}

inline Json descriptor_to_json(const FixtureDescriptor& d) {
  Json j;
  j["format"] = "bathymap-fixture-1";
  j["name"] = d.name;
  j["seed"] = d.seed;
  j["geometry"] = {{"origin_x", d.geometry.origin_x}, {"origin_y", d.geometry.origin_y},
                   {"pixel_size", d.geometry.pixel_size}, {"n_rows", d.geometry.n_rows},
                   {"n_cols", d.geometry.n_cols},       {"crs_tag", d.geometry.crs_tag}};
  j["optics"] = {{"bottom", spectrum_to_json(d.optics.bottom)},
                 {"deep", spectrum_to_json(d.optics.deep)},
                 {"attenuation", spectrum_to_json(d.optics.attenuation)}};
  Json lakes = Json::array();
  for (const auto& l : d.lakes)
    lakes.push_back({{"center_x", l.center_x}, {"center_y", l.center_y}, {"radius_m", l.radius_m},
                     {"max_depth_m", l.max_depth_m}, {"shape_exponent", l.shape_exponent},
                     {"substrate_brightness", l.substrate_brightness}});
  j["lakes"] = lakes;
  j["land_reflectance"] = spectrum_to_json(d.land);
  j["atmosphere"] = {{"gain_mean", d.gain_mean}, {"gain_sd", d.gain_sd},       {"gain_min", d.gain_min},
                     {"gain_max", d.gain_max},   {"band_gain_sd", d.band_gain_sd}, {"path_sd", d.path_sd}};
  j["substrate_texture_sd"] = d.substrate_texture_sd;
  j["noise_sigma"] = d.noise_sigma;
  j["clouds"] = {{"clear_scene_probability", d.clear_scene_probability},
                 {"fraction_min", d.cloud_fraction_min},
                 {"fraction_max", d.cloud_fraction_max}};
  Json sched = Json::array();
  for (const auto& s : d.schedule) sched.push_back({{"year", s.year}, {"count", s.count}});
  j["schedule"] = sched;
  j["insitu_year"] = d.insitu_year;
  j["sonar"] = {{"points", d.sonar_points},
                {"sigma_m", d.sonar_sigma},
                {"pattern", d.track.kind == TrackPattern::Kind::Cross ? "cross" : "chords"},
                {"chords_per_lake", d.track.chords_per_lake},
                {"min_offset", d.track.min_offset},
                {"max_offset", d.track.max_offset}};
  return j;
}

inline FixtureDescriptor descriptor_from_json(const Json& j) {
  try {
    if (j.at("format").get<std::string>() != "bathymap-fixture-1")
      throw ConfigError("unsupported fixture descriptor format");
    FixtureDescriptor d;
    d.name = j.at("name").get<std::string>();
    d.seed = j.at("seed").get<std::uint64_t>();
    const auto& g = j.at("geometry");
    d.geometry = GridGeometry{g.at("origin_x").get<double>(), g.at("origin_y").get<double>(),
                              g.at("pixel_size").get<double>(), g.at("n_rows").get<std::size_t>(),
                              g.at("n_cols").get<std::size_t>(), g.at("crs_tag").get<std::string>()};
    const auto& o = j.at("optics");
    d.optics.bottom = spectrum_from_json(o.at("bottom"), "optics.bottom");
    d.optics.deep = spectrum_from_json(o.at("deep"), "optics.deep");
    d.optics.attenuation = spectrum_from_json(o.at("attenuation"), "optics.attenuation");
    for (const auto& l : j.at("lakes"))
      d.lakes.push_back({l.at("center_x").get<double>(), l.at("center_y").get<double>(),
                         l.at("radius_m").get<double>(), l.at("max_depth_m").get<double>(),
                         l.at("shape_exponent").get<double>(), l.at("substrate_brightness").get<double>()});
    d.land = spectrum_from_json(j.at("land_reflectance"), "land_reflectance");
    const auto& a = j.at("atmosphere");
    d.gain_mean = a.at("gain_mean").get<double>();
    d.gain_sd = a.at("gain_sd").get<double>();
    d.gain_min = a.at("gain_min").get<double>();
    d.gain_max = a.at("gain_max").get<double>();
    d.band_gain_sd = a.at("band_gain_sd").get<double>();
    d.path_sd = a.at("path_sd").get<double>();
    d.substrate_texture_sd = j.at("substrate_texture_sd").get<double>();
    d.noise_sigma = j.at("noise_sigma").get<double>();
    const auto& c = j.at("clouds");
    d.clear_scene_probability = c.at("clear_scene_probability").get<double>();
    d.cloud_fraction_min = c.at("fraction_min").get<double>();
    d.cloud_fraction_max = c.at("fraction_max").get<double>();
    for (const auto& s : j.at("schedule")) d.schedule.push_back({s.at("year").get<int>(), s.at("count").get<std::size_t>()});
    d.insitu_year = j.at("insitu_year").get<int>();
    const auto& s = j.at("sonar");
    d.sonar_points = s.at("points").get<std::size_t>();
    d.sonar_sigma = s.at("sigma_m").get<double>();
    const auto pattern = s.at("pattern").get<std::string>();
    if (pattern != "cross" && pattern != "chords") throw ConfigError("sonar.pattern must be cross or chords");
    d.track.kind = pattern == "cross" ? TrackPattern::Kind::Cross : TrackPattern::Kind::Chords;
    d.track.chords_per_lake = s.at("chords_per_lake").get<std::size_t>();
    d.track.min_offset = s.at("min_offset").get<double>();
    d.track.max_offset = s.at("max_offset").get<double>();
    d.geometry.validate();
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("fixture descriptor: ") + e.what());
  }
}

inline FixtureDescriptor read_descriptor(const std::filesystem::path& path) {
  const std::string text = io::read_file(path);
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw ConfigError(path.string() + ": not valid JSON");
  return descriptor_from_json(j);
}

inline void write_descriptor(const FixtureDescriptor& d, const std::filesystem::path& path) {
  auto out = io::open_out(path);
  out << descriptor_to_json(d).dump(2) << '\n';
}

inline FixtureDescriptor named_fixture(std::string_view name) {
  if (name == "northslope-desk-v1") return northslope_desk_v1();
  throw ConfigError("unknown fixture '" + std::string(name) + "'");
}

// On-disk layout of a simulated study area.
struct FixtureLayout {
  std::filesystem::path root;

  std::filesystem::path descriptor() const { return root / "fixture.json"; }
  std::filesystem::path scenes_dir() const { return root / "scenes"; }
  std::filesystem::path scene(const std::string& id) const { return scenes_dir() / (id + ".bgrid"); }
  std::filesystem::path qa(const std::string& id) const { return scenes_dir() / (id + "_qa.bgrid"); }
  std::filesystem::path scene_list() const { return root / "scenes.csv"; }
  std::filesystem::path sonar() const { return root / "sonar.csv"; }
  std::filesystem::path water_mask() const { return root / "water_mask.bgrid"; }
  std::filesystem::path truth_depth() const { return root / "truth_depth.bgrid"; }
};

// scenes.csv: scene_id,year,scene_path,qa_path (paths relative to the list file).
inline void write_fixture(const Fixture& f, const std::filesystem::path& root) {
  const FixtureLayout lay{root};
  write_descriptor(f.descriptor, lay.descriptor());
  write_grid(f.field.water_mask, lay.water_mask());
  write_grid(f.field.depth, lay.truth_depth());
  write_sonar_points(f.sonar, lay.sonar());
  auto list = io::open_out(lay.scene_list());
  list << "scene_id,year,scene_path,qa_path\n";
  for (const auto& s : f.scenes) {
    write_grid(s.scene, lay.scene(s.id));
    write_grid(s.qa, lay.qa(s.id));
    list << s.id << ',' << s.year << ",scenes/" << s.id << ".bgrid,scenes/" << s.id << "_qa.bgrid\n";
  }
}

}  // namespace bathymap
