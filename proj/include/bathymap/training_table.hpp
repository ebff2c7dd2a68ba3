#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bathymap/io_util.hpp"
#include "bathymap/raster.hpp"

namespace bathymap {

enum class Provenance : std::uint8_t { InSitu = 0, Synthetic = 1 };

inline std::string_view provenance_name(Provenance p) {
  return p == Provenance::InSitu ? "in-situ" : "synthetic";
}

inline Provenance parse_provenance(std::string_view s) {
  if (s == "in-situ") return Provenance::InSitu;
  if (s == "synthetic") return Provenance::Synthetic;
  throw DataError("unknown provenance '" + std::string(s) + "'");
}

// Six reflective surface-reflectance bands, in feature order.
inline const std::vector<std::string>& default_feature_bands() {
  static const std::vector<std::string> bands{"blue", "green", "red", "nir", "swir1", "swir2"};
  return bands;
}

// Contiguous feature matrix view used by the regressors.
struct DatasetView {
  std::span<const double> features;  // row-major, size() * n_features
  std::span<const double> labels;
  std::size_t n_features = 0;

  std::size_t size() const { return labels.size(); }
  double feature(std::size_t row, std::size_t f) const { return features[row * n_features + f]; }
  std::span<const double> row(std::size_t r) const {
    return features.subspan(r * n_features, n_features);
  }
};

// Rows of (scene id, pixel, band features, depth label, provenance).
// Features are stored as one row-major matrix; scene ids are interned.
class TrainingTable {
 public:
  TrainingTable() : TrainingTable(default_feature_bands()) {}
  explicit TrainingTable(std::vector<std::string> feature_names)
      : feature_names_(std::move(feature_names)) {
    if (feature_names_.empty()) throw DataError("training table needs at least one feature");
  }

  const std::vector<std::string>& feature_names() const { return feature_names_; }
  std::size_t feature_count() const { return feature_names_.size(); }
  std::size_t size() const { return labels_.size(); }
  bool empty() const { return labels_.empty(); }

  void add_row(std::string_view scene_id, PixelIndex pixel, std::span<const double> features,
               double depth_m, Provenance provenance) {
    if (features.size() != feature_count())
      throw DataError("training row has " + std::to_string(features.size()) +
                      " features, table expects " + std::to_string(feature_count()));
    for (double f : features)
      if (!std::isfinite(f)) throw DataError("training row has a non-finite feature");
    if (!(depth_m >= 0.0) || !std::isfinite(depth_m))
      throw DataError("training row depth must be finite and non-negative");
    scene_index_.push_back(intern(scene_id));
    pixels_.push_back(pixel);
    features_.insert(features_.end(), features.begin(), features.end());
    labels_.push_back(depth_m);
    provenance_.push_back(provenance);
  }

  std::string_view scene_id(std::size_t i) const { return scene_ids_[scene_index_[i]]; }
  PixelIndex pixel(std::size_t i) const { return pixels_[i]; }
  std::span<const double> features(std::size_t i) const {
    return std::span<const double>(features_).subspan(i * feature_count(), feature_count());
  }
  double depth(std::size_t i) const { return labels_[i]; }
  Provenance provenance(std::size_t i) const { return provenance_[i]; }

  const std::vector<double>& labels() const { return labels_; }
  const std::vector<double>& feature_matrix() const { return features_; }

  DatasetView view() const { return {features_, labels_, feature_count()}; }

  void append(const TrainingTable& other) {
    if (other.feature_names_ != feature_names_)
      throw DataError("cannot append tables with different feature bands");
    for (std::size_t i = 0; i < other.size(); ++i)
      add_row(other.scene_id(i), other.pixel(i), other.features(i), other.depth(i),
              other.provenance(i));
  }

  TrainingTable subset(std::span<const std::size_t> rows) const {
    TrainingTable out(feature_names_);
    for (std::size_t i : rows) out.add_row(scene_id(i), pixel(i), features(i), depth(i), provenance(i));
    return out;
  }

  // Canonical (scene_id, row, col) order; ties keep insertion order.
  void sort_canonical() {
    std::vector<std::size_t> order(size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const auto sa = scene_id(a), sb = scene_id(b);
      if (sa != sb) return sa < sb;
      return pixels_[a] < pixels_[b];
    });
    *this = subset(order);
  }

  std::size_t count(Provenance p) const {
    return static_cast<std::size_t>(std::count(provenance_.begin(), provenance_.end(), p));
  }

  bool operator==(const TrainingTable& o) const {
    if (feature_names_ != o.feature_names_ || size() != o.size()) return false;
    for (std::size_t i = 0; i < size(); ++i)
      if (scene_id(i) != o.scene_id(i)) return false;
    return pixels_ == o.pixels_ && features_ == o.features_ && labels_ == o.labels_ &&
           provenance_ == o.provenance_;
  }

 private:
  std::uint32_t intern(std::string_view id) {
    if (auto it = scene_lookup_.find(std::string(id)); it != scene_lookup_.end()) return it->second;
    const auto idx = static_cast<std::uint32_t>(scene_ids_.size());
    scene_ids_.emplace_back(id);
    scene_lookup_.emplace(std::string(id), idx);
    return idx;
  }

  std::vector<std::string> feature_names_;
  std::vector<std::string> scene_ids_;
  std::unordered_map<std::string, std::uint32_t> scene_lookup_;
  std::vector<std::uint32_t> scene_index_;
  std::vector<PixelIndex> pixels_;
  std::vector<double> features_;
  std::vector<double> labels_;
  std::vector<Provenance> provenance_;
};

// CSV: scene_id,row,col,b_<band>...,depth_m,provenance
inline std::string training_csv_header(const std::vector<std::string>& feature_names) {
  std::string h = "scene_id,row,col";
  for (const auto& f : feature_names) h += ",b_" + f;
  h += ",depth_m,provenance";
  return h;
}

inline void write_training_csv(const TrainingTable& t, std::ostream& out) {
  out << training_csv_header(t.feature_names()) << '\n';
  for (std::size_t i = 0; i < t.size(); ++i) {
    out << t.scene_id(i) << ',' << t.pixel(i).row << ',' << t.pixel(i).col;
    for (double f : t.features(i)) out << ',' << io::format_real(f);
    out << ',' << io::format_real(t.depth(i)) << ',' << provenance_name(t.provenance(i)) << '\n';
  }
}

inline TrainingTable read_training_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(source + ": empty training table");
  const auto header = io::split(io::trim(line), ',');
  if (header.size() < 6 || header[0] != "scene_id" || header[1] != "row" || header[2] != "col" ||
      header[header.size() - 2] != "depth_m" || header.back() != "provenance")
    throw DataError(source + ": unexpected training table header");
  std::vector<std::string> names;
  for (std::size_t i = 3; i + 2 < header.size(); ++i) {
    if (!header[i].starts_with("b_")) throw DataError(source + ": feature column without b_ prefix");
    names.emplace_back(header[i].substr(2));
  }
  TrainingTable t(names);
  std::vector<double> features(names.size());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto trimmed = io::trim(line);
    if (trimmed.empty()) continue;
    const auto cells = io::split(trimmed, ',');
    if (cells.size() != header.size())
      throw DataError(source + ":" + std::to_string(line_no) + ": wrong column count");
    const auto row = io::parse_number<std::size_t>(cells[1]);
    const auto col = io::parse_number<std::size_t>(cells[2]);
    const auto depth = io::parse_number<double>(cells[cells.size() - 2]);
    if (!row || !col || !depth)
      throw DataError(source + ":" + std::to_string(line_no) + ": malformed numeric field");
    for (std::size_t f = 0; f < names.size(); ++f) {
      const auto v = io::parse_number<double>(cells[3 + f]);
      if (!v) throw DataError(source + ":" + std::to_string(line_no) + ": malformed feature");
      features[f] = *v;
    }
    t.add_row(cells[0], {*row, *col}, features, *depth, parse_provenance(io::trim(cells.back())));
  }
  return t;
}

// BTABLE1: magic, feature names, scene-id dictionary, then fixed-width records
// {u32 scene, u32 row, u32 col, f64 x n_features, f64 depth, u8 provenance}.
inline constexpr std::string_view kTableMagic{"BTABLE1\0", 8};

inline std::string encode_training_table(const TrainingTable& t) {
  io::BinaryWriter w;
  w.bytes(kTableMagic);
  w.put(static_cast<std::uint32_t>(t.feature_count()));
  for (const auto& n : t.feature_names()) w.put_string(n);

  std::vector<std::string> ids;
  std::unordered_map<std::string, std::uint32_t> lookup;
  std::vector<std::uint32_t> row_scene(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::string id(t.scene_id(i));
    auto [it, inserted] = lookup.emplace(id, static_cast<std::uint32_t>(ids.size()));
    if (inserted) ids.push_back(id);
    row_scene[i] = it->second;
  }
  w.put(static_cast<std::uint32_t>(ids.size()));
  for (const auto& id : ids) w.put_string(id);
  w.put(static_cast<std::uint64_t>(t.size()));
  for (std::size_t i = 0; i < t.size(); ++i) {
    w.put(row_scene[i]);
    w.put(static_cast<std::uint32_t>(t.pixel(i).row));
    w.put(static_cast<std::uint32_t>(t.pixel(i).col));
    for (double f : t.features(i)) w.put_f64(f);
    w.put_f64(t.depth(i));
    w.put(static_cast<std::uint8_t>(t.provenance(i)));
  }
  return w.data();
}

inline TrainingTable decode_training_table(std::string_view bytes, const std::string& source) {
  io::BinaryReader r(bytes, source);
  if (r.bytes(kTableMagic.size()) != kTableMagic) throw DataError(source + ": not a BTABLE1 file");
  const auto nf = r.get<std::uint32_t>();
  std::vector<std::string> names(nf);
  for (auto& n : names) n = r.get_string();
  const auto n_ids = r.get<std::uint32_t>();
  std::vector<std::string> ids(n_ids);
  for (auto& id : ids) id = r.get_string();
  const auto n_rows = r.get<std::uint64_t>();
  const std::size_t record = 12 + 8 * (static_cast<std::size_t>(nf) + 1) + 1;
  if (r.remaining() != n_rows * record) throw DataError(source + ": record block size mismatch");
  TrainingTable t(names);
  std::vector<double> features(nf);
  for (std::uint64_t i = 0; i < n_rows; ++i) {
    const auto scene = r.get<std::uint32_t>();
    const auto row = r.get<std::uint32_t>();
    const auto col = r.get<std::uint32_t>();
    for (auto& f : features) f = r.get_f64();
    const double depth = r.get_f64();
    const auto prov = r.get<std::uint8_t>();
    if (scene >= ids.size() || prov > 1) throw DataError(source + ": corrupt record");
    t.add_row(ids[scene], {row, col}, features, depth, static_cast<Provenance>(prov));
  }
  return t;
}

// Dispatches on extension: .btable is binary, anything else CSV.
inline void write_training_table(const TrainingTable& t, const std::filesystem::path& p) {
  if (p.extension() == ".btable") {
    auto out = io::open_out(p, true);
    const auto bytes = encode_training_table(t);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  } else {
    auto out = io::open_out(p);
    write_training_csv(t, out);
  }
}

inline TrainingTable read_training_table(const std::filesystem::path& p) {
  if (p.extension() == ".btable") return decode_training_table(io::read_file(p), p.string());
  auto in = io::open_in(p);
  return read_training_csv(in, p.string());
}

}  // namespace bathymap
