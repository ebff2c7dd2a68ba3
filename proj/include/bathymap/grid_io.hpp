#pragma once

// BGRID1 portable raster format.
//
// A grid is a pair of files: a text header of "key = value" lines and a flat
// payload of little-endian IEEE-754 float32 cells, band-sequential, row-major.
//
//   magic = BGRID1
//   byte_order = little
//   n_rows = 128
//   n_cols = 128
//   n_bands = 6
//   pixel_size = 30
//   origin_x = 500000
//   origin_y = 7800000
//   crs_tag = sim:local
//   band.0.name = blue
//   band.0.nodata = -9999
//   ...
//   payload = scene.bin
//
// The payload name is resolved relative to the header's directory. Reals in
// the header use the shortest round-trip decimal form, so write followed by
// read is bit-exact.

#include <filesystem>
#include <string>

#include "bathymap/io_util.hpp"
#include "bathymap/raster.hpp"

namespace bathymap {

inline constexpr std::string_view kGridMagic = "BGRID1";

inline std::filesystem::path grid_payload_path(const std::filesystem::path& header) {
  auto p = header;
  p.replace_extension(".bin");
  return p;
}

inline std::string encode_grid_payload(const Grid& grid) {
  io::BinaryWriter w;
  for (const Band& b : grid.bands())
    for (float v : b.values) w.put_f32(v);
  return w.data();
}

inline std::string encode_grid_header(const Grid& grid, const std::string& payload_name) {
  const GridGeometry& g = grid.geometry();
  std::string h;
  auto line = [&](std::string_view k, const std::string& v) {
    h.append(k).append(" = ").append(v).append("\n");
  };
  line("magic", std::string(kGridMagic));
  line("byte_order", "little");
  line("n_rows", std::to_string(g.n_rows));
  line("n_cols", std::to_string(g.n_cols));
  line("n_bands", std::to_string(grid.band_count()));
  line("pixel_size", io::format_real(g.pixel_size));
  line("origin_x", io::format_real(g.origin_x));
  line("origin_y", io::format_real(g.origin_y));
  line("crs_tag", g.crs_tag);
  for (std::size_t i = 0; i < grid.band_count(); ++i) {
    const std::string prefix = "band." + std::to_string(i) + ".";
    line(prefix + "name", grid.band(i).name);
    line(prefix + "nodata", io::format_real(grid.band(i).nodata));
  }
  line("payload", payload_name);
  return h;
}

inline void write_grid(const Grid& grid, const std::filesystem::path& header_path) {
  if (header_path.extension() == ".tif" || header_path.extension() == ".tiff")
    throw IoError("GeoTIFF output requires a geospatial codec that is not available in this build");
  if (grid.band_count() == 0) throw DataError("refusing to write a grid with no bands");
  for (const Band& b : grid.bands())
    if (b.name.empty() || b.name.find('\n') != std::string::npos)
      throw DataError("band names must be non-empty single-line strings");
  const auto payload = grid_payload_path(header_path);
  {
    auto out = io::open_out(payload, true);
    const std::string bytes = encode_grid_payload(grid);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing '" + payload.string() + "'");
  }
  auto out = io::open_out(header_path);
  out << encode_grid_header(grid, payload.filename().string());
  if (!out) throw IoError("failed writing '" + header_path.string() + "'");
}

inline Grid read_grid(const std::filesystem::path& header_path) {
  if (header_path.extension() == ".tif" || header_path.extension() == ".tiff")
    throw IoError("GeoTIFF input requires a geospatial codec that is not available in this build");
  const std::string src = header_path.string();
  auto in = io::open_in(header_path);
  const io::KeyValues kv = io::parse_key_values(in, src);

  const std::string& magic = io::require_key(kv, "magic", src);
  if (magic != kGridMagic) {
    if (magic.starts_with("BGRID"))
      throw DataError(src + ": unsupported grid format version '" + magic + "'");
    throw DataError(src + ": not a BGRID header");
  }
  if (io::require_key(kv, "byte_order", src) != "little")
    throw DataError(src + ": only little-endian payloads are supported");

  GridGeometry g;
  g.n_rows = io::require_number<std::size_t>(kv, "n_rows", src);
  g.n_cols = io::require_number<std::size_t>(kv, "n_cols", src);
  g.pixel_size = io::require_number<double>(kv, "pixel_size", src);
  g.origin_x = io::require_number<double>(kv, "origin_x", src);
  g.origin_y = io::require_number<double>(kv, "origin_y", src);
  g.crs_tag = io::require_key(kv, "crs_tag", src);
  g.validate();
  const auto n_bands = io::require_number<std::size_t>(kv, "n_bands", src);
  if (n_bands == 0) throw DataError(src + ": n_bands must be positive");

  const auto payload_path = header_path.parent_path() / io::require_key(kv, "payload", src);
  const std::string payload = io::read_file(payload_path);
  const std::size_t cells = g.cell_count();
  if (payload.size() != cells * n_bands * sizeof(float))
    throw DataError(src + ": payload size " + std::to_string(payload.size()) +
                    " does not match header dimensions (" + std::to_string(n_bands) + " x " +
                    std::to_string(g.n_rows) + " x " + std::to_string(g.n_cols) + ")");

  Grid grid(g);
  io::BinaryReader r(payload, payload_path.string());
  for (std::size_t b = 0; b < n_bands; ++b) {
    const std::string prefix = "band." + std::to_string(b) + ".";
    Band band;
    band.name = io::require_key(kv, prefix + "name", src);
    band.nodata = io::require_number<float>(kv, prefix + "nodata", src);
    band.values.resize(cells);
    for (auto& v : band.values) v = r.get_f32();
    grid.add_band(std::move(band));
  }
  return grid;
}

}  // namespace bathymap
