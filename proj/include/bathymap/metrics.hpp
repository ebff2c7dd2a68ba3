#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bathymap/compositor.hpp"
#include "bathymap/ingest.hpp"
#include "bathymap/io_util.hpp"
#include "bathymap/raster.hpp"
#include "bathymap/stats.hpp"

namespace bathymap {

// "Correct" means |pred - truth| <= max(absolute_m, relative * truth).
struct ToleranceRule {
  double absolute_m = 0.5;
  double relative = 0.2;

  bool correct(double pred, double truth) const {
    return std::fabs(pred - truth) <= std::max(absolute_m, relative * truth);
  }
};

struct DepthBin {
  double lo = 0.0;  // inclusive
  double hi = 0.0;  // exclusive
  bool contains(double d) const { return d >= lo && d < hi; }
};

struct BinAccuracy {
  DepthBin bin;
  std::size_t n = 0;
  std::size_t n_correct = 0;
  std::optional<double> fraction;  // nullopt for empty bins
};

inline std::vector<DepthBin> default_depth_bins() {
  return {{0.0, 1.0}, {1.0, 2.0}, {2.0, 4.0}, {4.0, 8.0}, {8.0, 30.0}};
}

inline void validate_bins(std::span<const DepthBin> bins) {
  std::vector<DepthBin> sorted(bins.begin(), bins.end());
  std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) { return a.lo < b.lo; });
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (!(sorted[i].hi > sorted[i].lo)) throw ConfigError("depth bin with empty range");
    if (i > 0 && sorted[i].lo < sorted[i - 1].hi) throw ConfigError("overlapping depth bins");
  }
}

inline std::vector<BinAccuracy> accuracy_by_depth_bin(std::span<const double> pred,
                                                      std::span<const double> truth,
                                                      std::span<const DepthBin> bins,
                                                      const ToleranceRule& rule = {}) {
  if (pred.size() != truth.size()) throw DataError("prediction/truth length mismatch");
  validate_bins(bins);
  std::vector<BinAccuracy> out;
  for (const auto& b : bins) out.push_back({b, 0, 0, std::nullopt});
  for (std::size_t i = 0; i < truth.size(); ++i) {
    for (auto& b : out) {
      if (!b.bin.contains(truth[i])) continue;
      ++b.n;
      if (rule.correct(pred[i], truth[i])) ++b.n_correct;
      break;
    }
  }
  for (auto& b : out)
    if (b.n > 0) b.fraction = static_cast<double>(b.n_correct) / static_cast<double>(b.n);
  return out;
}

struct HistogramBin {
  double lo, hi;  // [lo, hi)
  std::size_t count = 0;
  double fraction = 0.0;
};

struct AgreementWindow {
  double tolerance;  // |diff| <= tolerance
  std::size_t count = 0;
  double fraction = 0.0;
};

struct DifferenceResult {
  Grid difference;  // band "diff_m", a - b where both valid
  std::size_t n_valid = 0;
  std::vector<AgreementWindow> within;
  std::vector<HistogramBin> histogram;
  std::size_t below_range = 0;
  std::size_t above_range = 0;
  double below_fraction = 0.0;
  double above_fraction = 0.0;
};

struct DifferenceOptions {
  std::vector<double> tolerances{0.1, 2.0};
  std::vector<double> edges{-10, -5, -2, -1, -0.5, -0.1, 0.1, 0.5, 1, 2, 5, 10};
};

inline DifferenceResult difference_grid(const Grid& a, const Grid& b, const DifferenceOptions& opts = {}) {
  const GridGeometry& g = a.geometry();
  require_same_geometry(g, b.geometry(), "difference inputs");
  if (opts.edges.size() < 2 || !std::is_sorted(opts.edges.begin(), opts.edges.end()))
    throw ConfigError("histogram edges must be ascending with at least two entries");
  const Band& ba = a.band(0);
  const Band& bb = b.band(0);
  DifferenceResult res{Grid(g), 0, {}, {}, 0, 0, 0.0, 0.0};
  Band& diff = res.difference.add_band("diff_m");
  for (double t : opts.tolerances) res.within.push_back({t, 0, 0.0});
  for (std::size_t i = 0; i + 1 < opts.edges.size(); ++i)
    res.histogram.push_back({opts.edges[i], opts.edges[i + 1], 0, 0.0});

  for (std::size_t cell = 0; cell < g.cell_count(); ++cell) {
    if (!ba.valid(cell) || !bb.valid(cell)) continue;
    const double d = static_cast<double>(ba.values[cell]) - static_cast<double>(bb.values[cell]);
    diff.values[cell] = static_cast<float>(d);
    ++res.n_valid;
    for (auto& w : res.within)
      if (std::fabs(d) <= w.tolerance) ++w.count;
    if (d < opts.edges.front()) {
      ++res.below_range;
    } else if (d >= opts.edges.back()) {
      ++res.above_range;
    } else {
      const auto it = std::upper_bound(opts.edges.begin(), opts.edges.end(), d);
      ++res.histogram[static_cast<std::size_t>(it - opts.edges.begin()) - 1].count;
    }
  }
  if (res.n_valid > 0) {
    const double n = static_cast<double>(res.n_valid);
    for (auto& w : res.within) w.fraction = static_cast<double>(w.count) / n;
    for (auto& h : res.histogram) h.fraction = static_cast<double>(h.count) / n;
    res.below_fraction = static_cast<double>(res.below_range) / n;
    res.above_fraction = static_cast<double>(res.above_range) / n;
  }
  return res;
}

inline void write_histogram_csv(const DifferenceResult& d, const std::filesystem::path& path) {
  auto out = io::open_out(path);
  out << "lo_m,hi_m,count,fraction\n";
  out << "-inf," << io::format_real(d.histogram.front().lo) << ',' << d.below_range << ','
      << io::format_real(d.below_fraction) << '\n';
  for (const auto& h : d.histogram)
    out << io::format_real(h.lo) << ',' << io::format_real(h.hi) << ',' << h.count << ','
        << io::format_real(h.fraction) << '\n';
  out << io::format_real(d.histogram.back().hi) << ",inf," << d.above_range << ','
      << io::format_real(d.above_fraction) << '\n';
}

struct NmadStrata {
  double below_half_m = 0.0;   // nmad < 0.5
  double half_to_two_m = 0.0;  // 0.5 <= nmad <= 2
  double above_two_m = 0.0;    // nmad > 2
};

struct ValidationReport {
  std::size_t n = 0;
  std::size_t n_excluded_nodata = 0;
  std::optional<double> r2;
  double mae = 0.0;
  std::vector<BinAccuracy> bins;
  NmadStrata nmad_strata;
  ToleranceRule rule;
  std::size_t min_count = 0;
  std::size_t max_count = 0;
  double max_nmad = 0.0;
};

// Pairs the composite median with each in-situ pixel mean on pixel identity.
inline ValidationReport validate_map(const CompositeStack& composite, const DepthPixelSet& depth_pixels,
                                     const ToleranceRule& rule = {},
                                     std::span<const DepthBin> bins = {}) {
  const GridGeometry& g = composite.geometry();
  const Band& med = composite.median();
  const Band& nm = composite.nmad();
  const Band& cnt = composite.count();
  ValidationReport rep;
  rep.rule = rule;
  std::vector<double> pred, truth, nmads;
  for (const auto& p : depth_pixels.pixels) {
    if (p.pixel.row >= g.n_rows || p.pixel.col >= g.n_cols)
      throw DataError("validation pixel outside composite extent");
    const std::size_t cell = g.index(p.pixel);
    if (!med.valid(cell)) {
      ++rep.n_excluded_nodata;
      continue;
    }
    pred.push_back(med.values[cell]);
    truth.push_back(p.mean_depth);
    nmads.push_back(nm.values[cell]);
    const auto c = static_cast<std::size_t>(cnt.values[cell]);
    rep.min_count = rep.n == 0 ? c : std::min(rep.min_count, c);
    rep.max_count = std::max(rep.max_count, c);
    ++rep.n;
  }
  if (rep.n == 0) throw DataError("no validation pixel overlaps a valid composite pixel");
  rep.r2 = r2(pred, truth);
  rep.mae = mae(pred, truth);
  const auto default_bins = default_depth_bins();
  rep.bins = accuracy_by_depth_bin(pred, truth, bins.empty() ? std::span<const DepthBin>(default_bins) : bins, rule);
  std::size_t low = 0, mid = 0, high = 0;
  for (double v : nmads) {
    rep.max_nmad = std::max(rep.max_nmad, v);
    if (v < 0.5) ++low;
    else if (v <= 2.0) ++mid;
    else ++high;
  }
  const double n = static_cast<double>(rep.n);
  rep.nmad_strata = {static_cast<double>(low) / n, static_cast<double>(mid) / n,
                     static_cast<double>(high) / n};
  return rep;
}

inline std::string format_optional(const std::optional<double>& v) {
  return v ? io::format_real(*v) : std::string("undefined");
}

inline void write_validation_report(const ValidationReport& r, const std::filesystem::path& kv_path,
                                    const std::filesystem::path& text_path) {
  {
    auto out = io::open_out(kv_path);
    out << "format = BVALID1\n"
        << "n = " << r.n << "\n"
        << "n_excluded_nodata = " << r.n_excluded_nodata << "\n"
        << "r2 = " << format_optional(r.r2) << "\n"
        << "mae_m = " << io::format_real(r.mae) << "\n"
        << "tolerance_abs_m = " << io::format_real(r.rule.absolute_m) << "\n"
        << "tolerance_rel = " << io::format_real(r.rule.relative) << "\n"
        << "obs_count_min = " << r.min_count << "\n"
        << "obs_count_max = " << r.max_count << "\n"
        << "nmad_max_m = " << io::format_real(r.max_nmad) << "\n"
        << "nmad_below_0.5_m = " << io::format_real(r.nmad_strata.below_half_m) << "\n"
        << "nmad_0.5_to_2_m = " << io::format_real(r.nmad_strata.half_to_two_m) << "\n"
        << "nmad_above_2_m = " << io::format_real(r.nmad_strata.above_two_m) << "\n"
        << "bin_count = " << r.bins.size() << "\n";
    for (std::size_t i = 0; i < r.bins.size(); ++i) {
      const auto& b = r.bins[i];
      const std::string p = "bin." + std::to_string(i) + ".";
      out << p << "lo_m = " << io::format_real(b.bin.lo) << "\n"
          << p << "hi_m = " << io::format_real(b.bin.hi) << "\n"
          << p << "n = " << b.n << "\n"
          << p << "accuracy = " << format_optional(b.fraction) << "\n";
    }
  }
  auto out = io::open_out(text_path);
  char buf[256];
  out << "Validation against in-situ depth pixels\n";
  out << "  pixels compared      " << r.n << " (" << r.n_excluded_nodata << " without a composite value)\n";
  out << "  r^2                  " << format_optional(r.r2) << "\n";
  std::snprintf(buf, sizeof(buf), "  MAE                  %.3f m\n", r.mae);
  out << buf;
  std::snprintf(buf, sizeof(buf), "  correct if |error| <= max(%.2f m, %.0f%% of depth)\n",
                r.rule.absolute_m, 100.0 * r.rule.relative);
  out << buf;
  for (const auto& b : r.bins) {
    if (b.fraction)
      std::snprintf(buf, sizeof(buf), "    %5.1f - %5.1f m  n=%-6zu accuracy %.1f%%\n", b.bin.lo,
                    b.bin.hi, b.n, 100.0 * *b.fraction);
    else
      std::snprintf(buf, sizeof(buf), "    %5.1f - %5.1f m  n=%-6zu accuracy n/a\n", b.bin.lo,
                    b.bin.hi, b.n);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf),
                "  NMAD strata          <0.5 m %.1f%%, 0.5-2 m %.1f%%, >2 m %.1f%% (max %.2f m)\n",
                100.0 * r.nmad_strata.below_half_m, 100.0 * r.nmad_strata.half_to_two_m,
                100.0 * r.nmad_strata.above_two_m, r.max_nmad);
  out << buf;
  std::snprintf(buf, sizeof(buf), "  observations/pixel   %zu - %zu\n", r.min_count, r.max_count);
  out << buf;
}

}  // namespace bathymap
