#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "bathymap/error.hpp"

namespace bathymap {

// 1 / Phi^-1(0.75): scales the MAD to the standard deviation of a normal.
inline constexpr double kNmadScale = 1.4826;

// Median of values already sorted ascending; even counts average the two
// central order statistics.
inline double median_sorted(std::span<const double> sorted) {
  const std::size_t n = sorted.size();
  if (n == 0) throw DataError("median of an empty list");
  const std::size_t mid = n / 2;
  return n % 2 == 1 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
}

inline double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return median_sorted(values);
}

// Normalized median absolute deviation, 1.4826 * median(|v - median(v)|).
inline double nmad(std::span<const double> values) {
  if (values.empty()) throw DataError("nmad of an empty list");
  for (double v : values)
    if (!std::isfinite(v)) throw NumericError("nmad of a non-finite value");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double med = median_sorted(v);
  for (double& x : v) x = std::fabs(x - med);
  std::sort(v.begin(), v.end());
  return kNmadScale * median_sorted(v);
}

inline double mean(std::span<const double> values) {
  if (values.empty()) throw DataError("mean of an empty list");
  double s = 0.0;
  for (double v : values) s += v;
  return s / static_cast<double>(values.size());
}

// Population standard deviation (divides by n), two-pass.
inline double population_std(std::span<const double> values) {
  const double m = mean(values);
  double acc = 0.0;
  for (double v : values) acc += (v - m) * (v - m);
  return std::sqrt(acc / static_cast<double>(values.size()));
}

// Coefficient of determination 1 - SS_res/SS_tot about the truth mean;
// nullopt when the truth has zero variance.
inline std::optional<double> r2(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || truth.empty())
    throw DataError("r2 needs equal, non-empty prediction and truth lists");
  const double m = mean(truth);
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ss_tot += (truth[i] - m) * (truth[i] - m);
    ss_res += (truth[i] - pred[i]) * (truth[i] - pred[i]);
  }
  if (!(ss_tot > 0.0)) return std::nullopt;
  return 1.0 - ss_res / ss_tot;
}

inline double mae(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size() || truth.empty())
    throw DataError("mae needs equal, non-empty prediction and truth lists");
  double s = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) s += std::fabs(pred[i] - truth[i]);
  return s / static_cast<double>(truth.size());
}

}  // namespace bathymap
