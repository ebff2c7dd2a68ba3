#pragma once

// Brute-force reference CART used to cross-check fit_tree. Written straight
// from the documented growth rules with none of the library's shortcuts:
// recursion instead of an explicit stack, explicit child variances instead of
// the centered-sum gain, fresh vectors at every node.

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <set>
#include <vector>

#include "bathymap/rng.hpp"

namespace bathymap::oracle {

struct Row {
  std::vector<double> x;
  double y;
};

struct Node {
  bool leaf = true;
  double value = 0.0;
  std::size_t feature = 0;
  double threshold = 0.0;
  std::unique_ptr<Node> left, right;

  double predict(const std::vector<double>& x) const {
    if (leaf) return value;
    return x[feature] <= threshold ? left->predict(x) : right->predict(x);
  }
};

struct Options {
  std::size_t mtry = 2;
  std::size_t min_leaf = 1;
  std::optional<std::size_t> max_depth;
};

inline double sse(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double m = 0.0;
  for (double a : v) m += a;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double a : v) s += (a - m) * (a - m);
  return s;
}

inline std::unique_ptr<Node> grow(const std::vector<Row>& rows, const Options& opt, Rng& rng, std::size_t depth) {
  auto node = std::make_unique<Node>();
  std::vector<double> ys;
  for (const auto& r : rows) ys.push_back(r.y);
  double sum = 0.0;
  for (double y : ys) sum += y;
  node->value = sum / static_cast<double>(ys.size());
  const bool constant = std::all_of(ys.begin(), ys.end(), [&](double y) { return y == ys[0]; });
  if ((opt.max_depth && depth >= *opt.max_depth) || rows.size() < 2 * opt.min_leaf || constant) return node;

  const std::size_t nf = rows[0].x.size();
  std::vector<std::size_t> order(nf);
  for (std::size_t i = 0; i < nf; ++i) order[i] = i;
  for (std::size_t i = nf - 1; i >= 1; --i) std::swap(order[i], order[rng.below(i + 1)]);
  std::vector<std::size_t> chosen;
  for (std::size_t f : order) {
    if (chosen.size() == opt.mtry) break;
    std::set<double> distinct;
    for (const auto& r : rows) distinct.insert(r.x[f]);
    if (distinct.size() > 1) chosen.push_back(f);
  }
  std::sort(chosen.begin(), chosen.end());

  const double parent = sse(ys);
  double best = parent;
  bool found = false;
  std::size_t best_f = 0;
  double best_t = 0.0;
  for (std::size_t f : chosen) {
    std::set<double> distinct;
    for (const auto& r : rows) distinct.insert(r.x[f]);
    std::vector<double> vals(distinct.begin(), distinct.end());
    for (std::size_t k = 0; k + 1 < vals.size(); ++k) {
      const double t = vals[k] + (vals[k + 1] - vals[k]) / 2.0;
      std::vector<double> l, r;
      for (const auto& row : rows) (row.x[f] <= t ? l : r).push_back(row.y);
      if (l.size() < opt.min_leaf || r.size() < opt.min_leaf) continue;
      const double s = sse(l) + sse(r);
      // strictly better by more than rounding noise; ties keep the earlier candidate
      if (s < best - 1e-9 * parent) {
        best = s;
        best_f = f;
        best_t = t;
        found = true;
      }
    }
  }
  if (!found) return node;

  std::vector<Row> l, r;
  for (const auto& row : rows) (row.x[best_f] <= best_t ? l : r).push_back(row);
  node->leaf = false;
  node->feature = best_f;
  node->threshold = best_t;
  node->left = grow(l, opt, rng, depth + 1);
  node->right = grow(r, opt, rng, depth + 1);
  return node;
}

}  // namespace bathymap::oracle
