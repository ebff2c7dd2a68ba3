#pragma once

// Bagged regression trees (CART with variance reduction).
//
// Reproducibility contract, so another implementation can rebuild identical
// trees from the same generator definition (see rng.hpp):
//  * Tree t uses Rng::stream(params.seed, t).
//  * With bootstrap enabled, the first n draws of that stream are below(n)
//    and form the tree's sample list (with replacement, in draw order).
//  * Nodes are built depth first, left child before right child. A node is
//    a leaf when it hits max_depth, has fewer than 2*min_samples_leaf
//    samples, or has constant labels; no random numbers are drawn for it.
//  * Otherwise the feature list 0..F-1 is Fisher-Yates shuffled
//    (for i = F-1 down to 1: swap(i, below(i + 1))) and walked in shuffled
//    order, skipping features that are constant within the node, until
//    max_features non-constant features are collected.
//  * best_split() over the collected features, visited in ascending index
//    order: thresholds are midpoints between consecutive distinct values,
//    the score is the weighted child variance, and ties go to the lower
//    feature index, then the lower threshold. Samples with x <= threshold go left.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bathymap/ingest.hpp"
#include "bathymap/io_util.hpp"
#include "bathymap/parallel.hpp"
#include "bathymap/raster.hpp"
#include "bathymap/rng.hpp"
#include "bathymap/stats.hpp"
#include "bathymap/training_table.hpp"

namespace bathymap {

struct MaxFeatures {
  enum class Rule : std::uint8_t { Sqrt = 0, All = 1, Explicit = 2 };

  Rule rule = Rule::Sqrt;
  std::size_t count = 0;

  static MaxFeatures sqrt() { return {Rule::Sqrt, 0}; }
  static MaxFeatures all() { return {Rule::All, 0}; }
  static MaxFeatures exactly(std::size_t n) { return {Rule::Explicit, n}; }

  std::size_t resolve(std::size_t n_features) const {
    switch (rule) {
      case Rule::Sqrt:
        return std::max<std::size_t>(
            1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n_features)))));
      case Rule::All: return n_features;
      case Rule::Explicit:
        if (count < 1 || count > n_features)
          throw ConfigError("max_features must lie in [1, " + std::to_string(n_features) + "]");
        return count;
    }
    return n_features;
  }

  bool operator==(const MaxFeatures&) const = default;
};

struct ForestParams {
  std::size_t n_trees = 100;
  MaxFeatures max_features = MaxFeatures::sqrt();
  std::size_t min_samples_leaf = 1;
  std::optional<std::size_t> max_depth;
  bool bootstrap = true;
  std::uint64_t seed = 0;

  void validate(std::size_t n_features) const {
    if (n_trees < 1) throw ConfigError("n_trees must be at least 1");
    if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be at least 1");
    max_features.resolve(n_features);
  }

  bool operator==(const ForestParams&) const = default;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  double value = 0.0;  // mean label of the node's training samples
  std::uint32_t n_samples = 0;

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

class RegressionTree {
 public:
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const {
    std::uint32_t i = 0;
    while (!nodes[i].is_leaf()) {
      const TreeNode& n = nodes[i];
      i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[i].value;
  }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
  }

  std::size_t depth() const {
    if (nodes.empty()) return 0;
    std::vector<std::size_t> d(nodes.size(), 0);
    std::size_t best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      best = std::max(best, d[i]);
      if (!nodes[i].is_leaf()) {
        d[nodes[i].left] = d[i] + 1;
        d[nodes[i].right] = d[i] + 1;
      }
    }
    return best;
  }

  bool operator==(const RegressionTree&) const = default;
};

struct SplitResult {
  std::size_t feature = 0;
  double threshold = 0.0;
  double weighted_child_variance = 0.0;
  double parent_variance = 0.0;
};

namespace detail {

// Reusable scratch space for split search.
struct SplitWorkspace {
  std::vector<std::pair<double, double>> pairs;  // (feature value, centered label)
};

inline double split_threshold(double lo, double hi) {
  double t = lo + (hi - lo) / 2.0;
  if (!(t < hi)) t = lo;  // adjacent doubles
  return t;
}

inline std::optional<SplitResult> best_split_impl(const DatasetView& data,
                                                  std::span<const std::uint32_t> rows,
                                                  std::span<const std::size_t> features,
                                                  std::size_t min_samples_leaf,
                                                  SplitWorkspace& ws) {
  const std::size_t n = rows.size();
  if (n < 2 || n < 2 * min_samples_leaf || features.empty()) return std::nullopt;

  double mean = 0.0;
  for (auto r : rows) mean += data.labels[r];
  mean /= static_cast<double>(n);
  double parent_sse = 0.0;
  for (auto r : rows) parent_sse += (data.labels[r] - mean) * (data.labels[r] - mean);
  if (!(parent_sse > 0.0)) return std::nullopt;

  std::vector<std::size_t> order(features.begin(), features.end());
  std::sort(order.begin(), order.end());

  // Gain of a split = SSE reduction = sL^2 * n / (nL * nR) with labels centered
  // on the node mean, where sL is the left sum. Gains closer than `tie` are
  // equal: the same partition reached through different features sums in a
  // different order, and rounding must not decide the tie-break.
  const double tie = 1e-9 * parent_sse;
  double best_gain = tie;
  std::optional<SplitResult> best;
  const double dn = static_cast<double>(n);
  for (std::size_t f : order) {
    ws.pairs.resize(n);
    for (std::size_t i = 0; i < n; ++i)
      ws.pairs[i] = {data.feature(rows[i], f), data.labels[rows[i]] - mean};
    std::sort(ws.pairs.begin(), ws.pairs.end());
    double s_left = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      s_left += ws.pairs[i].second;
      if (ws.pairs[i].first == ws.pairs[i + 1].first) continue;
      const std::size_t n_left = i + 1, n_right = n - n_left;
      if (n_left < min_samples_leaf || n_right < min_samples_leaf) continue;
      const double gain =
          s_left * s_left * dn / (static_cast<double>(n_left) * static_cast<double>(n_right));
      if (gain > best_gain + (best ? tie : 0.0)) {
        best_gain = gain;
        best = SplitResult{f, split_threshold(ws.pairs[i].first, ws.pairs[i + 1].first), 0.0, 0.0};
      }
    }
  }
  if (!best) return std::nullopt;
  best->parent_variance = parent_sse / dn;
  best->weighted_child_variance = std::max(0.0, parent_sse - best_gain) / dn;
  return best;
}

}  // namespace detail

// Best variance-reducing split of `rows` over `feature_subset`, or nullopt
// when no candidate reduces variance (or every candidate violates min_samples_leaf).
inline std::optional<SplitResult> best_split(const DatasetView& data,
                                             std::span<const std::uint32_t> rows,
                                             std::span<const std::size_t> feature_subset,
                                             std::size_t min_samples_leaf = 1) {
  detail::SplitWorkspace ws;
  return detail::best_split_impl(data, rows, feature_subset, min_samples_leaf, ws);
}

// Grows one tree on `sample_rows` (duplicates allowed), drawing feature
// subsets from `rng` as described at the top of this header.
inline RegressionTree fit_tree(const DatasetView& data, std::vector<std::uint32_t> sample_rows,
                               const ForestParams& params, Rng& rng) {
  if (sample_rows.empty()) throw DataError("cannot fit a tree on zero rows");
  const std::size_t n_features = data.n_features;
  const std::size_t mtry = params.max_features.resolve(n_features);

  RegressionTree tree;
  detail::SplitWorkspace ws;
  std::vector<std::size_t> shuffled(n_features);
  std::vector<std::size_t> chosen;
  chosen.reserve(n_features);

  struct Pending {
    std::uint32_t parent;
    bool is_left;
    std::size_t begin, end, depth;
  };
  constexpr std::uint32_t kRoot = std::numeric_limits<std::uint32_t>::max();
  std::vector<Pending> stack{{kRoot, true, 0, sample_rows.size(), 0}};

  while (!stack.empty()) {
    const Pending p = stack.back();
    stack.pop_back();
    const auto id = static_cast<std::uint32_t>(tree.nodes.size());
    if (p.parent != kRoot) {
      if (p.is_left) tree.nodes[p.parent].left = id;
      else tree.nodes[p.parent].right = id;
    }
    const std::span<std::uint32_t> rows(sample_rows.data() + p.begin, p.end - p.begin);

    TreeNode node;
    double sum = 0.0;
    bool constant = true;
    const double first = data.labels[rows[0]];
    for (auto r : rows) {
      sum += data.labels[r];
      constant = constant && data.labels[r] == first;
    }
    node.value = sum / static_cast<double>(rows.size());
    node.n_samples = static_cast<std::uint32_t>(rows.size());
    tree.nodes.push_back(node);

    const bool depth_capped = params.max_depth && p.depth >= *params.max_depth;
    if (depth_capped || rows.size() < 2 * params.min_samples_leaf || constant) continue;

    std::iota(shuffled.begin(), shuffled.end(), std::size_t{0});
    for (std::size_t i = n_features - 1; i >= 1; --i)
      std::swap(shuffled[i], shuffled[static_cast<std::size_t>(rng.below(i + 1))]);
    chosen.clear();
    for (std::size_t f : shuffled) {
      if (chosen.size() == mtry) break;
      double lo = data.feature(rows[0], f), hi = lo;
      for (auto r : rows) {
        const double v = data.feature(r, f);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      if (lo != hi) chosen.push_back(f);
    }
    if (chosen.empty()) continue;

    const auto split = detail::best_split_impl(data, rows, chosen, params.min_samples_leaf, ws);
    if (!split) continue;

    const auto mid = std::partition(rows.begin(), rows.end(), [&](std::uint32_t r) {
      return data.feature(r, split->feature) <= split->threshold;
    });
    const std::size_t n_left = static_cast<std::size_t>(mid - rows.begin());
    tree.nodes[id].feature = static_cast<std::int32_t>(split->feature);
    tree.nodes[id].threshold = split->threshold;
    stack.push_back({id, false, p.begin + n_left, p.end, p.depth + 1});
    stack.push_back({id, true, p.begin, p.begin + n_left, p.depth + 1});
  }
  return tree;
}

struct ForestModel {
  ForestParams params;
  std::vector<std::string> feature_names;
  std::vector<RegressionTree> trees;
  std::vector<std::vector<std::uint32_t>> bootstrap_indices;  // empty without bootstrap
  std::size_t n_train_rows = 0;
  std::optional<double> oob_r2;

  double predict_unchecked(std::span<const double> x) const {
    double s = 0.0;
    for (const auto& t : trees) s += t.predict(x);
    return s / static_cast<double>(trees.size());
  }

  bool operator==(const ForestModel&) const = default;
};

inline double predict_forest(const ForestModel& model, std::span<const double> features) {
  if (features.size() != model.feature_names.size())
    throw DataError("feature arity " + std::to_string(features.size()) + " does not match model (" +
                    std::to_string(model.feature_names.size()) + ")");
  for (double f : features)
    if (!std::isfinite(f)) throw NumericError("non-finite feature passed to forest prediction");
  return model.predict_unchecked(features);
}

struct OobResult {
  std::optional<double> r2;
  std::size_t rows_scored = 0;
  std::size_t rows_without_oob = 0;
  double mean_oob_tree_fraction = 0.0;  // averaged over all rows
  std::vector<double> predictions;      // NaN where no tree left the row out
};

inline OobResult oob_score(const ForestModel& model, const DatasetView& data, unsigned workers = 1) {
  if (!model.params.bootstrap || model.bootstrap_indices.size() != model.trees.size())
    throw DataError("out-of-bag scoring needs a bootstrapped model with retained sample lists");
  if (data.size() != model.n_train_rows)
    throw DataError("out-of-bag scoring needs the table the model was trained on");
  const std::size_t n = data.size();
  const std::size_t n_trees = model.trees.size();
  std::vector<std::vector<std::uint8_t>> in_bag(n_trees, std::vector<std::uint8_t>(n, 0));
  for (std::size_t t = 0; t < n_trees; ++t)
    for (auto r : model.bootstrap_indices[t]) in_bag[t][r] = 1;

  OobResult res;
  res.predictions.assign(n, std::numeric_limits<double>::quiet_NaN());
  std::vector<std::size_t> oob_trees(n, 0);
  parallel_for(n, workers, [&](std::size_t i) {
    double s = 0.0;
    std::size_t k = 0;
    for (std::size_t t = 0; t < n_trees; ++t) {
      if (in_bag[t][i]) continue;
      s += model.trees[t].predict(data.row(i));
      ++k;
    }
    oob_trees[i] = k;
    if (k > 0) res.predictions[i] = s / static_cast<double>(k);
  });

  std::vector<double> pred, truth;
  double frac = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    frac += static_cast<double>(oob_trees[i]) / static_cast<double>(n_trees);
    if (oob_trees[i] == 0) {
      ++res.rows_without_oob;
      continue;
    }
    pred.push_back(res.predictions[i]);
    truth.push_back(data.labels[i]);
  }
  res.mean_oob_tree_fraction = frac / static_cast<double>(n);
  res.rows_scored = pred.size();
  if (!pred.empty()) res.r2 = r2(pred, truth);
  return res;
}

inline ForestModel fit_forest(const DatasetView& data, std::vector<std::string> feature_names,
                              const ForestParams& params, unsigned workers = 0) {
  if (data.size() == 0) throw DataError("cannot fit a forest on an empty table");
  if (feature_names.size() != data.n_features)
    throw DataError("feature name count does not match the feature matrix");
  if (data.size() > std::numeric_limits<std::uint32_t>::max())
    throw DataError("training table too large");
  params.validate(data.n_features);

  ForestModel model;
  model.params = params;
  model.feature_names = std::move(feature_names);
  model.n_train_rows = data.size();
  model.trees.resize(params.n_trees);
  if (params.bootstrap) model.bootstrap_indices.resize(params.n_trees);

  const auto n = static_cast<std::uint32_t>(data.size());
  parallel_for(params.n_trees, workers, [&](std::size_t t) {
    Rng rng = Rng::stream(params.seed, t);
    std::vector<std::uint32_t> rows(n);
    if (params.bootstrap) {
      for (auto& r : rows) r = static_cast<std::uint32_t>(rng.below(n));
      model.bootstrap_indices[t] = rows;
    } else {
      std::iota(rows.begin(), rows.end(), 0u);
    }
    model.trees[t] = fit_tree(data, std::move(rows), params, rng);
  });

  if (params.bootstrap) model.oob_r2 = oob_score(model, data, workers).r2;
  return model;
}

inline ForestModel fit_forest(const TrainingTable& table, const ForestParams& params,
                              unsigned workers = 0) {
  return fit_forest(table.view(), table.feature_names(), params, workers);
}

struct GridPredictOptions {
  std::size_t tile_size = 64;
  unsigned workers = 0;
};

// Depth at every water pixel that is QA-clear with all model bands valid;
// nodata elsewhere. Tiles only partition the work.
inline Grid predict_grid(const ForestModel& model, const Grid& scene, const Grid& water_mask,
                         const Grid& qa, const QaPolicy& policy, const GridPredictOptions& opts = {}) {
  const GridGeometry& g = scene.geometry();
  require_same_geometry(g, water_mask.geometry(), "scene vs water mask");
  require_same_geometry(g, qa.geometry(), "scene vs QA");
  if (opts.tile_size == 0) throw ConfigError("tile size must be positive");
  const auto band_idx = resolve_bands(scene, model.feature_names);
  const Band& water = water_mask.band(0);
  const Band& qa_band = qa.band(0);

  Grid out(g);
  Band& depth = out.add_band("depth_m");
  const std::size_t tiles_r = (g.n_rows + opts.tile_size - 1) / opts.tile_size;
  const std::size_t tiles_c = (g.n_cols + opts.tile_size - 1) / opts.tile_size;
  parallel_for(tiles_r * tiles_c, opts.workers, [&](std::size_t tile) {
    const std::size_t r0 = (tile / tiles_c) * opts.tile_size;
    const std::size_t c0 = (tile % tiles_c) * opts.tile_size;
    std::vector<double> x(band_idx.size());
    for (std::size_t r = r0; r < std::min(g.n_rows, r0 + opts.tile_size); ++r) {
      for (std::size_t c = c0; c < std::min(g.n_cols, c0 + opts.tile_size); ++c) {
        const std::size_t cell = g.index(r, c);
        if (!water.valid(cell) || water.values[cell] == 0.0f) continue;
        if (!policy.accepts(qa_band, cell)) continue;
        if (!read_features(scene, band_idx, cell, x)) continue;
        depth.values[cell] = static_cast<float>(model.predict_unchecked(x));
      }
    }
  });
  return out;
}

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Seeded partition of 0..n-1; |test| = round(n * fraction) kept within [1, n-1].
inline SplitIndices split_indices(std::size_t n, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ConfigError("test fraction must lie strictly between 0 and 1");
  if (n < 2) throw DataError("need at least 2 rows to split");
  auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
  n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng = Rng::stream(seed, 0x73706c6974ULL);
  for (std::size_t i = n - 1; i >= 1; --i)
    std::swap(perm[i], perm[static_cast<std::size_t>(rng.below(i + 1))]);
  SplitIndices s;
  s.test.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_test), perm.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

inline std::pair<TrainingTable, TrainingTable> split_train_test(const TrainingTable& table,
                                                                double test_fraction,
                                                                std::uint64_t seed) {
  const auto s = split_indices(table.size(), test_fraction, seed);
  return {table.subset(s.train), table.subset(s.test)};
}

// BFOREST1 container, little-endian.
inline constexpr std::string_view kForestMagic = "BFOREST1";
inline constexpr std::uint32_t kForestVersion = 1;

inline std::string encode_forest(const ForestModel& m) {
  io::BinaryWriter w;
  w.bytes(kForestMagic);
  w.put(kForestVersion);
  const ForestParams& p = m.params;
  w.put(static_cast<std::uint64_t>(p.n_trees));
  w.put(static_cast<std::uint8_t>(p.max_features.rule));
  w.put(static_cast<std::uint64_t>(p.max_features.count));
  w.put(static_cast<std::uint64_t>(p.min_samples_leaf));
  w.put(static_cast<std::uint8_t>(p.max_depth.has_value()));
  w.put(static_cast<std::uint64_t>(p.max_depth.value_or(0)));
  w.put(static_cast<std::uint8_t>(p.bootstrap));
  w.put(p.seed);
  w.put(static_cast<std::uint64_t>(m.n_train_rows));
  w.put(static_cast<std::uint32_t>(m.feature_names.size()));
  for (const auto& f : m.feature_names) w.put_string(f);
  w.put(static_cast<std::uint8_t>(m.oob_r2.has_value()));
  w.put_f64(m.oob_r2.value_or(0.0));
  w.put(static_cast<std::uint64_t>(m.trees.size()));
  for (const auto& t : m.trees) {
    w.put(static_cast<std::uint64_t>(t.nodes.size()));
    for (const auto& n : t.nodes) {
      w.put(n.feature);
      w.put_f64(n.threshold);
      w.put(n.left);
      w.put(n.right);
      w.put_f64(n.value);
      w.put(n.n_samples);
    }
  }
  w.put(static_cast<std::uint64_t>(m.bootstrap_indices.size()));
  for (const auto& b : m.bootstrap_indices) {
    w.put(static_cast<std::uint64_t>(b.size()));
    for (auto r : b) w.put(r);
  }
  return w.data();
}

inline ForestModel decode_forest(std::string_view bytes, const std::string& source) {
  io::BinaryReader r(bytes, source);
  if (r.bytes(kForestMagic.size()) != kForestMagic) throw DataError(source + ": not a BFOREST1 file");
  if (r.get<std::uint32_t>() != kForestVersion)
    throw DataError(source + ": unsupported forest format version");
  ForestModel m;
  ForestParams& p = m.params;
  p.n_trees = r.get<std::uint64_t>();
  const auto rule = r.get<std::uint8_t>();
  if (rule > 2) throw DataError(source + ": bad max_features rule");
  p.max_features.rule = static_cast<MaxFeatures::Rule>(rule);
  p.max_features.count = r.get<std::uint64_t>();
  p.min_samples_leaf = r.get<std::uint64_t>();
  const bool has_depth = r.get<std::uint8_t>() != 0;
  const auto depth = r.get<std::uint64_t>();
  if (has_depth) p.max_depth = depth;
  p.bootstrap = r.get<std::uint8_t>() != 0;
  p.seed = r.get<std::uint64_t>();
  m.n_train_rows = r.get<std::uint64_t>();
  m.feature_names.resize(r.get<std::uint32_t>());
  for (auto& f : m.feature_names) f = r.get_string();
  const bool has_oob = r.get<std::uint8_t>() != 0;
  const double oob = r.get_f64();
  if (has_oob) m.oob_r2 = oob;
  m.trees.resize(r.get<std::uint64_t>());
  for (auto& t : m.trees) {
    t.nodes.resize(r.get<std::uint64_t>());
    for (auto& n : t.nodes) {
      n.feature = r.get<std::int32_t>();
      n.threshold = r.get_f64();
      n.left = r.get<std::uint32_t>();
      n.right = r.get<std::uint32_t>();
      n.value = r.get_f64();
      n.n_samples = r.get<std::uint32_t>();
      if (n.feature >= static_cast<std::int32_t>(m.feature_names.size()) ||
          (!n.is_leaf() && (n.left >= t.nodes.size() || n.right >= t.nodes.size())))
        throw DataError(source + ": corrupt tree node");
    }
    if (t.nodes.empty()) throw DataError(source + ": empty tree");
  }
  m.bootstrap_indices.resize(r.get<std::uint64_t>());
  for (auto& b : m.bootstrap_indices) {
    b.resize(r.get<std::uint64_t>());
    for (auto& x : b) x = r.get<std::uint32_t>();
  }
  if (!r.at_end()) throw DataError(source + ": trailing bytes after forest");
  if (m.trees.size() != p.n_trees) throw DataError(source + ": tree count mismatch");
  return m;
}

inline void write_forest(const ForestModel& m, const std::filesystem::path& path) {
  auto out = io::open_out(path, true);
  const auto bytes = encode_forest(m);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

inline ForestModel read_forest(const std::filesystem::path& path) {
  return decode_forest(io::read_file(path), path.string());
}

}  // namespace bathymap
