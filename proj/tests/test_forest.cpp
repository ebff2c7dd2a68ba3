#include <gtest/gtest.h>

#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "oracle_tree.hpp"
#include "support.hpp"

using namespace bathymap;
using bathymap::testing::mask_grid;
using bathymap::testing::qa_grid;
using bathymap::testing::small_geometry;

namespace {

struct Matrix {
  std::vector<double> x, y;
  std::size_t nf;
  DatasetView view() const { return {x, y, nf}; }
  std::vector<double> row(std::size_t i) const {
    return std::vector<double>(x.begin() + i * nf, x.begin() + (i + 1) * nf);
  }
};

Matrix random_matrix(std::size_t n, std::size_t nf, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix m{{}, {}, nf};
  for (std::size_t i = 0; i < n; ++i) {
    double y = 0.0;
    for (std::size_t f = 0; f < nf; ++f) {
      m.x.push_back(u(rng));
      y += (f + 1) * m.x.back();
    }
    m.y.push_back(y + 0.3 * u(rng));
  }
  return m;
}

TrainingTable table_from(const Matrix& m) {
  std::vector<std::string> names;
  for (std::size_t f = 0; f < m.nf; ++f) names.push_back("f" + std::to_string(f));
  TrainingTable t(names);
  for (std::size_t i = 0; i < m.y.size(); ++i) t.add_row("s", {0, i}, m.row(i), m.y[i], Provenance::InSitu);
  return t;
}

std::vector<std::uint32_t> iota_rows(std::size_t n) {
  std::vector<std::uint32_t> r(n);
  std::iota(r.begin(), r.end(), 0u);
  return r;
}

}  // namespace

TEST(BestSplit, HandExample) {
  const std::vector<double> x{0, 0, 1, 1}, y{1, 1, 10, 10};
  const DatasetView v{x, y, 1};
  const std::vector<std::size_t> feats{0};
  const auto s = best_split(v, iota_rows(4), feats);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->feature, 0u);
  EXPECT_EQ(s->threshold, 0.5);
  EXPECT_EQ(s->weighted_child_variance, 0.0);
  EXPECT_DOUBLE_EQ(s->parent_variance, 20.25);
}

TEST(BestSplit, BruteForceOverCandidates) {
  const Matrix m = random_matrix(30, 3, 17);
  const std::vector<std::size_t> feats{0, 1, 2};
  const auto s = best_split(m.view(), iota_rows(30), feats);
  ASSERT_TRUE(s);
  double best = 1e300;
  for (std::size_t f = 0; f < 3; ++f)
    for (std::size_t i = 0; i < 30; ++i) {
      const double t = m.x[i * 3 + f];
      std::vector<double> l, r;
      for (std::size_t k = 0; k < 30; ++k) (m.x[k * 3 + f] <= t ? l : r).push_back(m.y[k]);
      if (l.empty() || r.empty()) continue;
      best = std::min(best, (oracle::sse(l) + oracle::sse(r)) / 30.0);
    }
  EXPECT_NEAR(s->weighted_child_variance, best, 1e-12);
}

TEST(BestSplit, ConstantLabelsNoSplit) {
  const std::vector<double> x{0, 1, 2, 3}, y{4, 4, 4, 4};
  const std::vector<std::size_t> feats{0};
  EXPECT_FALSE(best_split(DatasetView{x, y, 1}, iota_rows(4), feats));
}

TEST(BestSplit, TiedFeaturesLowerIndexWins) {
  // feature 1 duplicates feature 0
  const std::vector<double> x{0, 0, 0, 0, 1, 1, 1, 1}, y{1, 1, 10, 10};
  const std::vector<std::size_t> feats{1, 0};
  const auto s = best_split(DatasetView{x, y, 2}, iota_rows(4), feats);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->feature, 0u);
}

TEST(BestSplit, TiedThresholdsLowerWins) {
  const std::vector<double> x{1, 2, 3}, y{0, 10, 0};
  const std::vector<std::size_t> feats{0};
  const auto s = best_split(DatasetView{x, y, 1}, iota_rows(3), feats);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->threshold, 1.5);
}

TEST(BestSplit, MinSamplesLeaf) {
  const std::vector<double> x{0, 1, 2, 3}, y{0, 0, 0, 100};
  const std::vector<std::size_t> feats{0};
  const auto s = best_split(DatasetView{x, y, 1}, iota_rows(4), feats, 2);
  ASSERT_TRUE(s);
  EXPECT_EQ(s->threshold, 1.5);
  EXPECT_FALSE(best_split(DatasetView{x, y, 1}, iota_rows(4), feats, 3));
}

TEST(FitTree, MemorizesDistinctRows) {
  const Matrix m = random_matrix(80, 6, 2);
  ForestParams p;
  Rng rng(1);
  const auto tree = fit_tree(m.view(), iota_rows(80), p, rng);
  for (std::size_t i = 0; i < 80; ++i) EXPECT_EQ(tree.predict(m.row(i)), m.y[i]);
}

TEST(FitTree, DepthZeroIsGlobalMean) {
  const Matrix m = random_matrix(40, 6, 2);
  ForestParams p;
  p.max_depth = 0;
  Rng rng(1);
  const auto tree = fit_tree(m.view(), iota_rows(40), p, rng);
  ASSERT_EQ(tree.nodes.size(), 1u);
  EXPECT_NEAR(tree.nodes[0].value, mean(m.y), 1e-12);
}

TEST(FitTree, LeavesHoldMeanOfTheirSamples) {
  const Matrix m = random_matrix(120, 6, 12);
  ForestParams p;
  p.min_samples_leaf = 4;
  Rng rng(3);
  const auto tree = fit_tree(m.view(), iota_rows(120), p, rng);
  std::map<const TreeNode*, std::vector<double>> by_leaf;
  for (std::size_t i = 0; i < 120; ++i) {
    std::uint32_t k = 0;
    while (!tree.nodes[k].is_leaf())
      k = m.row(i)[tree.nodes[k].feature] <= tree.nodes[k].threshold ? tree.nodes[k].left : tree.nodes[k].right;
    by_leaf[&tree.nodes[k]].push_back(m.y[i]);
  }
  for (const auto& [leaf, ys] : by_leaf) {
    EXPECT_NEAR(leaf->value, mean(ys), 1e-12);
    EXPECT_EQ(leaf->n_samples, ys.size());
    EXPECT_GE(ys.size(), 4u);
  }
}

TEST(FitTree, MatchesOracleSeed3) {
  const Matrix m = random_matrix(50, 6, 3);
  ForestParams p;
  Rng a(3), b(3);
  const auto tree = fit_tree(m.view(), iota_rows(50), p, a);
  std::vector<oracle::Row> rows;
  for (std::size_t i = 0; i < 50; ++i) rows.push_back({m.row(i), m.y[i]});
  const auto ref = oracle::grow(rows, {2, 1, std::nullopt}, b, 0);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_NEAR(tree.predict(m.row(i)), ref->predict(m.row(i)), 1e-12);
  EXPECT_EQ(a.state(), b.state());
}

TEST(FitTree, MatchesOracleWithLimits) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t n = 20 + rng() % 150;
    const Matrix m = random_matrix(n, 6, rng());
    ForestParams p;
    p.min_samples_leaf = 1 + rng() % 4;
    p.max_depth = 2 + rng() % 8;
    p.max_features = MaxFeatures::exactly(1 + rng() % 6);
    Rng a(trial), b(trial);
    const auto tree = fit_tree(m.view(), iota_rows(n), p, a);
    std::vector<oracle::Row> rows;
    for (std::size_t i = 0; i < n; ++i) rows.push_back({m.row(i), m.y[i]});
    const auto ref = oracle::grow(rows, {p.max_features.count, p.min_samples_leaf, p.max_depth}, b, 0);
    const Matrix probe = random_matrix(100, 6, trial + 1000);
    for (std::size_t i = 0; i < 100; ++i) ASSERT_NEAR(tree.predict(probe.row(i)), ref->predict(probe.row(i)), 1e-12);
  }
}

TEST(FitForest, SingleUnbaggedTreeEqualsFitTree) {
  const Matrix m = random_matrix(60, 6, 4);
  ForestParams p;
  p.n_trees = 1;
  p.bootstrap = false;
  p.seed = 99;
  const auto model = fit_forest(m.view(), table_from(m).feature_names(), p, 1);
  Rng rng = Rng::stream(99, 0);
  const auto tree = fit_tree(m.view(), iota_rows(60), p, rng);
  EXPECT_EQ(model.trees[0], tree);
  const Matrix probe = random_matrix(50, 6, 5);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(predict_forest(model, probe.row(i)), tree.predict(probe.row(i)));
  EXPECT_FALSE(model.oob_r2);
  EXPECT_THROW(oob_score(model, m.view()), DataError);
}

TEST(FitForest, ConstantLabels) {
  Matrix m = random_matrix(30, 6, 6);
  std::fill(m.y.begin(), m.y.end(), 2.75);
  ForestParams p;
  p.n_trees = 10;
  const auto model = fit_forest(m.view(), table_from(m).feature_names(), p, 1);
  for (std::size_t i = 0; i < 30; ++i) EXPECT_EQ(predict_forest(model, m.row(i)), 2.75);
  EXPECT_FALSE(model.oob_r2);
}

TEST(FitForest, WorkerCountDoesNotChangeModel) {
  const auto t = table_from(random_matrix(300, 6, 7));
  ForestParams p;
  p.n_trees = 40;
  p.seed = 1234;
  const auto a = encode_forest(fit_forest(t, p, 1));
  const auto b = encode_forest(fit_forest(t, p, 8));
  const auto c = encode_forest(fit_forest(t, p, 3));
  EXPECT_EQ(a, b);
  EXPECT_EQ(a, c);
  p.seed = 1235;
  EXPECT_NE(a, encode_forest(fit_forest(t, p, 1)));
}

TEST(FitForest, BootstrapIsFirstDrawsOfTreeStream) {
  const auto t = table_from(random_matrix(50, 6, 8));
  ForestParams p;
  p.n_trees = 3;
  p.seed = 5;
  const auto model = fit_forest(t, p, 1);
  for (std::size_t k = 0; k < 3; ++k) {
    Rng rng = Rng::stream(5, k);
    for (std::size_t i = 0; i < 50; ++i) ASSERT_EQ(model.bootstrap_indices[k][i], rng.below(50));
  }
}

TEST(PredictForest, MeanRuleAndErrors) {
  ForestModel m;
  m.feature_names = {"a"};
  RegressionTree t1, t2;
  t1.nodes.push_back(TreeNode{-1, 0, 0, 0, 1.0, 1});
  t2.nodes.push_back(TreeNode{-1, 0, 0, 0, 3.0, 1});
  m.trees = {t1, t1};
  const std::vector<double> x{0.5};
  m.trees = {t2, t2};
  EXPECT_EQ(predict_forest(m, x), 3.0);
  m.trees = {t1, t2};
  EXPECT_EQ(predict_forest(m, x), 2.0);
  const std::vector<double> bad{std::numeric_limits<double>::infinity()};
  EXPECT_THROW(predict_forest(m, bad), NumericError);
  const std::vector<double> wide{0.1, 0.2};
  EXPECT_THROW(predict_forest(m, wide), DataError);
}

TEST(FitForest, PredictionsWithinLabelRange) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix m = random_matrix(100, 6, seed + 40);
    ForestParams p;
    p.n_trees = 15;
    p.seed = seed;
    const auto model = fit_forest(m.view(), table_from(m).feature_names(), p, 1);
    const auto [lo, hi] = std::minmax_element(m.y.begin(), m.y.end());
    const Matrix probe = random_matrix(200, 6, seed + 900);
    for (std::size_t i = 0; i < 200; ++i) {
      const double v = predict_forest(model, probe.row(i));
      ASSERT_GE(v, *lo - 1e-12);
      ASSERT_LE(v, *hi + 1e-12);
    }
  }
}

TEST(FitForest, DuplicateColumnLeavesTreeUnchanged) {
  const Matrix m = random_matrix(80, 3, 13);
  Matrix d{{}, m.y, 4};
  for (std::size_t i = 0; i < 80; ++i) {
    const auto r = m.row(i);
    d.x.insert(d.x.end(), r.begin(), r.end());
    d.x.push_back(r[1]);
  }
  ForestParams p;
  p.max_features = MaxFeatures::all();
  Rng a(1), b(1);
  const auto t3 = fit_tree(m.view(), iota_rows(80), p, a);
  const auto t4 = fit_tree(d.view(), iota_rows(80), p, b);
  EXPECT_EQ(t3, t4);
}

TEST(FitForest, TrainingR2GrowsWithTreesOnAverage) {
  double r_small = 0.0, r_large = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto t = table_from(random_matrix(120, 6, seed + 500));
    ForestParams p;
    p.seed = seed;
    p.min_samples_leaf = 3;
    p.n_trees = 2;
    r_small += training_r2_or_nan(fit_forest(t, p, 1), t, 1);
    p.n_trees = 30;
    r_large += training_r2_or_nan(fit_forest(t, p, 1), t, 1);
  }
  EXPECT_GE(r_large, r_small);
}

TEST(OobScore, TreeFractionNearExpectation) {
  const auto t = table_from(random_matrix(668, 6, 21));
  ForestParams p;
  p.seed = 21;
  const auto model = fit_forest(t, p, 1);
  const auto oob = oob_score(model, t.view(), 1);
  EXPECT_NEAR(oob.mean_oob_tree_fraction, std::pow(1.0 - 1.0 / 668.0, 668.0), 0.02);
  EXPECT_NEAR(oob.mean_oob_tree_fraction, 0.3675, 0.02);
  EXPECT_EQ(oob.rows_scored + oob.rows_without_oob, 668u);
  ASSERT_TRUE(model.oob_r2);
  EXPECT_EQ(*model.oob_r2, *oob.r2);
  EXPECT_GT(*oob.r2, 0.5);
}

TEST(OobScore, R2Definition) {
  const std::vector<double> truth{1, 2, 3, 4};
  EXPECT_EQ(*r2(truth, truth), 1.0);
  const std::vector<double> flat(4, 2.5);
  EXPECT_EQ(*r2(flat, truth), 0.0);
}

TEST(ForestSerialization, ReloadPredictsIdentically) {
  const auto t = table_from(random_matrix(200, 6, 31));
  ForestParams p;
  p.n_trees = 25;
  p.seed = 3;
  const auto m = fit_forest(t, p, 1);
  const auto back = decode_forest(encode_forest(m), "mem");
  const Matrix probe = random_matrix(1000, 6, 32);
  for (std::size_t i = 0; i < 1000; ++i) ASSERT_EQ(predict_forest(back, probe.row(i)), predict_forest(m, probe.row(i)));
}

TEST(SplitTrainTest, Sizes) {
  auto s = split_indices(10, 0.2, 1);
  EXPECT_EQ(s.train.size(), 8u);
  EXPECT_EQ(s.test.size(), 2u);
  std::vector<std::size_t> all(s.train);
  all.insert(all.end(), s.test.begin(), s.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(all[i], i);
  s = split_indices(668, 0.2, 9);
  EXPECT_EQ(s.train.size(), 534u);
  EXPECT_EQ(s.test.size(), 134u);
}

TEST(SplitTrainTest, Determinism) {
  EXPECT_EQ(split_indices(100, 0.2, 4).test, split_indices(100, 0.2, 4).test);
  EXPECT_NE(split_indices(100, 0.2, 4).test, split_indices(100, 0.2, 5).test);
  const auto t = table_from(random_matrix(20, 2, 1));
  const auto [a, b] = split_train_test(t, 0.25, 3);
  EXPECT_EQ(a.size(), 15u);
  EXPECT_EQ(b.size(), 5u);
}

TEST(SplitTrainTest, Errors) {
  EXPECT_THROW(split_indices(1, 0.2, 1), DataError);
  EXPECT_THROW(split_indices(10, 0.0, 1), ConfigError);
  EXPECT_THROW(split_indices(10, 1.0, 1), ConfigError);
  EXPECT_EQ(split_indices(3, 0.01, 1).test.size(), 1u);
}

TEST(PredictGrid, EmptyMaskAllNodata) {
  const auto g = small_geometry(8, 8);
  std::mt19937_64 rng(1);
  const Grid scene = bathymap::testing::random_scene(g, rng);
  const auto t = table_from(random_matrix(50, 6, 1));
  ForestParams p;
  p.n_trees = 5;
  auto model = fit_forest(t, p, 1);
  model.feature_names = default_feature_bands();
  const Grid out = predict_grid(model, scene, mask_grid(g, std::vector<int>(64, 0)), qa_grid(g), QaPolicy{});
  EXPECT_EQ(out.valid_count(0), 0u);
}

TEST(PredictGrid, SinglePixelAndTilingInvariance) {
  const GridGeometry g{0, 0, 30, 256, 256, "t"};
  std::mt19937_64 rng(2);
  const Grid scene = bathymap::testing::random_scene(g, rng);
  auto t = table_from(random_matrix(200, 6, 2));
  ForestParams p;
  p.n_trees = 10;
  auto model = fit_forest(t, p, 1);
  model.feature_names = default_feature_bands();

  std::vector<int> one(g.cell_count(), 0);
  one[g.index(100, 37)] = 1;
  const Grid single = predict_grid(model, scene, mask_grid(g, one), qa_grid(g), QaPolicy{});
  EXPECT_EQ(single.valid_count(0), 1u);
  std::vector<double> x;
  for (const auto& b : default_feature_bands()) x.push_back(scene.band(b).values[g.index(100, 37)]);
  EXPECT_EQ(single.band(0).values[g.index(100, 37)], static_cast<float>(predict_forest(model, x)));

  std::vector<int> water(g.cell_count());
  for (auto& w : water) w = rng() % 3 != 0;
  Grid qa = qa_grid(g);
  for (auto& v : qa.band(0).values) v = rng() % 5 == 0 ? 1.0f : 0.0f;
  const Grid wm = mask_grid(g, water);
  const Grid a = predict_grid(model, scene, wm, qa, QaPolicy{}, {32, 1});
  const Grid b = predict_grid(model, scene, wm, qa, QaPolicy{}, {256, 1});
  const Grid c = predict_grid(model, scene, wm, qa, QaPolicy{}, {17, 4});
  EXPECT_EQ(encode_grid_payload(a), encode_grid_payload(b));
  EXPECT_EQ(encode_grid_payload(a), encode_grid_payload(c));
  EXPECT_THROW(predict_grid(model, scene, mask_grid(small_geometry(2, 2), {1, 1, 1, 1}), qa, QaPolicy{}), DataError);
}
