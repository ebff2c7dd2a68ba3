#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "support.hpp"

using namespace bathymap;
using bathymap::testing::small_geometry;

TEST(R2, Examples) {
  const std::vector<double> t{0, 2}, p{2, 0};
  EXPECT_DOUBLE_EQ(*r2(p, t), -3.0);
  EXPECT_DOUBLE_EQ(*r2(t, t), 1.0);
  EXPECT_DOUBLE_EQ(*r2(std::vector<double>{1, 1}, t), 0.0);
  EXPECT_FALSE(r2(t, std::vector<double>{3, 3}).has_value());
}

TEST(Mae, Examples) {
  EXPECT_EQ(mae(std::vector<double>{1, 3}, std::vector<double>{2, 2}), 1.0);
  EXPECT_EQ(mae(std::vector<double>{1, 3}, std::vector<double>{1, 3}), 0.0);
}

// Frozen from tests/oracles/metrics_pairs.py (exact rational arithmetic).
TEST(R2, MatchesScriptedOracle) {
  std::vector<double> t, p;
  for (int i = 0; i < 1000; ++i) {
    t.push_back(6.0 + 4.0 * std::cos(0.7 * i));
    p.push_back(t.back() + 1.5 * std::sin(1.3 * i + 0.2));
  }
  EXPECT_NEAR(*r2(p, t), 0.85933525945211564, 1e-12);
  EXPECT_NEAR(mae(p, t), 0.95419304707343022, 1e-12);
}

namespace {

Grid depth_grid(const GridGeometry& g, float fill) {
  Grid d(g);
  d.add_band("depth_m", kDefaultNodata, fill);
  return d;
}

}  // namespace

TEST(Difference, IdenticalAndOffset) {
  const auto g = small_geometry(10, 10);
  Grid a = depth_grid(g, 3.0f);
  auto same = difference_grid(a, a);
  EXPECT_EQ(same.n_valid, 100u);
  EXPECT_EQ(same.within[0].fraction, 1.0);
  for (float v : same.difference.band(0).values) EXPECT_EQ(v, 0.0f);

  Grid b = depth_grid(g, 2.5f);
  auto off = difference_grid(a, b);
  EXPECT_EQ(off.within[0].fraction, 0.0);
  EXPECT_EQ(off.within[1].fraction, 1.0);
}

TEST(Difference, NormalDisagreementMatchesCdf) {
  const GridGeometry g{0, 0, 1, 1000, 1000, "t"};
  Grid a = depth_grid(g, 0.0f), b = depth_grid(g, 0.0f);
  Rng rng(2024);
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    b.band(0).values[i] = 10.0f;
    a.band(0).values[i] = static_cast<float>(10.0 + rng.normal());
  }
  const auto d = difference_grid(a, b);
  EXPECT_NEAR(d.within[1].fraction, std::erf(2.0 / std::sqrt(2.0)), 0.01);
  EXPECT_NEAR(d.within[1].fraction, 0.9545, 0.01);
}

TEST(Difference, AntisymmetryAndHistogramMass) {
  const GridGeometry g{0, 0, 1, 50, 60, "t"};
  Grid a = depth_grid(g, 0.0f), b = depth_grid(g, 0.0f);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<float> u(0.0f, 20.0f);
  std::bernoulli_distribution hole(0.1);
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    a.band(0).values[i] = hole(rng) ? kDefaultNodata : u(rng);
    b.band(0).values[i] = hole(rng) ? kDefaultNodata : u(rng);
  }
  const auto ab = difference_grid(a, b), ba = difference_grid(b, a);
  ASSERT_EQ(ab.n_valid, ba.n_valid);
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    const Band& x = ab.difference.band(0);
    const Band& y = ba.difference.band(0);
    ASSERT_EQ(x.valid(i), y.valid(i));
    if (x.valid(i)) ASSERT_EQ(x.values[i], -y.values[i]);
  }
  double total = ab.below_fraction + ab.above_fraction;
  for (const auto& h : ab.histogram) total += h.fraction;
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_THROW(difference_grid(a, depth_grid(small_geometry(2, 2), 0.0f)), DataError);
}

TEST(DepthBins, ToleranceExample) {
  const std::vector<double> truth{1, 1, 5}, pred{1.2, 2.0, 5.4};
  const std::vector<DepthBin> bins{{0, 2}, {2, 10}};
  const auto r = accuracy_by_depth_bin(pred, truth, bins, ToleranceRule{0.5, 0.0});
  EXPECT_EQ(r[0].n, 2u);
  EXPECT_DOUBLE_EQ(*r[0].fraction, 0.5);
  EXPECT_EQ(r[1].n, 1u);
  EXPECT_DOUBLE_EQ(*r[1].fraction, 1.0);
}

TEST(DepthBins, PerfectEmptyAndOverlap) {
  const std::vector<double> t{0.5, 1.5, 3, 6, 12};
  const auto bins = default_depth_bins();
  for (const auto& b : accuracy_by_depth_bin(t, t, bins)) EXPECT_EQ(*b.fraction, 1.0);
  const auto r = accuracy_by_depth_bin(std::vector<double>{0.5}, std::vector<double>{0.5}, bins);
  EXPECT_FALSE(r[4].fraction.has_value());
  EXPECT_EQ(r[4].n, 0u);
  const std::vector<DepthBin> overlap{{0, 2}, {1, 3}};
  EXPECT_THROW(accuracy_by_depth_bin(t, t, overlap), ConfigError);
}

TEST(DepthBins, RelativeToleranceDominatesWhenDeep) {
  ToleranceRule rule;
  EXPECT_TRUE(rule.correct(11.9, 10.0));
  EXPECT_FALSE(rule.correct(12.1, 10.0));
  EXPECT_TRUE(rule.correct(1.5, 1.0));
  EXPECT_FALSE(rule.correct(1.6, 1.0));
}

namespace {

CompositeStack composite_from(const Grid& depth) {
  const ScenePrediction p{"s", 2017, &depth};
  return composite_stack(std::span<const ScenePrediction>(&p, 1), CompositeWindow{});
}

}  // namespace

TEST(ValidateMap, ExactComposite) {
  const auto g = small_geometry(4, 4);
  Grid d = depth_grid(g, 0.0f);
  DepthPixelSet px;
  for (std::size_t i = 0; i < g.cell_count(); ++i) {
    d.band(0).values[i] = static_cast<float>(0.25 + 0.75 * static_cast<double>(i));
    px.pixels.push_back({g.pixel(i), d.band(0).values[i], 1, 1});
  }
  const auto rep = validate_map(composite_from(d), px);
  EXPECT_EQ(rep.n, 16u);
  EXPECT_DOUBLE_EQ(*rep.r2, 1.0);
  EXPECT_EQ(rep.mae, 0.0);
  for (const auto& b : rep.bins)
    if (b.n) EXPECT_EQ(*b.fraction, 1.0);
  EXPECT_NEAR(rep.nmad_strata.below_half_m + rep.nmad_strata.half_to_two_m + rep.nmad_strata.above_two_m, 1.0, 1e-9);
}

TEST(ValidateMap, NodataExcludedAndCounted) {
  const auto g = small_geometry(2, 2);
  Grid d = depth_grid(g, 2.0f);
  d.band(0).values[3] = kDefaultNodata;
  DepthPixelSet px;
  for (std::size_t i = 0; i < 4; ++i) px.pixels.push_back({g.pixel(i), 1.0 + static_cast<double>(i), 1, 1});
  const auto rep = validate_map(composite_from(d), px);
  EXPECT_EQ(rep.n, 3u);
  EXPECT_EQ(rep.n_excluded_nodata, 1u);
  EXPECT_DOUBLE_EQ(rep.mae, 2.0 / 3.0);

  Grid none = depth_grid(g, 2.0f);
  DepthPixelSet one;
  one.pixels.push_back({{0, 0}, 1.0, 1, 1});
  none.band(0).values[0] = kDefaultNodata;
  EXPECT_THROW(validate_map(composite_from(none), one), DataError);
}

TEST(ValidateMap, ReportFiles) {
  bathymap::testing::TempDir dir("metrics");
  const auto g = small_geometry(2, 2);
  Grid d = depth_grid(g, 2.0f);
  DepthPixelSet px;
  px.pixels.push_back({{0, 0}, 2.0, 1, 1});
  px.pixels.push_back({{1, 1}, 2.0, 1, 1});
  const auto rep = validate_map(composite_from(d), px);
  write_validation_report(rep, dir / "v.kv", dir / "v.txt");
  const std::string kv = io::read_file(dir / "v.kv");
  EXPECT_NE(kv.find("format = BVALID1"), std::string::npos);
  EXPECT_NE(kv.find("n = 2"), std::string::npos);
  EXPECT_NE(kv.find("r2 = undefined"), std::string::npos);
}
