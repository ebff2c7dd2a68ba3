#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "support.hpp"

using namespace bathymap;
using bathymap::testing::mask_grid;
using bathymap::testing::small_geometry;

namespace {

// Table whose blue/green pair produces the given ratios exactly: green fixed
// at 0.05 (ln 50), blue solved from ratio * ln 50.
TrainingTable ratio_table(const std::vector<double>& ratios, const std::vector<double>& depths) {
  TrainingTable t;
  for (std::size_t i = 0; i < ratios.size(); ++i) {
    const double green = 0.05;
    const double blue = std::exp(ratios[i] * std::log(1000.0 * green)) / 1000.0;
    const std::vector<double> f{blue, green, 0.03, 0.01, 0.005, 0.003};
    t.add_row("s", {0, i}, f, depths[i], Provenance::InSitu);
  }
  return t;
}

std::vector<std::size_t> all_rows(const TrainingTable& t) {
  std::vector<std::size_t> r(t.size());
  std::iota(r.begin(), r.end(), std::size_t{0});
  return r;
}

}  // namespace

TEST(RatioFeature, EqualBandsGiveOne) { EXPECT_DOUBLE_EQ(ratio_feature(0.05, 0.05, 1000.0), 1.0); }

TEST(RatioFeature, HandValue) {
  // ln(100) / ln(50); 1.17719 is the five-digit hand value
  EXPECT_NEAR(ratio_feature(0.1, 0.05, 1000.0), 1.177183820135558, 1e-12);
  EXPECT_NEAR(ratio_feature(0.1, 0.05, 1000.0), 1.17719, 1e-5);
}

TEST(RatioFeature, UndefinedDomain) {
  EXPECT_THROW(ratio_feature(0.0, 0.05, 1000.0), NumericError);
  EXPECT_THROW(ratio_feature(0.05, -0.1, 1000.0), NumericError);
  EXPECT_THROW(ratio_feature(0.0005, 0.05, 1000.0), NumericError);  // n*R < 1
  EXPECT_THROW(ratio_feature(0.001, 0.05, 1000.0), NumericError);   // ln(1) = 0
  EXPECT_FALSE(try_ratio_feature(0.05, 0.001, 1000.0));
}

TEST(RatioFeature, ScaleCovariance) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.01, 0.2), uc(0.5, 3.0);
  for (int i = 0; i < 200; ++i) {
    const double ri = u(rng), rj = u(rng), c = uc(rng), n = 1000.0;
    const double expected = (std::log(c) + std::log(n * ri)) / (std::log(c) + std::log(n * rj));
    EXPECT_NEAR(ratio_feature(c * ri, c * rj, n), expected, 1e-12 * std::fabs(expected));
  }
}

TEST(FitLakeLinear, ExactLinearRecovery) {
  std::vector<double> ratios, depths;
  for (int i = 0; i < 25; ++i) {
    ratios.push_back(0.9 + 0.02 * i);
    depths.push_back(10.0 * ratios.back() - 5.0);
  }
  const auto t = ratio_table(ratios, depths);
  const auto m = fit_lake_linear(t, all_rows(t), 3);
  EXPECT_NEAR(m.m1, 10.0, 1e-9);
  EXPECT_NEAR(m.m0, -5.0, 1e-9);
  EXPECT_NEAR(m.fit_r2, 1.0, 1e-12);
  EXPECT_EQ(m.n_samples, 25u);
  EXPECT_EQ(m.lake_id, 3u);
  EXPECT_EQ(m.band_i, "blue");
  EXPECT_EQ(m.band_j, "green");
}

TEST(FitLakeLinear, ConstantRatioIsSingular) {
  const auto t = ratio_table({1.1, 1.1, 1.1, 1.1}, {1, 2, 3, 4});
  EXPECT_THROW(fit_lake_linear(t, all_rows(t), 1), NumericError);
}

TEST(FitLakeLinear, TooFewRows) {
  const auto t = ratio_table({1.0, 1.1}, {1, 2});
  EXPECT_THROW(fit_lake_linear(t, all_rows(t), 1), DataError);
}

TEST(FitLakeLinear, ResidualsOrthogonalToDesign) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> ur(0.8, 1.4);
  std::normal_distribution<double> noise(0.0, 0.7);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> ratios, depths;
    for (int i = 0; i < 40; ++i) {
      ratios.push_back(ur(rng));
      depths.push_back(std::max(0.0, 12.0 * ratios.back() - 8.0 + noise(rng)));
    }
    const auto t = ratio_table(ratios, depths);
    const auto m = fit_lake_linear(t, all_rows(t), 1);
    double s = 0.0, sx = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double x = ratio_feature(t.features(i)[0], t.features(i)[1], 1000.0);
      const double res = t.depth(i) - m.predict_raw(x);
      s += res;
      sx += res * x;
      scale += std::fabs(t.depth(i)) * std::max(1.0, std::fabs(x));
    }
    EXPECT_LE(std::fabs(s), 1e-8 * scale);
    EXPECT_LE(std::fabs(sx), 1e-8 * scale);
  }
}

TEST(FitLakeLinear, BestPairSelection) {
  std::vector<double> ratios, depths;
  for (int i = 0; i < 10; ++i) {
    ratios.push_back(1.0 + 0.03 * i);
    depths.push_back(4.0 * ratios.back());
  }
  // Red varies independently of depth so only blue/green is exactly linear.
  TrainingTable t;
  const auto base = ratio_table(ratios, depths);
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::vector<double> f(base.features(i).begin(), base.features(i).end());
    f[2] = 0.03 * (1.0 + 0.5 * std::sin(1.7 * static_cast<double>(i)));
    t.add_row("s", base.pixel(i), f, base.depth(i), Provenance::InSitu);
  }
  LinearConfig cfg;
  cfg.candidate_bands = {"red", "blue", "green"};
  const auto m = fit_lake_linear(t, all_rows(t), 1, cfg);
  EXPECT_NEAR(m.fit_r2, 1.0, 1e-12);
  EXPECT_TRUE((m.band_i == "blue" && m.band_j == "green") || (m.band_i == "green" && m.band_j == "blue"));
}

TEST(FitLakeLinear, NoiseFreeForwardModelLake) {
  // Forward model: R_b = deep + (bottom - deep) exp(-2 k z), arctic optics.
  const auto optics = OpticalParams::arctic_default();
  std::vector<double> x, y;
  TrainingTable t;
  for (int i = 0; i <= 75; ++i) {
    const double z = 0.5 + 0.1 * i;
    std::vector<double> f(6);
    for (std::size_t b = 0; b < 6; ++b) f[b] = optics.deep[b] + (optics.bottom[b] - optics.deep[b]) * std::exp(-2.0 * optics.attenuation[b] * z);
    t.add_row("s", {0, 0}, f, z, Provenance::InSitu);
    x.push_back(std::log(1000.0 * f[0]) / std::log(1000.0 * f[1]));
    y.push_back(z);
  }
  const auto m = fit_lake_linear(t, all_rows(t), 1);
  EXPECT_GE(m.fit_r2, 0.95);
  // independent closed-form OLS
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  EXPECT_NEAR(m.m1, slope, 1e-6 * std::fabs(slope));
  EXPECT_NEAR(m.m0, (sy - slope * sx) / n, 1e-6 * std::fabs(slope));
}

TEST(PredictLakeLinear, ByConstructionAndClamp) {
  const auto g = small_geometry(1, 3);
  const auto lakes = label_lakes(mask_grid(g, {1, 1, 0}));
  Grid scene(g);
  scene.add_band("blue", -9999.0f, 0.05f);
  scene.add_band("green", -9999.0f, 0.05f);
  scene.band("blue").values[1] = 0.02f;  // ratio < 1
  LinearLakeModel m{1, "blue", "green", 1000.0, 10.0, -5.0, 1.0, 10};
  const Grid out = predict_lake_linear(m, scene, lakes);
  EXPECT_EQ(out.band(0).values[0], 5.0f);
  const double r1 = ratio_feature(static_cast<float>(0.02f), static_cast<float>(0.05f), 1000.0);
  EXPECT_EQ(out.band(0).values[1], static_cast<float>(std::max(0.0, 10.0 * r1 - 5.0)));
  EXPECT_FALSE(out.band(0).valid(2));

  LinearLakeModel neg{1, "blue", "green", 1000.0, 1.0, -1.3, 1.0, 10};  // raw -0.3
  EXPECT_EQ(predict_lake_linear(neg, scene, lakes).band(0).values[0], 0.0f);
  LinearLakeModel absent{5, "blue", "green", 1000.0, 1.0, 0.0, 1.0, 10};
  EXPECT_THROW(predict_lake_linear(absent, scene, lakes), DataError);
}

TEST(PredictLakeLinear, CellwiseRecomputeOnSimulatedLake) {
  const GridGeometry g{0, 0, 30, 40, 40, "t"};
  const LakeSpec lake{600, -600, 500, 7.0, 2.0, 1.0};
  const auto field = gen_depth_field(std::span<const LakeSpec>(&lake, 1), g);
  SceneSpec spec;
  spec.noise_sigma = 0.002;
  const auto s = gen_scene(field, OpticalParams::arctic_default(), spec, 5);
  const auto lakes = label_lakes(field.water_mask);
  ASSERT_EQ(lakes.lake_count, 1u);
  LinearLakeModel m{1, "blue", "green", 1000.0, 9.0, -6.5, 1.0, 10};
  const Grid out = predict_lake_linear(m, s.scene, lakes);
  std::size_t painted = 0;
  for (std::size_t c = 0; c < g.cell_count(); ++c) {
    if (lakes.labels[c] == 0) {
      ASSERT_FALSE(out.band(0).valid(c));
      continue;
    }
    const auto r = try_ratio_feature(s.scene.band("blue").values[c], s.scene.band("green").values[c], 1000.0);
    if (!r) continue;
    ++painted;
    ASSERT_EQ(out.band(0).values[c], static_cast<float>(std::max(0.0, 9.0 * *r - 6.5)));
    ASSERT_GE(out.band(0).values[c], 0.0f);
  }
  EXPECT_GT(painted, 500u);
}
