#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"

using namespace bathymap;
using bathymap::testing::small_geometry;

namespace {

LakeSpec centred_lake(const GridGeometry& g, double radius_px, double depth, double shape = 2.0) {
  const double ps = g.pixel_size;
  return {g.origin_x + 0.5 * static_cast<double>(g.n_cols) * ps, g.origin_y - 0.5 * static_cast<double>(g.n_rows) * ps,
          radius_px * ps, depth, shape, 1.0};
}

}  // namespace

TEST(LakeSpec, DepthProfile) {
  const LakeSpec l{0, 0, 100, 6, 1, 1};
  EXPECT_EQ(l.depth_at(0, 0), 6.0);
  EXPECT_EQ(l.depth_at(100, 0), 0.0);
  EXPECT_DOUBLE_EQ(l.depth_at(0, 50), 3.0);
  EXPECT_THROW((LakeSpec{0, 0, 100, 26, 1, 1}.validate()), ConfigError);
  EXPECT_THROW((LakeSpec{0, 0, 0, 5, 1, 1}.validate()), ConfigError);
}

TEST(GenDepthField, CentreBoundaryAndMask) {
  const auto g = small_geometry(21, 21);
  // Centre pixel (10, 10) sits exactly on the lake centre.
  const LakeSpec l = centred_lake(g, 8, 5.0);
  const auto f = gen_depth_field(std::span<const LakeSpec>(&l, 1), g);
  EXPECT_FLOAT_EQ(f.depth.band(0).values[g.index(10, 10)], 5.0f);
  EXPECT_EQ(f.depth.band(0).values[g.index(10, 18)], 0.0f);
  EXPECT_EQ(f.water_mask.band(0).values[g.index(10, 18)], 0.0f);
  for (std::size_t i = 0; i < g.cell_count(); ++i)
    ASSERT_EQ(f.water_mask.band(0).values[i] != 0.0f, f.depth.band(0).values[i] > 0.0f);
  EXPECT_EQ(label_lakes(f.water_mask).lake_count, 1u);
}

TEST(GenDepthField, TextureIsSeededAndOptional) {
  const auto g = small_geometry(21, 21);
  const LakeSpec l = centred_lake(g, 8, 5.0);
  const auto plain = gen_depth_field(std::span<const LakeSpec>(&l, 1), g, 9, 0.0);
  for (std::size_t i = 0; i < g.cell_count(); ++i)
    if (plain.water_mask.band(0).values[i] != 0.0f) ASSERT_EQ(plain.substrate.band(0).values[i], 1.0f);
  const auto a = gen_depth_field(std::span<const LakeSpec>(&l, 1), g, 9, 0.3);
  const auto b = gen_depth_field(std::span<const LakeSpec>(&l, 1), g, 9, 0.3);
  EXPECT_EQ(a.substrate, b.substrate);
  EXPECT_EQ(a.depth, plain.depth);
  EXPECT_NE(a.substrate, plain.substrate);
}

TEST(ForwardModel, SurfaceAndDeepLimits) {
  const auto o = OpticalParams::arctic_default();
  Rng rng(1);
  const Spectrum r0 = reflectance_from_depth(0.0, o, 1.0, 0.0, rng);
  for (std::size_t b = 0; b < kSpectralBands; ++b) EXPECT_DOUBLE_EQ(r0[b], o.bottom[b]);
  // The asymptote needs k >= 0.1 to be reached within 50 m.
  OpticalParams murky = o;
  for (auto& k : murky.attenuation) k = std::max(k, 0.1);
  const Spectrum deep = reflectance_from_depth(50.0, murky, 1.0, 0.0, rng);
  for (std::size_t b = 0; b < kSpectralBands; ++b) EXPECT_NEAR(deep[b], murky.deep[b], 1e-4);
  EXPECT_THROW(reflectance_from_depth(-0.1, o, 1.0, 0.0, rng), DataError);
}

TEST(ForwardModel, InversionAndMonotonicity) {
  const auto o = OpticalParams::arctic_default();
  for (double z = 0.25; z <= 8.0; z += 0.25) {
    for (std::size_t b = 0; b < 3; ++b) {
      const double r = 1.1 * forward_reflectance(z, o, b);
      EXPECT_NEAR(invert_band_depth(r, o.bottom[b], o.deep[b], o.attenuation[b], 1.1), z, 1e-9);
    }
  }
  for (std::size_t b = 0; b < 3; ++b) {
    double prev = forward_reflectance(0.0, o, b);
    for (double z = 0.1; z <= 25.0; z += 0.1) {
      const double r = forward_reflectance(z, o, b);
      ASSERT_LT(r, prev);
      prev = r;
    }
  }
}

TEST(GenScene, CloudFractionDeterminismAndRange) {
  const GridGeometry g{0, 0, 30, 100, 100, "t"};
  const LakeSpec l = centred_lake(g, 30, 8.0);
  const auto f = gen_depth_field(std::span<const LakeSpec>(&l, 1), g);
  const auto o = OpticalParams::arctic_default();

  SceneSpec clear;
  const auto s0 = gen_scene(f, o, clear, 4);
  for (float q : s0.qa.band(0).values) ASSERT_EQ(q, 0.0f);

  SceneSpec sp;
  sp.cloud_fraction = 0.3;
  sp.noise_sigma = 0.002;
  sp.gain_sd = 0.1;
  sp.band_gain_sd = 0.05;
  sp.path_sd = 0.002;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = gen_scene(f, o, sp, seed);
    std::size_t cloudy = 0;
    for (float q : s.qa.band(0).values) cloudy += q == static_cast<float>(kQaCloud);
    EXPECT_NEAR(static_cast<double>(cloudy) / 1e4, 0.3, 0.05);
    for (const auto& b : s.scene.bands())
      for (float v : b.values) ASSERT_TRUE(v > 0.0f && v < 1.0f);
  }
  const auto a = gen_scene(f, o, sp, 8), b = gen_scene(f, o, sp, 8);
  EXPECT_EQ(a.scene, b.scene);
  EXPECT_EQ(a.qa, b.qa);

  sp.cloud_fraction = 1.0;
  EXPECT_THROW(gen_scene(f, o, sp, 1), ConfigError);
  sp.cloud_fraction = -0.1;
  EXPECT_THROW(gen_scene(f, o, sp, 1), ConfigError);
}

TEST(GenSonarTrack, NoiseFreeMatchesGrid) {
  const GridGeometry g{0, 0, 30, 60, 60, "t"};
  const LakeSpec l = centred_lake(g, 20, 6.0);
  const auto f = gen_depth_field(std::span<const LakeSpec>(&l, 1), g);
  for (auto kind : {TrackPattern::Kind::Cross, TrackPattern::Kind::Chords}) {
    TrackPattern tp;
    tp.kind = kind;
    const auto pts = gen_sonar_track(f.depth, 500, tp, 0.0, 3);
    ASSERT_GT(pts.size(), 400u);
    for (const auto& p : pts) {
      const auto px = world_to_pixel(g, p.x, p.y);
      ASSERT_TRUE(px);
      ASSERT_EQ(p.depth, static_cast<double>(f.depth.band(0).values[g.index(*px)]));
    }
  }
  Grid land(g);
  land.add_band("depth_m", kDefaultNodata, 0.0f);
  EXPECT_TRUE(gen_sonar_track(land, 1000, TrackPattern{}, 0.1, 1).empty());
}

TEST(Fixture, PinnedDescriptorShape) {
  const auto d = northslope_desk_v1();
  EXPECT_EQ(d.lakes.size(), 17u);
  EXPECT_EQ(d.scene_count(), 208u);
  std::size_t in_year = 0;
  for (const auto& s : d.schedule)
    if (s.year == d.insitu_year) in_year += s.count;
  EXPECT_EQ(in_year, 31u);
  EXPECT_EQ(d.sonar_points, 13735u);
  EXPECT_EQ(descriptor_from_json(descriptor_to_json(d)), d);
  auto j = descriptor_to_json(d);
  j["sonar"]["pattern"] = "spiral";
  EXPECT_THROW(descriptor_from_json(j), ConfigError);
  j.erase("seed");
  EXPECT_THROW(descriptor_from_json(j), ConfigError);
}

TEST(Fixture, SonarAggregatesToSeveralHundredPixels) {
  const auto d = northslope_desk_v1();
  const auto f = generate_fixture(d);
  EXPECT_EQ(f.lakes.lake_count, 17u);
  EXPECT_EQ(f.scenes.size(), 208u);
  for (float q : f.reference_scene().qa.band(0).values) ASSERT_EQ(q, 0.0f);
  const auto px = aggregate_points_to_pixels(f.sonar, d.geometry, f.lakes);
  EXPECT_GE(px.pixels.size(), 300u);
  EXPECT_LE(px.pixels.size(), 3000u);
  for (const auto& p : px.pixels) ASSERT_GT(p.mean_depth, 0.0);
}

TEST(Fixture, WorkerCountDoesNotChangeOutput) {
  auto d = northslope_desk_v1();
  d.schedule = {{2016, 3}, {2017, 4}, {2018, 3}};
  const auto a = generate_fixture(d, 1), b = generate_fixture(d, 4);
  ASSERT_EQ(a.scenes.size(), b.scenes.size());
  for (std::size_t i = 0; i < a.scenes.size(); ++i) {
    EXPECT_EQ(a.scenes[i].id, b.scenes[i].id);
    EXPECT_EQ(a.scenes[i].scene, b.scenes[i].scene);
    EXPECT_EQ(a.scenes[i].qa, b.scenes[i].qa);
  }
  EXPECT_EQ(a.sonar, b.sonar);
}
