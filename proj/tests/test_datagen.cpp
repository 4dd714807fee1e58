#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "pointcache/datagen.hpp"
#include "pointcache/pipeline.hpp"
#include "support.hpp"

using namespace pointcache;
using namespace testing_support;

namespace {

void expect_clouds_near(const PointCloud& a, const PointCloud& b, double tol) {
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(a.points[i][k], b.points[i][k], tol);
}

}  // namespace

TEST(GenStream, NoiselessMatchesPrototypes) {
  ShiftSpec spec;
  spec.noise = 0;
  spec.shift = 0;
  spec.patch_noise = 0;
  spec.classes = 6;
  spec.samples_per_class = 4;
  const SyntheticData d = gen_stream(spec);
  ASSERT_EQ(d.samples.size(), 24u);
  for (const auto& s : d.samples) {
    const auto row = d.bank.embeddings().row(*s.true_label);
    for (std::size_t j = 0; j < spec.dim; ++j) EXPECT_NEAR(s.global_feature[j], row[j], 1e-12);
    EXPECT_EQ(zero_shot_logits(s.global_feature, d.bank).label, *s.true_label);
  }
}

TEST(GenStream, ShiftDegradesZeroShot) {
  ShiftSpec spec;
  spec.noise = 0;
  spec.shift = 3.0;
  const SyntheticData d = gen_stream(spec);
  EngineConfig cfg;
  cfg.mode = Mode::ZeroShot;
  const auto acc = run_stream(d.samples, cfg, d.bank).summary().accuracy();
  EXPECT_LT(*acc, 1.0);
}

TEST(GenStream, DeterministicAndUnitNorm) {
  ShiftSpec spec;
  spec.seed = 13;
  const SyntheticData a = gen_stream(spec), b = gen_stream(spec);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.bank.embeddings(), b.bank.embeddings());
  for (std::size_t c = 0; c < a.bank.classes(); ++c)
    EXPECT_NEAR(l2_norm(a.bank.embeddings().row(c)), 1.0, 1e-5);
  for (const auto& s : a.samples) {
    EXPECT_NEAR(l2_norm(s.global_feature), 1.0, 1e-5);
    for (std::size_t p = 0; p < s.patch_features.rows(); ++p)
      EXPECT_NEAR(l2_norm(s.patch_features.row(p)), 1.0, 1e-5);
  }
  spec.seed = 14;
  EXPECT_NE(gen_stream(spec).samples, a.samples);
  // every class appears samples_per_class times
  std::vector<std::size_t> counts(spec.classes, 0);
  for (const auto& s : a.samples) ++counts[*s.true_label];
  for (std::size_t n : counts) EXPECT_EQ(n, spec.samples_per_class);
}

TEST(GenStream, DefaultsLandInTargetAccuracyBand) {
  double total = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    ShiftSpec spec;
    spec.seed = seed;
    const SyntheticData d = gen_stream(spec);
    EngineConfig cfg;
    cfg.mode = Mode::ZeroShot;
    total += *run_stream(d.samples, cfg, d.bank).summary().accuracy();
  }
  EXPECT_GE(total / 5, 0.5);
  EXPECT_LE(total / 5, 0.8);
}

TEST(Corrupt, Names) {
  for (Corruption c : kAllCorruptions) EXPECT_EQ(parse_corruption(to_string(c)), c);
  EXPECT_THROW(parse_corruption("blur"), ParameterError);
  EXPECT_THROW((CorruptionKind{Corruption::Jitter, 0}.validate()), ParameterError);
  EXPECT_THROW((CorruptionKind{Corruption::Jitter, 6}.validate()), ParameterError);
}

TEST(Corrupt, IdentityParameters) {
  Rng rng(1);
  const PointCloud c = normalize_cloud(random_cloud(rng, 100));
  CorruptionMagnitude m;
  m.scale_bound = 1.0;
  expect_clouds_near(corrupt(c, Corruption::Scale, m, 3), c, 1e-12);
  m.max_angle_deg = 0.0;
  expect_clouds_near(corrupt(c, Corruption::Rotate, m, 3), c, 1e-12);
}

TEST(Corrupt, JitterSeeds) {
  Rng rng(2);
  const PointCloud c = random_cloud(rng, 50);
  const CorruptionKind k{Corruption::Jitter, 3};
  EXPECT_EQ(corrupt(c, k, 1), corrupt(c, k, 1));
  EXPECT_NE(corrupt(c, k, 1), corrupt(c, k, 2));
}

TEST(Corrupt, DropAllButOneKeepsNearestToCentroid) {
  Rng rng(3);
  const PointCloud c = random_cloud(rng, 40);
  const PointCloud n = normalize_cloud(c);
  const Point3 centre = centroid(n);
  std::size_t best = 0;
  for (std::size_t i = 1; i < n.size(); ++i)
    if (squared_distance(n.points[i], centre) < squared_distance(n.points[best], centre)) best = i;
  CorruptionMagnitude m;
  m.drop_count = 39;
  const PointCloud out = corrupt(c, Corruption::DropGlobal, m, 0);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out.points[0], n.points[best]);
  m.drop_count = 40;
  EXPECT_THROW(corrupt(c, Corruption::DropGlobal, m, 0), DegenerateInputError);
  EXPECT_THROW(corrupt(c, Corruption::DropLocal, m, 0), DegenerateInputError);
}

TEST(Corrupt, CountsAndIsometry) {
  Rng rng(4);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 20 + rng.index(200);
    const PointCloud c = random_cloud(rng, n);
    const int level = 1 + static_cast<int>(rng.index(5));
    const auto mag = CorruptionMagnitude::from_severity(level, n);
    const std::uint64_t seed = rng.next_u64();
    EXPECT_EQ(corrupt(c, {Corruption::AddGlobal, level}, seed).size(), n + 10 * level);
    EXPECT_EQ(corrupt(c, {Corruption::AddLocal, level}, seed).size(), n + 10 * level);
    EXPECT_EQ(corrupt(c, {Corruption::DropGlobal, level}, seed).size(), n - mag.drop_count);
    EXPECT_EQ(corrupt(c, {Corruption::DropLocal, level}, seed).size(), n - mag.drop_count);

    const PointCloud base = normalize_cloud(c);
    const PointCloud rot = corrupt(c, {Corruption::Rotate, level}, seed);
    for (int s = 0; s < 20; ++s) {
      const std::size_t i = rng.index(n), j = rng.index(n);
      EXPECT_NEAR(std::sqrt(squared_distance(rot.points[i], rot.points[j])),
                  std::sqrt(squared_distance(base.points[i], base.points[j])), 1e-6);
    }
  }
}

TEST(Corrupt, JitterStd) {
  Rng rng(5);
  const PointCloud c = random_cloud(rng, 20000);
  const PointCloud base = normalize_cloud(c);
  for (int level = 1; level <= 5; ++level) {
    const PointCloud j = corrupt(c, {Corruption::Jitter, level}, 77);
    double sum = 0, sq = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < c.size(); ++i)
      for (int a = 0; a < 3; ++a) {
        const double d = j.points[i][a] - base.points[i][a];
        sum += d;
        sq += d * d;
        ++count;
      }
    const double mean = sum / static_cast<double>(count);
    const double sd = std::sqrt(sq / static_cast<double>(count) - mean * mean);
    EXPECT_NEAR(sd, 0.01 * level, 0.05 * 0.01 * level);
  }
}

TEST(Corrupt, SeverityScheduleAndNormalization) {
  const auto m = CorruptionMagnitude::from_severity(3, 1000);
  EXPECT_EQ(m.add_count, 30u);
  EXPECT_EQ(m.drop_count, 150u);
  EXPECT_DOUBLE_EQ(m.max_angle_deg, 18.0);
  EXPECT_DOUBLE_EQ(m.scale_bound, 1.3);
  EXPECT_DOUBLE_EQ(m.jitter_std, 0.03);

  Rng rng(6);
  PointCloud c = random_cloud(rng, 100);
  for (auto& p : c.points)
    for (double& x : p) x = 5 * x + 3;
  const PointCloud n = normalize_cloud(c);
  const Point3 centre = centroid(n);
  double radius = 0;
  for (const auto& p : n.points) radius = std::max(radius, std::sqrt(squared_distance(p, {0, 0, 0})));
  for (double x : centre) EXPECT_NEAR(x, 0.0, 1e-12);
  EXPECT_NEAR(radius, 1.0, 1e-12);
}
