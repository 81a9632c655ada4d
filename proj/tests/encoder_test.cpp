// Copyright 2026 The camret Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>
#include <vector>

#include "camret/encoder.hpp"
#include "camret/pca.hpp"
#include "fixture.hpp"
#include "oracles.hpp"
#include "temp_dir.hpp"

namespace camret {
namespace {

using Vec = std::vector<double>;

std::vector<double> RandomUnit(std::mt19937& rng, std::size_t dim) {
  std::normal_distribution<double> n(0, 1);
  std::vector<double> v(dim);
  for (double& x : v) x = n(rng);
  NormalizeInPlace(v);
  return v;
}

// Normalize, center, project, normalize, sum, normalize; spelled out.
std::vector<double> AggregateOracle(const std::vector<Vec>& vectors, const PcaModel& m) {
  std::vector<double> sum(m.output_dim, 0.0);
  for (const auto& v : vectors) {
    double n = 0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n == 0) continue;
    std::vector<double> p(m.output_dim, 0.0);
    for (std::size_t r = 0; r < m.output_dim; ++r)
      for (std::size_t j = 0; j < m.input_dim; ++j) p[r] += m.projection[r * m.input_dim + j] * (v[j] / n - m.mean[j]);
    double pn = 0;
    for (double x : p) pn += x * x;
    pn = std::sqrt(pn);
    if (pn == 0) continue;
    for (std::size_t r = 0; r < p.size(); ++r) sum[r] += p[r] / pn;
  }
  double sn = 0;
  for (double x : sum) sn += x * x;
  sn = std::sqrt(sn);
  for (double& x : sum) x /= sn;
  return sum;
}

void ExpectNear(const Descriptor& d, const std::vector<double>& ref, double tol) {
  ASSERT_EQ(d.dim(), ref.size());
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(d.values[i], ref[i], tol) << "component " << i;
}

// PCA fitted on the fixture's own class vectors.
PcaModel FixtureModel(const testing::Fixture& fx) {
  std::vector<Vec> training;
  std::vector<int> all(fx.manifest.num_classes());
  std::iota(all.begin(), all.end(), 0);
  for (const auto& b : fx.bundles) {
    for (auto& v : PcaTrainingVectors(ComputeClassVectorSet(b, fx.manifest, all))) training.push_back(std::move(v));
  }
  return FitPca(training);
}

// Well-conditioned PCA for oracle comparisons; the planted fixture's own
// class vectors are collinear by design, so its model amplifies rounding.
PcaModel RandomModel(std::size_t dim) {
  std::mt19937 rng(404);
  std::vector<Vec> training;
  for (int i = 0; i < 200; ++i) training.push_back(RandomUnit(rng, dim));
  return FitPca(training);
}

TEST(ChannelSparsityTest, Examples) {
  EXPECT_EQ(ChannelSparsity(Tensor({1, 2, 2}, {1, 0, 2, 0})), Vec{0.5});
  EXPECT_EQ(ChannelSparsity(Tensor({1, 2, 2})), Vec{0.0});
}

TEST(ChannelSparsityTest, MatchesCountingOracle) {
  std::mt19937 rng(3);
  std::uniform_real_distribution<float> u(-1, 1);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor t({4, 5, 5});
    for (float& v : t.data()) v = std::max(0.0f, u(rng));
    const auto q = ChannelSparsity(t);
    for (std::size_t k = 0; k < 4; ++k) {
      int count = 0;
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) count += t.at(k, i, j) != 0.0f;
      EXPECT_EQ(q[k], count / 25.0);
    }
  }
}

TEST(ChannelWeightsTest, Examples) {
  const auto a = ComputeChannelWeights(Vec{0.5, 0.25}).weights;
  EXPECT_NEAR(a[0], 0.4054651081081644, 1e-12);
  EXPECT_NEAR(a[1], 1.0986122886681098, 1e-12);
  for (double w : ComputeChannelWeights(Vec{0.3, 0.3, 0.3, 0.3}).weights) EXPECT_NEAR(w, 1.3862943611198906, 1e-12);
  const auto c = ComputeChannelWeights(Vec{1.0, 0.0}).weights;
  EXPECT_NEAR(c[1], 13.815511557963774, 1e-9);
  EXPECT_THROW(ComputeChannelWeights(Vec{}), ArgumentError);
}

TEST(ClassVectorTest, HandDerivedChain) {
  const Tensor f({2, 2, 2}, {1, 1, 1, 1, 2, 0, 0, 0});
  const Tensor ones({2, 2}, {1, 1, 1, 1});
  const auto v = ClassVector(f, ones, ComputeChannelWeights(ChannelSparsity(f)));
  EXPECT_NEAR(v[0], 0.8925742052568391, 1e-9);
  EXPECT_NEAR(v[1], 3.2188758248682006, 1e-9);
}

TEST(ClassVectorTest, ZeroAndOneHotHeat) {
  std::mt19937 rng(8);
  std::uniform_real_distribution<float> u(0, 1);
  Tensor f({3, 4, 5});
  for (float& v : f.data()) v = u(rng) < 0.5f ? 0.0f : u(rng);
  const auto cw = ComputeChannelWeights(ChannelSparsity(f));
  for (double x : ClassVector(f, Tensor({4, 5}), cw)) EXPECT_EQ(x, 0.0);
  Tensor hot({4, 5});
  hot.at(2, 3) = 1.0f;
  const auto v = ClassVector(f, hot, cw);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(v[k], cw.weights[k] * f.at(k, 2, 3));
  EXPECT_THROW(ClassVector(f, Tensor({5, 4}), cw), ShapeError);
}

TEST(ClassVectorTest, MatchesStepwiseOracle) {
  std::mt19937 rng(17);
  std::uniform_real_distribution<float> u(0, 1);
  std::uniform_int_distribution<std::size_t> d(1, 7);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t k = d(rng), h = d(rng), w = d(rng);
    Tensor f({k, h, w});
    for (float& v : f.data()) v = u(rng) < 0.4f ? 0.0f : 3 * u(rng);
    Tensor heat({h, w});
    for (float& v : heat.data()) v = u(rng);
    const auto got = ClassVector(f, heat, ComputeChannelWeights(ChannelSparsity(f)));
    const auto ref = oracle::StepwiseClassVector(f, Vec(heat.data().begin(), heat.data().end()));
    for (std::size_t i = 0; i < k; ++i) EXPECT_NEAR(got[i], ref[i], 1e-6);
  }
}

TEST(ClassVectorTest, UniformHeatReducesToWeightedSumPool) {
  const auto fx = testing::MakeFixture({});
  for (const auto& b : fx.bundles) {
    const auto& f = b.conv_features;
    const auto cw = ComputeChannelWeights(ChannelSparsity(f));
    Tensor ones({f.dim(1), f.dim(2)});
    std::fill(ones.data().begin(), ones.data().end(), 1.0f);
    EXPECT_EQ(ClassVector(f, ones, cw), ChannelWeightedSumPool(f, cw));
  }
}

TEST(ClassVectorTest, HeatScaleOnlyScalesVector) {
  const auto fx = testing::MakeFixture({});
  const auto& b = fx.bundles[5];
  const auto cw = ComputeChannelWeights(ChannelSparsity(b.conv_features));
  const Tensor heat = ClassHeatmap(b, fx.manifest, 2);
  Tensor scaled = heat;
  for (float& v : scaled.data()) v *= 4.0f;
  const auto a = ClassVector(b.conv_features, heat, cw);
  const auto s = ClassVector(b.conv_features, scaled, cw);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(s[k], 4.0 * a[k], 1e-9 * (1 + std::abs(a[k])));
}

TEST(TopClassesTest, Examples) {
  EXPECT_EQ(TopClasses(std::vector<float>{0.1f, 0.9f, 0.5f}, 2), (std::vector<int>{1, 2}));
  EXPECT_EQ(TopClasses(std::vector<float>{0.3f, 0.3f, 0.3f}, 3), (std::vector<int>{0, 1, 2}));
  EXPECT_THROW(TopClasses(std::vector<float>{0.3f}, 0), ArgumentError);
  EXPECT_THROW(TopClasses(std::vector<float>{0.3f}, 2), ArgumentError);
}

TEST(TopClassesTest, MatchesFullSortOracle) {
  std::mt19937 rng(4);
  std::uniform_int_distribution<int> coarse(0, 5);  // forces ties
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<float> s(30);
    for (float& v : s) v = static_cast<float>(coarse(rng));
    std::vector<int> order(30);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return s[a] > s[b]; });
    order.resize(7);
    EXPECT_EQ(TopClasses(s, 7), order);
  }
}

TEST(ClassAppearanceRankingTest, Examples) {
  const auto one = ClassAppearanceRanking(std::vector<std::vector<float>>{{0.1f, 0.9f, 0.5f}}, 2);
  EXPECT_EQ(one[0], (ClassRatio{1, 1.0}));
  EXPECT_EQ(one[1], (ClassRatio{2, 1.0}));
  EXPECT_EQ(one[2], (ClassRatio{0, 0.0}));
  const auto two = ClassAppearanceRanking(std::vector<std::vector<float>>{{1, 0, 0}, {0, 0, 1}}, 1);
  EXPECT_EQ(two[0], (ClassRatio{0, 0.5}));
  EXPECT_EQ(two[1], (ClassRatio{2, 0.5}));
  EXPECT_THROW(ClassAppearanceRanking(std::vector<std::vector<float>>{}, 1), ArgumentError);
}

TEST(ClassAppearanceRankingTest, MatchesCountingOracle) {
  std::mt19937 rng(55);
  std::uniform_real_distribution<float> u(0, 1);
  std::vector<std::vector<float>> scores(55, std::vector<float>(40));
  for (auto& s : scores)
    for (float& v : s) v = u(rng);
  const auto got = ClassAppearanceRanking(scores, 5);
  std::vector<int> count(40, 0);
  for (const auto& s : scores) {
    std::vector<int> ids(40);
    std::iota(ids.begin(), ids.end(), 0);
    std::sort(ids.begin(), ids.end(), [&](int a, int b) { return s[a] != s[b] ? s[a] > s[b] : a < b; });
    for (int i = 0; i < 5; ++i) ++count[ids[i]];
  }
  std::vector<int> expected(40);
  std::iota(expected.begin(), expected.end(), 0);
  std::sort(expected.begin(), expected.end(), [&](int a, int b) { return count[a] != count[b] ? count[a] > count[b] : a < b; });
  ASSERT_EQ(got.size(), 40u);
  for (std::size_t i = 0; i < 40; ++i) {
    EXPECT_EQ(got[i].class_id, expected[i]);
    EXPECT_DOUBLE_EQ(got[i].ratio, count[expected[i]] / 55.0);
  }
}

TEST(CropFeaturesTest, Examples) {
  Tensor f({2, 4, 5});
  std::iota(f.data().begin(), f.data().end(), 0.0f);
  EXPECT_EQ(CropFeatures(f, Roi{0, 0, 80, 64}, 16, 80, 64), f);
  const Tensor one = CropFeatures(f, Roi{0, 0, 16, 16}, 16, 80, 64);
  EXPECT_EQ(one, Tensor({2, 1, 1}, {0, 20}));
  EXPECT_EQ(RoiToCells(Roi{8, 8, 40, 24}, 16, 80, 64, 4, 5), (RegionBox{0, 0, 1, 2}));
  EXPECT_THROW(CropFeatures(f, Roi{40, 0, 8, 16}, 16, 80, 64), RoiError);
  EXPECT_THROW(CropFeatures(f, Roi{0, 0, 96, 16}, 16, 80, 64), RoiError);
  EXPECT_THROW(CropFeatures(f, Roi{-1, 0, 16, 16}, 16, 80, 64), RoiError);
}

TEST(PcaTest, SymmetricPairHasZeroMean) {
  const std::vector<Vec> t = {{0.6, 0.8}, {-0.6, -0.8}};
  const auto m = FitPca(t);
  for (double x : m.mean) EXPECT_EQ(x, 0.0);
  EXPECT_THROW(FitPca(std::vector<Vec>{{1.0, 0.0}}), InsufficientData);
  EXPECT_THROW(FitPca(std::vector<Vec>{{1.0, 0.0}, {2.0, 0.0}}), ArgumentError);
}

TEST(PcaTest, WhitensItsTrainingSet) {
  std::mt19937 rng(12);
  std::vector<Vec> t;
  for (int i = 0; i < 300; ++i) t.push_back(RandomUnit(rng, 8));
  const auto m = FitPca(t);
  for (std::size_t r = 0; r < m.output_dim; ++r) {
    if (m.eigenvalues[r] <= 1e-6) continue;
    double s = 0, s2 = 0;
    for (const auto& v : t) {
      const double y = ProjectRaw(m, v)[r];
      s += y;
      s2 += y * y;
    }
    const double n = static_cast<double>(t.size());
    EXPECT_NEAR(s2 / n - (s / n) * (s / n), 1.0, 1e-3);
  }
}

TEST(PcaTest, MatchesJacobiEigendecomposition) {
  std::mt19937 rng(10);
  const std::size_t k = 6;
  std::vector<Vec> t;
  for (int i = 0; i < 10; ++i) t.push_back(RandomUnit(rng, k));
  const auto m = FitPca(t);

  std::vector<double> mean(k, 0.0), cov(k * k, 0.0);
  for (const auto& v : t)
    for (std::size_t j = 0; j < k; ++j) mean[j] += v[j] / 10.0;
  for (const auto& v : t)
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) cov[a * k + b] += (v[a] - mean[a]) * (v[b] - mean[b]) / 10.0;
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;
  oracle::JacobiEigen(cov, k, values, vectors);

  for (std::size_t r = 0; r < k; ++r) EXPECT_NEAR(m.eigenvalues[r], values[r], 1e-6);
  for (std::size_t a = 0; a < k; ++a) {
    if (values[a] <= 1e-6) continue;
    for (std::size_t b = 0; b < k; ++b) {
      if (values[b] <= 1e-6) continue;
      double s = 0;
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) s += m.projection[a * k + i] * cov[i * k + j] * m.projection[b * k + j];
      EXPECT_NEAR(s, a == b ? 1.0 : 0.0, 1e-3) << a << "," << b;
    }
    // Same axis up to sign.
    double dot = 0, norm = 0;
    for (std::size_t i = 0; i < k; ++i) {
      dot += m.projection[a * k + i] * vectors[a][i];
      norm += m.projection[a * k + i] * m.projection[a * k + i];
    }
    EXPECT_NEAR(std::abs(dot) / std::sqrt(norm), 1.0, 1e-5);
  }
}

TEST(PcaTest, ApplyPcaEdgeCases) {
  std::mt19937 rng(1);
  std::vector<Vec> t;
  for (int i = 0; i < 20; ++i) t.push_back(RandomUnit(rng, 5));
  const auto m = FitPca(t);
  const Descriptor at_mean = ApplyPca(m, m.mean);
  EXPECT_TRUE(at_mean.degenerate);
  for (float x : at_mean.values) EXPECT_EQ(x, 0.0f);

  const Vec v = RandomUnit(rng, 5);
  const Descriptor id = ApplyPca(PcaModel::Identity(5), v);
  EXPECT_FALSE(id.degenerate);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(id.values[i], static_cast<float>(v[i]));

  ExpectNear(ApplyPca(m, v), AggregateOracle({v}, m), 1e-6);
  EXPECT_THROW(ApplyPca(m, Vec{1.0, 0.0}), ShapeError);
}

TEST(PcaTest, SaveLoadRoundTrip) {
  std::mt19937 rng(6);
  std::vector<Vec> t;
  for (int i = 0; i < 12; ++i) t.push_back(RandomUnit(rng, 4));
  auto m = FitPca(t, {.epsilon = kWhiteningEpsilon, .components = 3, .dataset = "paris"});
  testing::TempDir dir;
  SavePcaModel(m, dir.path() / "pca");
  const auto back = LoadPcaModel(dir.path() / "pca");
  EXPECT_EQ(back.input_dim, 4u);
  EXPECT_EQ(back.output_dim, 3u);
  EXPECT_EQ(back.mean, m.mean);
  EXPECT_EQ(back.projection, m.projection);
  EXPECT_EQ(back.eigenvalues, m.eigenvalues);
  EXPECT_EQ(back.epsilon, m.epsilon);
  EXPECT_EQ(back.dataset, "paris");
  EXPECT_EQ(back.training_samples, 12u);
}

TEST(AggregateTest, SingletonDuplicateAndOracle) {
  std::mt19937 rng(31);
  std::vector<Vec> t;
  for (int i = 0; i < 40; ++i) t.push_back(RandomUnit(rng, 6));
  const auto m = FitPca(t);
  Vec u = RandomUnit(rng, 6);
  for (double& x : u) x *= 3.0;
  Vec unit = u;
  NormalizeInPlace(unit);
  EXPECT_EQ(Aggregate(std::vector<Vec>{u}, m), ApplyPca(m, unit));
  const Descriptor one = Aggregate(std::vector<Vec>{u}, m), two = Aggregate(std::vector<Vec>{u, u}, m);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_NEAR(one.values[i], two.values[i], 1e-7);

  std::vector<Vec> four;
  for (int i = 0; i < 4; ++i) four.push_back(RandomUnit(rng, 6));
  ExpectNear(Aggregate(four, m), AggregateOracle(four, m), 1e-6);

  // Order of the class vectors does not matter.
  std::vector<Vec> reversed(four.rbegin(), four.rend());
  ExpectNear(Aggregate(reversed, m), AggregateOracle(four, m), 1e-6);
}

TEST(AggregateTest, DegenerateAndErrors) {
  const auto m = PcaModel::Identity(3);
  const Descriptor d = Aggregate(std::vector<Vec>{{0, 0, 0}, {0, 0, 0}}, m);
  EXPECT_TRUE(d.degenerate);
  EXPECT_EQ(d.values, (std::vector<float>{0, 0, 0}));
  EXPECT_THROW(Aggregate(std::vector<Vec>{}, m), ArgumentError);
  // Opposite vectors cancel exactly.
  EXPECT_TRUE(Aggregate(std::vector<Vec>{{1, 0, 0}, {-1, 0, 0}}, m).degenerate);
}

TEST(EncoderTest, OfaSingleClassEqualsApplyPca) {
  const auto fx = testing::MakeFixture({});
  const auto m = FixtureModel(fx);
  const auto& b = fx.bundles[7];
  const int top = TopClasses(b, 1)[0];
  const auto set = ComputeClassVectorSet(b, fx.manifest, std::vector<int>{top});
  const auto row = set.vectors.slab(0);
  Vec v(row.begin(), row.end());
  NormalizeInPlace(v);
  EXPECT_EQ(EncodeOfa(b, fx.manifest, 1, m), ApplyPca(m, v));
}

TEST(EncoderTest, IdenticalTensorsGiveIdenticalDescriptors) {
  const auto fx = testing::MakeFixture({});
  const auto m = FixtureModel(fx);
  FeatureBundle copy = fx.bundles[2];
  copy.image_id = "other";
  EXPECT_EQ(EncodeOfa(fx.bundles[2], fx.manifest, 3, m), EncodeOfa(copy, fx.manifest, 3, m));
}

TEST(EncoderTest, OfaMatchesComposedOracle) {
  const auto fx = testing::MakeFixture({});
  const auto m = RandomModel(16);
  for (const auto& b : fx.bundles) {
    std::vector<Vec> vectors;
    for (int c : TopClasses(b, 3)) {
      // CAM by triple loop, min-max by hand, then the library resize.
      const auto raw = oracle::TripleLoopCam(b.cam_features, fx.manifest.classifier_weights, c);
      const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
      Tensor cam({b.cam_features.dim(1), b.cam_features.dim(2)});
      for (std::size_t i = 0; i < raw.size(); ++i)
        cam[i] = *hi > *lo ? static_cast<float>((raw[i] - *lo) / (*hi - *lo)) : 0.0f;
      const Tensor heat = ResizeMap(cam, b.conv_features.dim(1), b.conv_features.dim(2));
      auto f = oracle::StepwiseClassVector(b.conv_features, Vec(heat.data().begin(), heat.data().end()));
      for (double& x : f) x = static_cast<float>(x);  // stored at f32
      vectors.push_back(f);
    }
    ExpectNear(EncodeOfa(b, fx.manifest, 3, m), AggregateOracle(vectors, m), 1e-5);
  }
}

TEST(EncoderTest, WithClassesConsistency) {
  const auto fx = testing::MakeFixture({});
  const auto m = RandomModel(16);
  const auto& b = fx.bundles[11];
  EXPECT_EQ(EncodeWithClasses(b, fx.manifest, TopClasses(b, 4), m), EncodeOfa(b, fx.manifest, 4, m));
  EXPECT_THROW(EncodeWithClasses(b, fx.manifest, std::vector<int>{}, m), ArgumentError);
  EXPECT_THROW(EncodeWithClasses(b, fx.manifest, std::vector<int>{8}, m), IndexError);
  EXPECT_THROW(EncodeWithClasses(b, fx.manifest, std::vector<int>{-1}, m), IndexError);

  const std::vector<int> fixed = {6, 1};
  std::vector<Vec> vectors;
  for (int c : fixed) {
    const Tensor heat = ClassHeatmap(b, fx.manifest, c);
    auto f = oracle::StepwiseClassVector(b.conv_features, Vec(heat.data().begin(), heat.data().end()));
    for (double& x : f) x = static_cast<float>(x);
    vectors.push_back(f);
  }
  ExpectNear(EncodeWithClasses(b, fx.manifest, fixed, m), AggregateOracle(vectors, m), 1e-5);
}

TEST(ClassVectorSetTest, RowsMatchOracleAndSingletons) {
  const auto fx = testing::MakeFixture({});
  const auto m = FixtureModel(fx);
  const auto& b = fx.bundles[14];
  std::vector<int> all(fx.manifest.num_classes());
  std::iota(all.begin(), all.end(), 0);
  const auto set = ComputeClassVectorSet(b, fx.manifest, all);
  for (int c : all) {
    const Tensor heat = ClassHeatmap(b, fx.manifest, c);
    const auto ref = oracle::StepwiseClassVector(b.conv_features, Vec(heat.data().begin(), heat.data().end()));
    const auto row = set.vectors.slab(static_cast<std::size_t>(c));
    for (std::size_t k = 0; k < ref.size(); ++k) EXPECT_NEAR(row[k], ref[k], 1e-6 * (1 + std::abs(ref[k])));
    EXPECT_EQ(AggregateRows(set, std::vector<int>{c}, m), EncodeWithClasses(b, fx.manifest, std::vector<int>{c}, m));
  }
  EXPECT_THROW(ComputeClassVectorSet(b, fx.manifest, std::vector<int>{1, 2, 1}), DuplicateClassError);
}

TEST(ClassVectorSetTest, PlantedGroupsAreCollinear) {
  const auto fx = testing::MakeFixture({});
  const std::vector<int> classes = {0, 3, 5};
  for (std::size_t i = 0; i < fx.bundles.size(); ++i) {
    const auto set = ComputeClassVectorSet(fx.bundles[i], fx.manifest, classes);
    const auto base = set.vectors.slab(0);
    for (std::size_t r = 1; r < classes.size(); ++r) {
      const auto row = set.vectors.slab(r);
      const double cos = Dot(base, row) / (L2Norm<float>(base) * L2Norm<float>(row));
      EXPECT_NEAR(cos, 1.0, 1e-6);
    }
  }
}

}  // namespace
}  // namespace camret
