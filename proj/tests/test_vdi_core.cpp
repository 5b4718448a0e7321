/* Copyright 2026 The distributed-vdi Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "vdi/scenes.hpp"
#include "vdi/vdi_core.hpp"

namespace vdi {
namespace {

Sample make_sample(double front, double back, Rgba v, bool contiguous = true) {
  Sample s;
  s.t_front = front;
  s.t_back = back;
  s.value = s.probe = v;
  s.contiguous = contiguous;
  return s;
}

// Axis-aligned probe ray through a unit-depth volume (8 voxels of 0.125 along z).
struct AxisSetup {
  ScalarVolume vol = scenes::tabulate({8, 8, 8}, [](Vec3) { return 0.7; });
  TransferFunction tf = scenes::default_transfer_function();
  Camera cam = Camera::look_at({0, 0, -2}, {0, 0, 0}, {0, 1, 0}, 30, 5, 5, 0.1, 10);
  Ray ray = ray_for_pixel(cam, 2, 2);
};

TEST(SampleRay, NoIntervalsNoSamples) {
  AxisSetup s;
  EXPECT_TRUE(sample_ray(s.vol, s.tf, s.cam, s.ray, 0.1, {}).empty());
}

TEST(SampleRay, TenStepsGiveTenIncreasingSamples) {
  AxisSetup s;
  const auto range = volume_range(s.ray, s.vol.grid(), s.cam);
  ASSERT_TRUE(range);
  ASSERT_NEAR(range->exit - range->enter, 1.0, 1e-12);
  const Interval iv[] = {*range};
  const auto samples = sample_ray(s.vol, s.tf, s.cam, s.ray, 0.1, iv);
  ASSERT_EQ(samples.size(), 10u);
  for (std::size_t i = 1; i < samples.size(); ++i) {
    EXPECT_LT(samples[i - 1].t_front, samples[i].t_front);
    EXPECT_EQ(samples[i - 1].t_back, samples[i].t_front);
    EXPECT_TRUE(samples[i].contiguous);
  }
}

TEST(SampleRay, SamplesNeverFallInGaps) {
  AxisSetup s;
  const auto range = *volume_range(s.ray, s.vol.grid(), s.cam);
  const Interval iv[] = {{range.enter, range.enter + 0.3}, {range.enter + 0.55, range.exit}};
  const auto samples = sample_ray(s.vol, s.tf, s.cam, s.ray, 0.05, iv);
  ASSERT_FALSE(samples.empty());
  int breaks = 0;
  for (const auto& smp : samples) {
    const double mid = 0.5 * (smp.t_front + smp.t_back);
    EXPECT_FALSE(mid > iv[0].exit && mid < iv[1].enter);
    EXPECT_TRUE((smp.t_front >= iv[0].enter && smp.t_back <= iv[0].exit) ||
                (smp.t_front >= iv[1].enter && smp.t_back <= iv[1].exit));
    breaks += smp.hard_break;
  }
  EXPECT_EQ(breaks, 1);
}

TEST(ShouldSplit, CriterionExamples) {
  const Rgba seg{0.1, 0.2, 0.3, 0.5};
  EXPECT_FALSE(should_split(0.0, seg, seg));
  EXPECT_FALSE(should_split(0.7, seg, seg));
  const Rgba far{0.1, 0.2, 0.3, 0.8};  // distance 0.3
  EXPECT_FALSE(should_split(0.5, seg, far));
  EXPECT_TRUE(should_split(0.1, seg, far));
}

TEST(BuildList, TransparentSamplesOpenNothing) {
  std::vector<Sample> samples;
  for (int i = 0; i < 5; ++i) samples.push_back(make_sample(i, i + 1, {}, i > 0));
  const auto b = build_list(samples, 0.0, 4);
  EXPECT_TRUE(b.list.empty());
  EXPECT_EQ(b.raw_count, 0u);
}

TEST(BuildList, HomogeneousOpaqueSamplesMergeIntoOne) {
  const Rgba v{0.3, 0.2, 0.1, 1.0};
  std::vector<Sample> samples;
  for (int i = 0; i < 6; ++i) samples.push_back(make_sample(0.5 * i, 0.5 * (i + 1), v, i > 0));
  const auto b = build_list(samples, 0.5, 4);
  ASSERT_EQ(b.list.size(), 1u);
  EXPECT_EQ(b.list[0].t_front, 0.0f);
  EXPECT_EQ(b.list[0].t_back, 3.0f);
  Rgba acc;
  for (const auto& s : samples) acc = over(acc, s.value);
  EXPECT_FLOAT_EQ(b.list[0].a, float(acc.a));
  EXPECT_FLOAT_EQ(b.list[0].r, float(acc.r));
}

TEST(BuildList, AlternatingColorsSplitEverySample) {
  // premultiplied distance between the two values is 0.4
  const Rgba p{0.4, 0, 0, 0.5}, q{0, 0, 0, 0.5};
  std::vector<Sample> samples;
  for (int i = 0; i < 4; ++i) samples.push_back(make_sample(i, i + 1, i % 2 ? q : p, i > 0));
  ASSERT_NEAR(distance(p, q), 0.4, 1e-15);
  const auto b = build_list(samples, 0.1, 8);
  EXPECT_EQ(b.raw_count, 4u);
  EXPECT_EQ(b.list.size(), 4u);
}

TEST(BuildList, OverflowMergesIntoLastSupersegment) {
  const Rgba p{0.4, 0, 0, 0.5}, q{0, 0, 0, 0.5};
  std::vector<Sample> samples;
  for (int i = 0; i < 6; ++i) samples.push_back(make_sample(i, i + 1, i % 2 ? q : p, i > 0));
  const auto b = build_list(samples, 0.1, 2);
  EXPECT_EQ(b.raw_count, 6u);
  ASSERT_EQ(b.list.size(), 2u);
  EXPECT_EQ(b.list[1].t_front, 1.0f);
  EXPECT_EQ(b.list[1].t_back, 6.0f);
  Rgba all, listed;
  for (const auto& s : samples) all = over(all, s.value);
  for (const auto& s : b.list) listed = over(listed, s.rgba());
  EXPECT_NEAR(all.a, listed.a, 1e-6);
  EXPECT_NEAR(all.r, listed.r, 1e-6);
}

TEST(BuildList, HardBreakIsNeverMergedAcross) {
  const Rgba v{0.2, 0.2, 0.2, 0.4};
  std::vector<Sample> samples{make_sample(0, 1, v, false), make_sample(3, 4, v, false), make_sample(6, 7, v, false)};
  samples[1].hard_break = samples[2].hard_break = true;
  const auto b = build_list(samples, 2.0, 1);
  ASSERT_EQ(b.list.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(b.list[i].t_front, samples[i].t_front);
}

TEST(BuildList, SoftGapClosesSupersegmentWithinBudget) {
  const Rgba v{0.2, 0.2, 0.2, 0.4};
  std::vector<Sample> samples{make_sample(0, 1, v, false), make_sample(1, 2, v), make_sample(3, 4, v, false)};
  const auto b = build_list(samples, 2.0, 4);
  ASSERT_EQ(b.list.size(), 2u);
  EXPECT_EQ(b.list[0].t_back, 2.0f);
  EXPECT_EQ(b.list[1].t_front, 3.0f);
}

TEST(GammaSearch, FeasibleAtZeroReturnsZero) {
  const Rgba v{0.2, 0.2, 0.2, 0.4};
  std::vector<Sample> samples{make_sample(0, 1, v, false), make_sample(1, 2, {0.1, 0, 0, 0.3})};
  EXPECT_EQ(gamma_search(samples, 2), 0.0);
  EXPECT_EQ(gamma_search({}, 1), 0.0);
  EXPECT_THROW(gamma_search(samples, 2, 0), InvalidArgument);
}

TEST(GammaSearch, FindsKnownStepFunctionThreshold) {
  // Consecutive alpha jumps of 0.1, 0.35, 0.6 and 0.85: count(gamma) = 1 + #{jumps > gamma}.
  const double alphas[] = {0.0, 0.1, 0.45, 1.05, 1.9};
  std::vector<Sample> samples;
  for (int i = 0; i < 5; ++i) samples.push_back(make_sample(i, i + 1, {0, 0, 0, alphas[i] / 2 + 0.02}, i > 0));
  for (std::size_t n_sup = 1; n_sup <= 5; ++n_sup) {
    const double scanned = oracle::gamma_scan([&](double g) { return count_supersegments(samples, g); }, n_sup);
    const double found = gamma_search(samples, n_sup);
    EXPECT_NEAR(found, scanned, 1e-3 + kGammaMax / 65536) << "n_sup=" << n_sup;
    EXPECT_LE(count_supersegments(samples, found), n_sup);
  }
  const double found3 = gamma_search(samples, 3);
  EXPECT_NEAR(found3, 0.35 / 2, kGammaMax / 65536);
}

std::vector<std::vector<Sample>> random_rays(int n, std::uint64_t seed) {
  const auto vol = scenes::random_blobs({32, 32, 32}, seed);
  const auto tf = scenes::default_transfer_function();
  const auto cam = scenes::default_camera(40, 40);
  std::mt19937 rng(seed);
  std::vector<std::vector<Sample>> rays;
  while (static_cast<int>(rays.size()) < n) {
    const Ray ray = ray_for_pixel(cam, rng() % cam.width, rng() % cam.height);
    const auto range = volume_range(ray, vol.grid(), cam);
    if (!range) continue;
    const Interval iv[] = {*range};
    auto s = sample_ray(vol, tf, cam, ray, 1.0 / 64, iv);
    if (count_supersegments(s, 0.0) > 2) rays.push_back(std::move(s));
  }
  return rays;
}

TEST(GammaSearch, CountIsMonotoneInGamma) {
  for (const auto& samples : random_rays(100, 42)) {
    std::size_t prev = count_supersegments(samples, 0.0);
    for (double g = 1e-3; g <= 2.0; g += 1e-3) {
      const std::size_t c = count_supersegments(samples, g);
      ASSERT_LE(c, prev);
      prev = c;
    }
  }
}

TEST(GammaSearch, AgreesWithBruteForceScan) {
  for (const auto& samples : random_rays(100, 7)) {
    for (std::size_t n_sup : {2u, 4u}) {
      const auto count = [&](double g) { return count_supersegments(samples, g); };
      const double scanned = oracle::gamma_scan(count, n_sup);
      EXPECT_NEAR(gamma_search(samples, n_sup), scanned, 1e-3 + kGammaMax / 65536);
    }
  }
}

TEST(BuildList, ExactForAnyGamma) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> g(0, 2);
  for (const auto& samples : random_rays(60, 3)) {
    Rgba truth;
    for (const auto& s : samples) truth = over(truth, s.value);
    for (int rep = 0; rep < 4; ++rep) {
      const auto b = build_list(samples, g(rng), 1 + rng() % 6);
      Rgba got;
      for (const auto& s : b.list) got = over(got, s.rgba());
      EXPECT_NEAR(got.r, truth.r, 1e-5);
      EXPECT_NEAR(got.g, truth.g, 1e-5);
      EXPECT_NEAR(got.b, truth.b, 1e-5);
      EXPECT_NEAR(got.a, truth.a, 1e-5);
      for (std::size_t i = 0; i < b.list.size(); ++i) {
        EXPECT_LT(b.list[i].t_front, b.list[i].t_back);
        if (i > 0) { EXPECT_LE(b.list[i - 1].t_back, b.list[i].t_front); }
      }
    }
  }
}

TEST(ExclusivePrefixSum, Examples) {
  EXPECT_TRUE(exclusive_prefix_sum({}).empty());
  const std::uint32_t one[] = {5};
  EXPECT_EQ(exclusive_prefix_sum(one), (std::vector<std::uint64_t>{0}));
  const std::vector<std::uint32_t> counts{3, 2, 0, 3, 1, 2};
  EXPECT_EQ(exclusive_prefix_sum(counts), (std::vector<std::uint64_t>{0, 3, 5, 5, 8, 9}));
}

TEST(ExclusivePrefixSum, MatchesRunningSumOracle) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::uint32_t> counts(rng() % 200);
    for (auto& c : counts) c = rng() % 20;
    EXPECT_EQ(exclusive_prefix_sum(counts), oracle::running_offsets(counts));
  }
}

TEST(Dense, SixListPackingExample) {
  // six lists with counts 3,2,0,3,1,2 in an n_sup = 3 layout: 11 of 18 slots used
  VdiFull full(3, 2, 3);
  const std::uint32_t counts[] = {3, 2, 0, 3, 1, 2};
  for (std::size_t i = 0; i < 6; ++i)
    for (std::uint32_t j = 0; j < counts[i]; ++j)
      full.slots(i)[j] = Supersegment{float(j + 1), float(j + 1.5), 0.1f, 0.1f, 0.1f, 0.2f};
  const auto dense = densify(full);
  EXPECT_EQ(dense.offsets, (std::vector<std::uint64_t>{0, 3, 5, 5, 8, 9}));
  EXPECT_EQ(dense.payload.size(), 11u);
  EXPECT_EQ(full.grid.size(), 18u);
  EXPECT_EQ(inflate(dense), full);
}

TEST(Dense, ZeroFullHasEmptyPayload) {
  const VdiFull full(4, 4, 5);
  EXPECT_TRUE(densify(full).payload.empty());
}

TEST(Dense, CountsBeyondCapacityAreCorruption) {
  VdiDense d{1, 1, 2, {3}, {0}, std::vector<Supersegment>(3, Supersegment{1, 2, 0, 0, 0, 0.1f})};
  EXPECT_THROW(inflate(d), CorruptVdiError);
}

// Property: inflate(densify(V)) == V for random valid full VDIs.
TEST(Dense, RoundTripLaw) {
  std::mt19937 rng(77);
  std::uniform_real_distribution<float> u(0, 1);
  for (int trial = 0; trial < 30; ++trial) {
    VdiFull full(1 + rng() % 9, 1 + rng() % 9, 1 + rng() % 6);
    for (std::size_t i = 0; i < full.list_count(); ++i) {
      const std::uint32_t n = rng() % (full.n_sup + 1);
      float t = 0.5f;
      for (std::uint32_t j = 0; j < n; ++j) {
        const float a = u(rng);
        full.slots(i)[j] = {t, t + 0.25f, a * u(rng), a * u(rng), a * u(rng), a};
        t += 0.5f;
      }
    }
    EXPECT_EQ(inflate(densify(full)), full);
  }
}

TEST(Generate, EmptyVolumeGivesZeroVdi) {
  const auto vol = scenes::tabulate({16, 16, 16}, [](Vec3) { return 0.0; });
  const auto [full, meta] = generate_full(vol, scenes::default_transfer_function(), scenes::default_camera(16, 16), 4, 1.0 / 32);
  EXPECT_EQ(full, VdiFull(16, 16, 4));
  const auto [dense, dmeta] = generate_dense(vol, scenes::default_transfer_function(), scenes::default_camera(16, 16), 4, 1.0 / 32);
  EXPECT_TRUE(dense.payload.empty());
  EXPECT_NE(meta.tf_digest, 0u);
  EXPECT_NE(meta.volume_digest, 0u);
}

TEST(Generate, LargeBudgetUsesGammaZeroAndReproducesDvr) {
  const auto vol = scenes::random_blobs({24, 24, 24}, 5);
  const auto tf = scenes::default_transfer_function();
  const auto cam = scenes::default_camera(24, 24);
  const double step = 1.0 / 24;
  const auto [full, meta] = generate_full(vol, tf, cam, 64, step);
  const Image dvr = render_dvr(vol, tf, cam, step, 1.0);
  for (std::size_t i = 0; i < full.list_count(); ++i) {
    Rgba acc;
    for (const auto& s : full.list(i)) acc = over(acc, s.rgba());
    for (int c = 0; c < 4; ++c) EXPECT_NEAR((&acc.r)[c], dvr.pixels[i][c], 1e-5);
  }
  GenerationSetup setup{vol, tf, cam, 64, step, std::nullopt};
  for (std::size_t i = 0; i < full.list_count(); i += 37) EXPECT_EQ(gamma_search(setup.samples_for(i), 64), 0.0);
}

TEST(Generate, TwoShellListsRespectBudget) {
  const auto vol = scenes::two_shells({64, 64, 64});
  const auto cam = scenes::default_camera(32, 32);
  const auto [full, meta] = generate_full(vol, scenes::default_transfer_function(), cam, 4, 1.0 / 64);
  std::size_t through_both = 0;
  for (std::size_t i = 0; i < full.list_count(); ++i) {
    const auto list = full.list(i);
    EXPECT_LE(list.size(), 4u);
    for (std::size_t j = 1; j < list.size(); ++j) EXPECT_LE(list[j - 1].t_back, list[j].t_front);
    // rays whose closest approach to the center is inside the inner shell radius cross both shells
    const Ray ray = ray_for_pixel(cam, i % cam.width, i / cam.width);
    const Vec3 closest = ray.at(-dot(ray.origin, ray.direction));
    if (length(closest) < 0.15) {
      ++through_both;
      EXPECT_GE(list.size(), 2u) << "list " << i;
    }
  }
  EXPECT_GT(through_both, 10u);
}

TEST(Generate, DenseInflatesToFullBitExactly) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto vol = scenes::random_blobs({24, 24, 24}, seed);
    const auto tf = scenes::default_transfer_function();
    const auto cam = scenes::default_camera(20, 20);
    const auto full = generate_full(vol, tf, cam, 3, 1.0 / 40).first;
    const auto dense = generate_dense(vol, tf, cam, 3, 1.0 / 40).first;
    EXPECT_EQ(inflate(dense), full);
    EXPECT_EQ(densify(full), dense);
  }
}

TEST(Generate, DenseIsSmallerWhenVolumeFillsHalfTheFrustum) {
  const auto vol = scenes::two_shells({32, 32, 32});
  // the unit volume spans roughly half of the viewport width at this distance
  const auto cam = Camera::look_at({0, 0, -2.6}, {0, 0, 0}, {0, 1, 0}, 30, 32, 32, 0.1, 10);
  const auto full = generate_full(vol, scenes::default_transfer_function(), cam, 8, 1.0 / 32).first;
  const auto dense = densify(full);
  const double ratio = double(dense.byte_size()) / double(full.byte_size());
  EXPECT_LT(ratio, 0.6);
}

TEST(Generate, RejectsBadBudgetAndStep) {
  const auto vol = scenes::two_shells({8, 8, 8});
  EXPECT_THROW(generate_full(vol, scenes::default_transfer_function(), scenes::default_camera(4, 4), 0, 0.1), InvalidArgument);
  EXPECT_THROW(generate_dense(vol, scenes::default_transfer_function(), scenes::default_camera(4, 4), 2, -1), InvalidArgument);
}

}  // namespace
}  // namespace vdi
