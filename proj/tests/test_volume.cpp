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

#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>

#include "vdi/volume.hpp"

namespace vdi {
namespace {

std::filesystem::path temp_file(const std::string& name, std::size_t bytes, unsigned char fill) {
  auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  std::vector<char> data(bytes, static_cast<char>(fill));
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  return path;
}

TEST(LoadRaw, MaxValueNormalizesToOne) {
  const auto path = temp_file("vdi_all_ff.raw", 8, 0xFF);
  const auto vol = load_raw(path, {2, 2, 2}, VoxelFormat::kUint8);
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 2; ++i) EXPECT_EQ(vol.at(i, j, k), 1.0);
  std::filesystem::remove(path);
}

TEST(LoadRaw, SizeMismatchNamesBothSizes) {
  const auto path = temp_file("vdi_short.raw", 7, 0x10);
  try {
    load_raw(path, {2, 2, 2}, VoxelFormat::kUint8);
    FAIL() << "expected SizeMismatchError";
  } catch (const SizeMismatchError& e) {
    EXPECT_EQ(e.expected_bytes, 8u);
    EXPECT_EQ(e.actual_bytes, 7u);
    EXPECT_NE(std::string(e.what()).find("expected 8"), std::string::npos);
  }
  std::filesystem::remove(path);
}

TEST(LoadRaw, Uint16IsLittleEndian) {
  auto path = std::filesystem::temp_directory_path() / "vdi_u16.raw";
  {
    std::ofstream out(path, std::ios::binary);
    const unsigned char bytes[] = {0xFF, 0xFF, 0x00, 0x80};
    out.write(reinterpret_cast<const char*>(bytes), 4);
  }
  const auto vol = load_raw(path, {2, 1, 1}, VoxelFormat::kUint16);
  EXPECT_EQ(vol.at(0, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(vol.at(1, 0, 0), 32768.0 / 65535.0);
  std::filesystem::remove(path);
}

// Kingsnake-shaped 8-bit volume (1024 x 1024 x 795). The file is sparse on disk.
TEST(LoadRaw, KingsnakeShapedFileLoads) {
  const Int3 dims{1024, 1024, 795};
  auto path = std::filesystem::temp_directory_path() / "vdi_kingsnake_shape.raw";
  { std::ofstream(path, std::ios::binary | std::ios::trunc); }
  std::filesystem::resize_file(path, static_cast<std::uintmax_t>(dims.product()));
  EXPECT_EQ(std::filesystem::file_size(path), 795ull * 1024 * 1024);
  const auto vol = load_raw(path, dims, VoxelFormat::kUint8);
  EXPECT_EQ(vol.dims(), dims);
  EXPECT_EQ(vol.raw().size(), 795ull * 1024 * 1024);
  EXPECT_EQ(vol.at(1023, 1023, 794), 0.0);
  std::filesystem::remove(path);
}

ScalarVolume ramp_x() {
  // voxel values 0, 1/3, 2/3, 1 along x, constant along y and z
  std::vector<float> v;
  for (int k = 0; k < 2; ++k)
    for (int j = 0; j < 2; ++j)
      for (int i = 0; i < 4; ++i) v.push_back(float(i) / 3.0f);
  return ScalarVolume::from_normalized(Grid{{4, 2, 2}, {1, 1, 1}, {0, 0, 0}}, VoxelFormat::kUint8, v);
}

TEST(SampleTrilinear, VoxelCenterReturnsVoxelValue) {
  const auto vol = ramp_x();
  EXPECT_DOUBLE_EQ(sample_trilinear(vol, {2, 1, 0}), vol.at(2, 1, 0));
  EXPECT_DOUBLE_EQ(sample_trilinear(vol, {0, 0, 0}), vol.at(0, 0, 0));
}

TEST(SampleTrilinear, MidpointBetweenZeroAndOne) {
  std::vector<float> v{0, 1, 0, 1};
  const auto vol = ScalarVolume::from_normalized(Grid{{2, 2, 1}, {1, 1, 1}, {0, 0, 0}}, VoxelFormat::kUint8, v);
  EXPECT_DOUBLE_EQ(sample_trilinear(vol, {0.5, 0.3, 0}), 0.5);
}

TEST(SampleTrilinear, OutsideIsZero) {
  const auto vol = ramp_x();
  EXPECT_EQ(sample_trilinear(vol, {100, 0, 0}), 0.0);
  EXPECT_EQ(sample_trilinear(vol, {3.6, 0, 0}), 0.0);
  EXPECT_EQ(sample_trilinear(vol, {-0.6, 0, 0}), 0.0);
  // inside the outer half-voxel shell: edge value
  EXPECT_DOUBLE_EQ(sample_trilinear(vol, {3.4, 0, 0}), 1.0);
}

TEST(TransferFunction, InterpolatesControlPoints) {
  TransferFunction tf({{0, {0, 0, 0}, 0}, {0.5, {1, 0.5, 0}, 0.5}, {1, {1, 1, 1}, 1}});
  const Rgba mid = tf.lookup(0.5);
  EXPECT_NEAR(mid.r, 1.0, 1e-2);
  EXPECT_NEAR(mid.a, 0.5, 1e-2);
  EXPECT_EQ(tf.lookup(0.0).a, 0.0);
  EXPECT_EQ(tf.lookup(1.0).a, 1.0);
  // on a table node the lookup is exact
  EXPECT_DOUBLE_EQ(tf.lookup(51.0 / 255.0).a, 51.0 / 255.0);
}

TEST(TransferFunction, RejectsInvalidControlPoints) {
  EXPECT_THROW(TransferFunction({{0.1, {0, 0, 0}, 0}, {1, {1, 1, 1}, 1}}), InvalidArgument);
  EXPECT_THROW(TransferFunction({{0, {0, 0, 0}, 0}, {0.5, {0, 0, 0}, 0}, {0.5, {0, 0, 0}, 0}, {1, {1, 1, 1}, 1}}),
               InvalidArgument);
  EXPECT_THROW(TransferFunction({{0, {0, 0, 0}, 0}, {1, {1, 1, 1}, 1.5}}), InvalidArgument);
}

TEST(SlabDecomposition, EqualSplit) {
  const auto d = make_slab_decomposition({4, 4, 8}, 2);
  ASSERT_EQ(d.pe_count(), 2u);
  EXPECT_EQ(d.bricks_per_pe[0][0], (Brick{{0, 0, 0}, {4, 4, 4}}));
  EXPECT_EQ(d.bricks_per_pe[1][0], (Brick{{0, 0, 4}, {4, 4, 8}}));
}

TEST(SlabDecomposition, SinglePeIsWholeVolume) {
  const auto d = make_slab_decomposition({3, 5, 7}, 1);
  EXPECT_EQ(d.bricks_per_pe[0][0], (Brick{{0, 0, 0}, {3, 5, 7}}));
}

TEST(SlabDecomposition, BalancedThicknesses) {
  const auto d = make_slab_decomposition({2, 2, 10}, 4);
  std::vector<std::int64_t> thick;
  for (const auto& pe : d.bricks_per_pe) thick.push_back(pe[0].hi.z - pe[0].lo.z);
  EXPECT_EQ(thick, (std::vector<std::int64_t>{3, 3, 2, 2}));
}

TEST(SlabDecomposition, MorePesThanSlicesIsAnError) {
  EXPECT_THROW(make_slab_decomposition({2, 2, 3}, 4), InvalidArgument);
  EXPECT_THROW(make_slab_decomposition({2, 2, 3}, 0), InvalidArgument);
}

TEST(InterleavedDecomposition, RoundRobinSlabs) {
  const auto d = make_interleaved_decomposition({4, 4, 8}, 2, 2);
  EXPECT_EQ(d.bricks_per_pe[0], (std::vector<Brick>{{{0, 0, 0}, {4, 4, 2}}, {{0, 0, 4}, {4, 4, 6}}}));
  EXPECT_EQ(d.bricks_per_pe[1], (std::vector<Brick>{{{0, 0, 2}, {4, 4, 4}}, {{0, 0, 6}, {4, 4, 8}}}));
}

TEST(InterleavedDecomposition, PeriodSpanningVolumeIsAnError) {
  EXPECT_THROW(make_interleaved_decomposition({4, 4, 8}, 2, 8), InvalidArgument);
  EXPECT_THROW(make_interleaved_decomposition({4, 4, 8}, 1, 2), InvalidArgument);
}

TEST(InterleavedDecomposition, AxisRayCrossesPe0BoundaryFourTimes) {
  const Grid g{{4, 4, 8}, {1, 1, 1}, {0, 0, 0}};
  const auto d = make_interleaved_decomposition(g.dims, 2, 2);
  const Ray ray{{1.2, 1.7, -5}, {0, 0, 1}};
  const auto iv = intersect_domain(ray, g, d.bricks_per_pe[0]);
  ASSERT_EQ(iv.size(), 2u);
  // faces at z = -0.5, 1.5 and 3.5, 5.5 seen from z = -5
  EXPECT_DOUBLE_EQ(iv[0].enter, 4.5);
  EXPECT_DOUBLE_EQ(iv[0].exit, 6.5);
  EXPECT_DOUBLE_EQ(iv[1].enter, 8.5);
  EXPECT_DOUBLE_EQ(iv[1].exit, 10.5);
  EXPECT_EQ(2 * iv.size(), 4u);  // boundary crossings
}

TEST(IntersectDomain, MissIsEmpty) {
  const Grid g{{4, 4, 4}, {1, 1, 1}, {0, 0, 0}};
  const Brick whole{{0, 0, 0}, {4, 4, 4}};
  EXPECT_TRUE(intersect_domain(Ray{{10, 10, -5}, {0, 0, 1}}, g, std::span(&whole, 1)).empty());
  EXPECT_TRUE(intersect_domain(Ray{{1, 1, -5}, {0, 0, -1}}, g, std::span(&whole, 1)).empty());
}

TEST(IntersectDomain, AbuttingBricksMerge) {
  const Grid g{{4, 4, 4}, {1, 1, 1}, {0, 0, 0}};
  const std::vector<Brick> bricks{{{0, 0, 2}, {4, 4, 4}}, {{0, 0, 0}, {4, 4, 2}}};
  const auto iv = intersect_domain(Ray{{1, 1, -5}, normalize({0.05, 0.02, 1})}, g, bricks);
  ASSERT_EQ(iv.size(), 1u);
}

TEST(Camera, CenterPixelOfOddViewportLooksForward) {
  auto cam = Camera::look_at({1, 2, 3}, {4, -1, 7}, {0, 1, 0}, 50, 33, 17, 0.1, 10);
  const Ray r = ray_for_pixel(cam, 16, 8);
  EXPECT_NEAR(r.direction.x, cam.forward.x, 1e-12);
  EXPECT_NEAR(r.direction.y, cam.forward.y, 1e-12);
  EXPECT_NEAR(r.direction.z, cam.forward.z, 1e-12);
}

TEST(Camera, CornerPixelHalfAngles) {
  // 90 degree vfov on a 4x4 viewport: corner pixel centers sit at normalized offset
  // 1 - 1/4 = 0.75 on both axes, so each axis subtends atan(0.75) = 36.8699 degrees.
  const Camera cam = Camera::look_at({0, 0, 0}, {0, 0, 1}, {0, 1, 0}, 90, 4, 4, 0.1, 10);
  const double expected = 36.86989764584402;
  for (auto [x, y, sx, sy] : {std::tuple{0u, 0u, -1.0, 1.0}, {3u, 0u, 1.0, 1.0}, {0u, 3u, -1.0, -1.0}, {3u, 3u, 1.0, -1.0}}) {
    const Ray r = ray_for_pixel(cam, x, y);
    const double horiz = std::atan2(dot(r.direction, cam.right()), dot(r.direction, cam.forward)) * 180 / std::numbers::pi;
    const double vert = std::atan2(dot(r.direction, cam.up), dot(r.direction, cam.forward)) * 180 / std::numbers::pi;
    EXPECT_NEAR(horiz, sx * expected, 1e-9);
    EXPECT_NEAR(vert, sy * expected, 1e-9);
  }
}

TEST(Camera, RejectsOutOfRangePixelsAndBadSetup) {
  const Camera cam = Camera::look_at({0, 0, 0}, {0, 0, 1}, {0, 1, 0}, 60, 8, 6, 0.1, 10);
  EXPECT_THROW(ray_for_pixel(cam, 8, 0), InvalidArgument);
  EXPECT_THROW(ray_for_pixel(cam, 0, 6), InvalidArgument);
  Camera bad = cam;
  bad.near = 20;
  EXPECT_THROW(bad.validate(), InvalidArgument);
  bad = cam;
  bad.up = normalize({0, 1, 0.1});
  EXPECT_THROW(bad.validate(), InvalidArgument);
}

TEST(Camera, EveryRayIsUnitLength) {
  const Camera cam = Camera::look_at({0.3, -2, 1}, {0, 0, 0}, {0, 0, 1}, 70, 31, 23, 0.1, 10);
  for (std::uint32_t y = 0; y < cam.height; ++y)
    for (std::uint32_t x = 0; x < cam.width; ++x) EXPECT_NEAR(length(ray_for_pixel(cam, x, y).direction), 1.0, 1e-12);
}

// Property: every voxel belongs to exactly one PE.
TEST(DecompositionProperties, PartitionOnRandomShapes) {
  std::mt19937 rng(17);
  for (int trial = 0; trial < 40; ++trial) {
    const Int3 dims{1 + int(rng() % 5), 1 + int(rng() % 5), 2 + int(rng() % 11)};
    const std::size_t k = 1 + rng() % std::min<std::int64_t>(dims.z, 6);
    std::vector<DomainDecomposition> ds{make_slab_decomposition(dims, k)};
    if (k >= 2) ds.push_back(make_interleaved_decomposition(dims, k, 1 + std::int64_t(rng() % (dims.z - 1))));
    for (const auto& d : ds) {
      EXPECT_NO_THROW(d.validate());
      for (std::int64_t z = 0; z < dims.z; ++z)
        for (std::int64_t y = 0; y < dims.y; ++y)
          for (std::int64_t x = 0; x < dims.x; ++x) {
            int owners = 0;
            for (const auto& pe : d.bricks_per_pe)
              for (const auto& b : pe) owners += b.contains({x, y, z});
            EXPECT_EQ(owners, 1);
          }
    }
  }
}

// Property: per-PE intervals are sorted and disjoint, and together tile the full-volume
// intersection without overlap.
TEST(DecompositionProperties, IntervalsTileTheVolumeIntersection) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  const Grid g{{12, 10, 16}, {0.1, 0.12, 0.07}, {-0.5, -0.6, -0.5}};
  const std::vector<DomainDecomposition> ds{make_slab_decomposition(g.dims, 5),
                                            make_interleaved_decomposition(g.dims, 3, 2)};
  int hits = 0;
  for (int n = 0; n < 10000; ++n) {
    const Vec3 o{u(rng) * 3, u(rng) * 3, u(rng) * 3};
    const Vec3 target{u(rng) * 0.6, u(rng) * 0.6, u(rng) * 0.6};
    const Ray ray{o, normalize(target - o)};
    auto whole = intersect_box(ray, g.lower(), g.upper());
    if (whole && !(whole->exit > 0)) whole.reset();
    if (whole) whole->enter = std::max(whole->enter, 0.0);
    for (const auto& d : ds) {
      std::vector<Interval> all;
      for (const auto& pe : d.bricks_per_pe) {
        const auto iv = intersect_domain(ray, g, pe);
        for (std::size_t i = 0; i < iv.size(); ++i) {
          ASSERT_LT(iv[i].enter, iv[i].exit);
          if (i > 0) { ASSERT_LT(iv[i - 1].exit, iv[i].enter); }
        }
        all.insert(all.end(), iv.begin(), iv.end());
      }
      if (!whole) {
        EXPECT_TRUE(all.empty());
        continue;
      }
      ++hits;
      std::sort(all.begin(), all.end(), [](auto a, auto b) { return a.enter < b.enter; });
      ASSERT_FALSE(all.empty());
      EXPECT_NEAR(all.front().enter, whole->enter, 1e-6);
      EXPECT_NEAR(all.back().exit, whole->exit, 1e-6);
      for (std::size_t i = 1; i < all.size(); ++i) EXPECT_NEAR(all[i].enter, all[i - 1].exit, 1e-6);
    }
  }
  EXPECT_GT(hits, 1000);
}

}  // namespace
}  // namespace vdi
