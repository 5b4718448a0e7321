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

#include "vdi/scenes.hpp"
#include "vdi/vdi_render.hpp"

namespace vdi {
namespace {

TEST(AdjustedOpacity, Identities) {
  EXPECT_EQ(adjusted_opacity(0.0, 2.0, 1.0), 0.0);
  for (double a : {0.1, 0.5, 0.93})
    for (double l : {0.01, 1.0, 3.5}) EXPECT_NEAR(adjusted_opacity(a, l, l), a, 1e-15);
  EXPECT_NEAR(adjusted_opacity(0.75, 2.0, 1.0), 0.5, 1e-15);
  EXPECT_EQ(adjusted_opacity(1.0, 2.0, 0.1), 1.0);
  EXPECT_EQ(adjusted_opacity(0.4, 2.0, 0.0), 0.0);
}

TEST(AdjustedOpacity, MonotoneInCoveredLength) {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), ls = u(rng) * 3, l1 = u(rng) * 3, l2 = u(rng) * 3;
    const double x = adjusted_opacity(a, ls, std::min(l1, l2)), y = adjusted_opacity(a, ls, std::max(l1, l2));
    EXPECT_LE(x, y);
    EXPECT_GE(x, 0.0);
    EXPECT_LE(y, 1.0);
  }
}

TEST(AdjustedOpacity, UnitStoredLengthIsPowerForm) {
  EXPECT_NEAR(adjusted_opacity(0.3, 1.0, 2.5), 1.0 - std::pow(0.7, 2.5), 1e-15);
}

// Splitting a segment and compositing the two parts reproduces the whole.
TEST(AdjustedOpacity, SplitsCompose) {
  const double a = 0.6, l = 2.0;
  const double a1 = adjusted_opacity(a, l, 0.7), a2 = adjusted_opacity(a, l, 1.3);
  EXPECT_NEAR(a1 + (1 - a1) * a2, a, 1e-14);
}

TEST(GenFrustumCoords, RoundTrip) {
  const Camera cam = Camera::look_at({0.3, -0.2, -2}, {0, 0, 0}, {0, 1, 0}, 50, 40, 30, 0.1, 10);
  const GenFrustumCoords f(cam);
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 p{u(rng), u(rng), u(rng)};
    const auto c = f.to_frustum(p);
    ASSERT_TRUE(c);
    EXPECT_LT(length(f.to_world(*c) - p), 1e-4);
  }
  EXPECT_FALSE(f.to_frustum(cam.position - cam.forward));
}

TEST(GenFrustumCoords, PixelRaysLandInTheirList) {
  const Camera cam = scenes::default_camera(17, 11);
  const GenFrustumCoords f(cam);
  for (std::uint32_t y = 0; y < cam.height; ++y)
    for (std::uint32_t x = 0; x < cam.width; ++x) {
      const auto c = f.to_frustum(ray_for_pixel(cam, x, y).at(1.7));
      ASSERT_TRUE(c);
      EXPECT_EQ(f.list_index(*c), std::optional<std::size_t>(std::size_t(y) * cam.width + x));
      EXPECT_NEAR(c->t, 1.7, 1e-12);
    }
}

TEST(RenderOriginal, EmptyAndSingleSegment) {
  VdiFull vdi(2, 1, 3);
  EXPECT_EQ(max_abs_difference(render_original(vdi), Image(2, 1)), 0.0);
  vdi.slots(1)[0] = Supersegment::make(1.0, 2.0, {0.2, 0.1, 0.05, 0.4});
  const Image img = render_original(vdi);
  EXPECT_FLOAT_EQ(img.at(1, 0)[0], 0.2f);
  EXPECT_FLOAT_EQ(img.at(1, 0)[3], 0.4f);
  EXPECT_EQ(img.at(0, 0)[3], 0.0f);
}

struct Scene {
  const char* name;
  ScalarVolume vol;
};

std::vector<Scene> scenes_64() {
  return {{"two_shells", scenes::two_shells({64, 64, 64})},
          {"gradient", scenes::axis_gradient({64, 64, 64})},
          {"blobs", scenes::random_blobs({64, 64, 64}, 21)}};
}

TEST(RenderOriginal, ReproducesDvrAtGenerationViewpoint) {
  const auto tf = scenes::default_transfer_function();
  const auto cam = scenes::default_camera(48, 48);
  const double step = 1.0 / 64;
  for (const auto& s : scenes_64()) {
    const Image dvr = render_dvr(s.vol, tf, cam, step, 1.0);
    for (std::uint32_t n_sup : {4u, 8u, 32u}) {
      const auto vdi = generate_full(s.vol, tf, cam, n_sup, step).first;
      EXPECT_LE(max_abs_difference(render_original(vdi), dvr), 1e-4) << s.name << " n_sup=" << n_sup;
    }
  }
}

TEST(RenderNovel, MatchesOriginalAtGenerationCamera) {
  const auto vol = scenes::two_shells({48, 48, 48});
  const auto tf = scenes::default_transfer_function();
  const auto cam = scenes::default_camera(40, 40);
  const double step = 1.0 / 48;
  const auto vdi = generate_full(vol, tf, cam, 6, step).first;
  const Image original = render_original(vdi);
  const Image novel = render_novel(vdi, cam, cam, step / 4);
  EXPECT_GE(ssim(novel, original), 0.99);
  EXPECT_LE(max_abs_difference(novel, original), 0.05);
}

TEST(RenderNovel, EmptyVdiRendersBlack) {
  const auto cam = scenes::default_camera(8, 8);
  const Image img = render_novel(VdiFull(8, 8, 2), cam, cam.orbited({0, 0, 0}, 30), 0.01);
  EXPECT_EQ(max_abs_difference(img, Image(8, 8)), 0.0);
  EXPECT_THROW(render_novel(VdiFull(8, 8, 2), cam, cam, 0.0), InvalidArgument);
}

TEST(RenderNovel, SmallOrbitStaysCloseToGroundTruth) {
  const auto vol = scenes::two_shells({64, 64, 64});
  const auto tf = scenes::default_transfer_function();
  const auto cam = scenes::default_camera(64, 64);
  const double step = 1.0 / 64;
  const auto vdi = generate_full(vol, tf, cam, 8, step).first;
  const Vec3 pivot = orbit_pivot(vdi, cam);
  EXPECT_LT(length(pivot), 0.05);
  const Camera moved = cam.orbited(pivot, 5.0);
  const Image truth = render_dvr(vol, tf, moved, step, 1.0);
  const Image novel = render_novel(vdi, cam, moved, step / 2);
  EXPECT_GE(ssim(novel, truth), 0.95);
}

// Refining the march step converges: halving twice changes the image less than halving once.
TEST(RenderNovel, MarchRefinementConverges) {
  const auto vol = scenes::random_blobs({32, 32, 32}, 4);
  const auto tf = scenes::default_transfer_function();
  const auto cam = scenes::default_camera(32, 32);
  const auto vdi = generate_full(vol, tf, cam, 6, 1.0 / 32).first;
  const Camera moved = cam.orbited(orbit_pivot(vdi, cam), 10.0);
  const Image a = render_novel(vdi, cam, moved, 1.0 / 32);
  const Image b = render_novel(vdi, cam, moved, 1.0 / 64);
  const Image c = render_novel(vdi, cam, moved, 1.0 / 128);
  EXPECT_LE(max_abs_difference(b, c), max_abs_difference(a, b) + 1e-9);
}

TEST(ContentBounds, CoversEverySupersegment) {
  const auto vol = scenes::random_blobs({24, 24, 24}, 8);
  const auto cam = scenes::default_camera(24, 24);
  const auto vdi = generate_full(vol, scenes::default_transfer_function(), cam, 4, 1.0 / 24).first;
  const auto box = content_bounds(vdi, cam);
  ASSERT_TRUE(box);
  for (std::size_t i = 0; i < vdi.list_count(); ++i) {
    const Ray ray = ray_for_pixel(cam, i % cam.width, i / cam.width);
    for (const auto& s : vdi.list(i))
      for (int a = 0; a < 3; ++a) {
        EXPECT_LE(box->lo[a], ray.at(s.t_front)[a]);
        EXPECT_GE(box->hi[a], ray.at(s.t_back)[a]);
      }
  }
  EXPECT_FALSE(content_bounds(VdiFull(4, 4, 1), cam));
}

}  // namespace
}  // namespace vdi
