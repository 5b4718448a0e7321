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
#include "vdi/dvr.hpp"
#include "vdi/scenes.hpp"

namespace vdi {
namespace {

Rgba random_premultiplied(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0, 1);
  const double a = u(rng);
  return {u(rng) * a, u(rng) * a, u(rng) * a, a};
}

TEST(Over, OpaqueFrontWins) {
  const Rgba red{1, 0, 0, 1};
  const Rgba out = over(red, Rgba{0.2, 0.7, 0.1, 0.9});
  EXPECT_EQ(out, red);
}

TEST(Over, HandEvaluatedScalarForm) {
  // C = 0.4 + (1 - 0.5) * 0.6 = 0.7, alpha = 0.5 + 0.5 * 0.5 = 0.75
  const Rgba out = over(Rgba{0.4, 0.4, 0.4, 0.5}, Rgba{0.6, 0.6, 0.6, 0.5});
  EXPECT_DOUBLE_EQ(out.r, 0.7);
  EXPECT_DOUBLE_EQ(out.g, 0.7);
  EXPECT_DOUBLE_EQ(out.a, 0.75);
}

TEST(Over, AssociativeButNotCommutative) {
  std::mt19937_64 rng(11);
  double worst = 0;
  for (int i = 0; i < 100000; ++i) {
    const Rgba a = random_premultiplied(rng), b = random_premultiplied(rng), c = random_premultiplied(rng);
    const Rgba l = over(a, over(b, c)), r = over(over(a, b), c);
    worst = std::max({worst, std::abs(l.r - r.r), std::abs(l.g - r.g), std::abs(l.b - r.b), std::abs(l.a - r.a)});
  }
  EXPECT_LE(worst, 1e-6);
  const Rgba red{0.5, 0, 0, 0.5}, blue{0, 0, 0.5, 0.5};
  EXPECT_NE(over(red, blue), over(blue, red));
}

TEST(Over, MatchesBackToFrontOracle) {
  std::mt19937_64 rng(3);
  std::vector<Rgba> chain;
  for (int i = 0; i < 50; ++i) chain.push_back(random_premultiplied(rng));
  Rgba acc;
  for (const Rgba& c : chain) acc = over(acc, c);
  const Rgba ref = oracle::composite_back_to_front(chain);
  EXPECT_NEAR(acc.r, ref.r, 1e-12);
  EXPECT_NEAR(acc.a, ref.a, 1e-12);
}

ScalarVolume constant_volume(double value, Int3 dims = {8, 8, 8}) {
  return scenes::tabulate(dims, [value](Vec3) { return value; });
}

TEST(RenderDvr, TransparentTransferFunctionGivesZeroImage) {
  const TransferFunction clear({{0, {1, 1, 1}, 0}, {1, {1, 1, 1}, 0}});
  const auto img = render_dvr(scenes::random_blobs({16, 16, 16}, 1), clear, scenes::default_camera(16, 16), 0.02);
  for (const auto& p : img.pixels) EXPECT_EQ(p, (std::array<float, 4>{0, 0, 0, 0}));
}

TEST(RenderDvr, OpaqueFirstSampleDeterminesPixel) {
  const TransferFunction solid({{0, {0.2, 0.6, 0.4}, 1}, {1, {0.2, 0.6, 0.4}, 1}});
  const auto img = render_dvr(constant_volume(1.0), solid, scenes::default_camera(9, 9), 0.05, 1.0);
  const auto& p = img.at(4, 4);
  EXPECT_FLOAT_EQ(p[0], 0.2f);
  EXPECT_FLOAT_EQ(p[1], 0.6f);
  EXPECT_FLOAT_EQ(p[2], 0.4f);
  EXPECT_FLOAT_EQ(p[3], 1.0f);
}

// Constant medium: opacity over path L is 1 - (1 - a)^(L / reference) regardless of step.
TEST(RenderDvr, StepSizeIndependentForHomogeneousMedium) {
  const double a0 = 0.05;
  const TransferFunction tf({{0, {1, 1, 1}, a0}, {1, {1, 1, 1}, a0}});
  const auto vol = constant_volume(0.5, {16, 16, 16});
  const Camera cam = Camera::look_at({0, 0, -3}, {0, 0, 0}, {0, 1, 0}, 1.0, 1, 1, 0.1, 10);
  const double analytic = 1 - std::pow(1 - a0, 1.0 / vol.grid().voxel_diagonal());
  const double coarse = render_dvr(vol, tf, cam, 1.0 / 16, 1.0).pixels[0][3];
  const double fine = render_dvr(vol, tf, cam, 1.0 / 80, 1.0).pixels[0][3];
  EXPECT_NEAR(coarse, fine, 1e-2);
  EXPECT_NEAR(fine, analytic, 1e-2);
}

TEST(RenderDvr, PremultipliedBoundHoldsEverywhere) {
  const auto img = render_dvr(scenes::random_blobs({24, 24, 24}, 9), scenes::default_transfer_function(),
                              scenes::default_camera(32, 32), 1.0 / 48);
  for (const auto& p : img.pixels) {
    EXPECT_GE(p[3], 0.0f);
    EXPECT_LE(p[3], 1.0f);
    for (int c = 0; c < 3; ++c) EXPECT_LE(p[c], p[3] + 1e-6f);
  }
}

// Tripling the resolution puts every third fine pixel center on a coarse pixel's ray.
TEST(RenderDvr, ResolutionTriplingKeepsPerRayResult) {
  const auto vol = scenes::tabulate({24, 24, 24}, [](Vec3 p) { return 0.5 + 0.4 * std::sin(3 * p.x) * std::cos(2 * p.y); });
  const TransferFunction tf({{0, {0.2, 0.4, 0.9}, 0.02}, {1, {0.9, 0.3, 0.1}, 0.2}});
  const auto coarse = render_dvr(vol, tf, scenes::default_camera(16, 16), 1.0 / 48);
  const auto fine = render_dvr(vol, tf, scenes::default_camera(48, 48), 1.0 / 48);
  for (std::uint32_t y = 0; y < 16; ++y)
    for (std::uint32_t x = 0; x < 16; ++x)
      for (int c = 0; c < 4; ++c) EXPECT_NEAR(fine.at(3 * x + 1, 3 * y + 1)[c], coarse.at(x, y)[c], 1e-5);
}

TEST(RenderDvr, RejectsBadParameters) {
  const auto vol = constant_volume(0.5);
  const auto tf = scenes::default_transfer_function();
  EXPECT_THROW(render_dvr(vol, tf, scenes::default_camera(4, 4), 0.0), InvalidArgument);
  EXPECT_THROW(render_dvr(vol, tf, scenes::default_camera(4, 4), 0.1, 1.5), InvalidArgument);
}

Image random_image(std::mt19937_64& rng, std::uint32_t w, std::uint32_t h) {
  Image img(w, h);
  for (auto& p : img.pixels) {
    const Rgba c = random_premultiplied(rng);
    p = Image::to_pixel(c);
  }
  return img;
}

Image constant_image(std::uint32_t w, std::uint32_t h, float v) {
  Image img(w, h);
  for (auto& p : img.pixels) p = {v, v, v, 1};
  return img;
}

TEST(Ssim, IdentityIsOne) {
  std::mt19937_64 rng(1);
  const Image a = random_image(rng, 24, 16);
  EXPECT_DOUBLE_EQ(ssim(a, a), 1.0);
}

TEST(Ssim, BlackVersusWhiteIsNearZero) {
  // constant windows: (C1)(C2) / ((1 + C1)(C2)) = C1 / (1 + C1)
  const double s = ssim(constant_image(16, 16, 0), constant_image(16, 16, 1));
  EXPECT_NEAR(s, 1e-4 / (1 + 1e-4), 1e-9);
  EXPECT_NEAR(s, 0.0, 1e-3);
}

TEST(Ssim, InvertedCheckerboardIsNearMinusOne) {
  Image a(16, 16), b(16, 16);
  for (std::uint32_t y = 0; y < 16; ++y)
    for (std::uint32_t x = 0; x < 16; ++x) {
      const float v = (x + y) % 2 ? 1.0f : 0.0f;
      a.at(x, y) = {v, v, v, 1};
      b.at(x, y) = {1 - v, 1 - v, 1 - v, 1};
    }
  EXPECT_LT(ssim(a, b), -0.99);
}

TEST(Ssim, MatchesMomentOracleOnRandomPairs) {
  std::mt19937_64 rng(2024);
  for (int i = 0; i < 5; ++i) {
    const Image a = random_image(rng, 40, 32), b = random_image(rng, 40, 32);
    EXPECT_NEAR(ssim(a, b), oracle::ssim_from_moments(a, b), 1e-3);
  }
}

TEST(Ssim, DimensionMismatchIsAnError) {
  EXPECT_THROW(ssim(Image(8, 8), Image(8, 9)), InvalidArgument);
  EXPECT_THROW(psnr(Image(8, 8), Image(9, 8)), InvalidArgument);
}

TEST(Psnr, IdenticalIsInfinite) {
  std::mt19937_64 rng(4);
  const Image a = random_image(rng, 8, 8);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
}

TEST(Psnr, UnitMseIsZeroDecibels) {
  EXPECT_DOUBLE_EQ(psnr(constant_image(4, 4, 0), constant_image(4, 4, 1)), 0.0);
}

TEST(Psnr, MatchesLongDoubleOracle) {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 5; ++i) {
    const Image a = random_image(rng, 33, 17), b = random_image(rng, 33, 17);
    EXPECT_NEAR(psnr(a, b), oracle::psnr_long_double(a, b), 0.01);
  }
}

TEST(SsimDifferenceImage, BrightWhereImagesDiffer) {
  Image a = constant_image(16, 8, 0.5f), b = a;
  for (std::uint32_t y = 0; y < 8; ++y)
    for (std::uint32_t x = 8; x < 16; ++x) b.at(x, y) = {float((x + y) % 2), float((x + y) % 2), 0, 1};
  const Image d = ssim_difference_image(a, b);
  EXPECT_EQ(d.at(2, 2)[0], 0.0f);
  EXPECT_GT(d.at(12, 2)[0], 0.1f);
}

}  // namespace
}  // namespace vdi
