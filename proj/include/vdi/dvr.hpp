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

#ifndef VDI_DVR_HPP_
#define VDI_DVR_HPP_

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "vdi/common.hpp"
#include "vdi/volume.hpp"

namespace vdi {

/// RGBA image, premultiplied alpha, row-major from the top-left pixel.
struct Image {
  std::uint32_t width = 0, height = 0;
  std::vector<std::array<float, 4>> pixels;

  Image() = default;
  Image(std::uint32_t w, std::uint32_t h) : width(w), height(h), pixels(std::size_t(w) * h, {0, 0, 0, 0}) {}

  std::array<float, 4>& at(std::uint32_t x, std::uint32_t y) { return pixels[std::size_t(y) * width + x]; }
  const std::array<float, 4>& at(std::uint32_t x, std::uint32_t y) const { return pixels[std::size_t(y) * width + x]; }

  static std::array<float, 4> to_pixel(const Rgba& c) {
    return {float(c.r), float(c.g), float(c.b), float(c.a)};
  }
};

inline double max_abs_difference(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) throw InvalidArgument("image dimensions differ");
  double worst = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i)
    for (int c = 0; c < 4; ++c) worst = std::max(worst, double(std::abs(a.pixels[i][c] - b.pixels[i][c])));
  return worst;
}

/// Opacity of a sample taken over `step` when `alpha` is defined per `reference_step`.
inline double correct_opacity(double alpha, double step, double reference_step) {
  if (alpha <= 0.0) return 0.0;
  if (alpha >= 1.0) return 1.0;
  return 1.0 - std::pow(1.0 - alpha, step / reference_step);
}

/// Part of the ray inside the volume box, clipped to the camera's near/far range.
/// Sample positions along every ray are anchored at `enter` of this range.
inline std::optional<Interval> volume_range(const Ray& ray, const Grid& grid, const Camera& cam) {
  auto hit = intersect_box(ray, grid.lower(), grid.upper());
  if (!hit) return std::nullopt;
  hit->enter = std::max(hit->enter, cam.near);
  hit->exit = std::min(hit->exit, cam.far);
  if (!(hit->enter < hit->exit)) return std::nullopt;
  return hit;
}

/// Position of sample k along a ray whose volume range starts at `anchor`.
inline double sample_position(double anchor, std::int64_t k, double step) {
  return anchor + (static_cast<double>(k) + 0.5) * step;
}

/// Premultiplied classification of the scalar at `p`, opacity-corrected for `step`.
inline Rgba classify(const ScalarVolume& vol, const TransferFunction& tf, Vec3 p, double step) {
  const Rgba c = tf.lookup(sample_trilinear(vol, p));
  const double a = correct_opacity(c.a, step, vol.grid().voxel_diagonal());
  return {c.r * a, c.g * a, c.b * a, a};
}

/// Ground-truth front-to-back raycaster. Stops a ray once accumulated opacity reaches
/// `early_term`; pass 1.0 to march the whole volume.
inline Image render_dvr(const ScalarVolume& vol, const TransferFunction& tf, const Camera& cam, double step,
                        double early_term = 0.99) {
  if (!(step > 0)) throw InvalidArgument("step must be > 0");
  if (!(early_term >= 0 && early_term <= 1)) throw InvalidArgument("early termination must lie in [0,1]");
  cam.validate();
  Image img(cam.width, cam.height);
  parallel_for(std::size_t(cam.width) * cam.height, [&](std::size_t i) {
    const auto x = static_cast<std::uint32_t>(i % cam.width), y = static_cast<std::uint32_t>(i / cam.width);
    const Ray ray = ray_for_pixel(cam, x, y);
    const auto range = volume_range(ray, vol.grid(), cam);
    if (!range) return;
    Rgba acc;
    for (std::int64_t k = 0;; ++k) {
      const double t = sample_position(range->enter, k, step);
      if (!(t < range->exit)) break;
      acc = over(acc, classify(vol, tf, ray.at(t), step));
      if (acc.a >= early_term) break;
    }
    img.pixels[i] = Image::to_pixel(acc);
  });
  return img;
}

namespace detail {

// Premultiplied pixels composited over black are the color channels themselves.
inline std::vector<double> luminance_over_black(const Image& img) {
  std::vector<double> y(img.pixels.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto& p = img.pixels[i];
    y[i] = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
  }
  return y;
}

inline void require_same_size(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height)
    throw InvalidArgument("image dimensions differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) +
                          " vs " + std::to_string(b.width) + "x" + std::to_string(b.height));
}

}  // namespace detail

/// Structural similarity of the luminance of both images over black.
/// Non-overlapping 8x8 windows (clipped to the image when it is smaller than a window; trailing
/// partial windows are skipped), population statistics, C1 = (0.01)^2, C2 = (0.03)^2, mean over windows.
inline double ssim(const Image& a, const Image& b) {
  detail::require_same_size(a, b);
  if (a.pixels.empty()) throw InvalidArgument("cannot compare empty images");
  constexpr double kC1 = 0.01 * 0.01, kC2 = 0.03 * 0.03;
  const auto ya = detail::luminance_over_black(a), yb = detail::luminance_over_black(b);
  const std::uint32_t wx = std::min<std::uint32_t>(8, a.width), wy = std::min<std::uint32_t>(8, a.height);
  double total = 0;
  std::size_t windows = 0;
  for (std::uint32_t y0 = 0; y0 + wy <= a.height; y0 += wy) {
    for (std::uint32_t x0 = 0; x0 + wx <= a.width; x0 += wx) {
      double ma = 0, mb = 0;
      for (std::uint32_t y = y0; y < y0 + wy; ++y)
        for (std::uint32_t x = x0; x < x0 + wx; ++x) {
          ma += ya[std::size_t(y) * a.width + x];
          mb += yb[std::size_t(y) * a.width + x];
        }
      const double n = double(wx) * wy;
      ma /= n;
      mb /= n;
      double va = 0, vb = 0, cov = 0;
      for (std::uint32_t y = y0; y < y0 + wy; ++y)
        for (std::uint32_t x = x0; x < x0 + wx; ++x) {
          const double da = ya[std::size_t(y) * a.width + x] - ma, db = yb[std::size_t(y) * a.width + x] - mb;
          va += da * da;
          vb += db * db;
          cov += da * db;
        }
      va /= n;
      vb /= n;
      cov /= n;
      total += ((2 * ma * mb + kC1) * (2 * cov + kC2)) / ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
      ++windows;
    }
  }
  return total / double(windows);
}

/// PSNR in dB over the RGB channels composited over black, peak value 1.
/// Identical images give +infinity.
inline double psnr(const Image& a, const Image& b) {
  detail::require_same_size(a, b);
  if (a.pixels.empty()) throw InvalidArgument("cannot compare empty images");
  double se = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i)
    for (int c = 0; c < 3; ++c) {
      const double d = double(a.pixels[i][c]) - double(b.pixels[i][c]);
      se += d * d;
    }
  const double mse = se / (3.0 * double(a.pixels.size()));
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

/// Per-window SSIM map expanded back to pixel resolution; brighter means more different.
inline Image ssim_difference_image(const Image& a, const Image& b) {
  detail::require_same_size(a, b);
  Image out(a.width, a.height);
  const std::uint32_t wx = std::min<std::uint32_t>(8, a.width), wy = std::min<std::uint32_t>(8, a.height);
  for (std::uint32_t y0 = 0; y0 < a.height; y0 += wy)
    for (std::uint32_t x0 = 0; x0 < a.width; x0 += wx) {
      const std::uint32_t w = std::min(wx, a.width - x0), h = std::min(wy, a.height - y0);
      Image pa(w, h), pb(w, h);
      for (std::uint32_t y = 0; y < h; ++y)
        for (std::uint32_t x = 0; x < w; ++x) {
          pa.at(x, y) = a.at(x0 + x, y0 + y);
          pb.at(x, y) = b.at(x0 + x, y0 + y);
        }
      const auto d = static_cast<float>(std::clamp((1.0 - ssim(pa, pb)) / 2.0, 0.0, 1.0));
      for (std::uint32_t y = 0; y < h; ++y)
        for (std::uint32_t x = 0; x < w; ++x) out.at(x0 + x, y0 + y) = {d, d, d, 1.0f};
    }
  return out;
}

}  // namespace vdi

#endif  // VDI_DVR_HPP_
