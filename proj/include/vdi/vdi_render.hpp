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

#ifndef VDI_VDI_RENDER_HPP_
#define VDI_VDI_RENDER_HPP_

#include <cmath>
#include <optional>

#include "vdi/common.hpp"
#include "vdi/dvr.hpp"
#include "vdi/vdi_core.hpp"

namespace vdi {

/// Opacity of a part of length `l_covered` of a segment whose opacity over `l_stored` is
/// `alpha_stored`: 1 - (1 - alpha)^(l_covered / l_stored).
inline double adjusted_opacity(double alpha_stored, double l_stored, double l_covered) {
  if (alpha_stored <= 0.0 || l_covered <= 0.0) return 0.0;
  if (alpha_stored >= 1.0) return 1.0;
  return 1.0 - std::pow(1.0 - alpha_stored, l_covered / l_stored);
}

/// Mapping between world space and the generation camera's (pixel x, pixel y, ray depth).
/// Pixel coordinates are continuous; pixel (x, y) spans [x, x+1) x [y, y+1).
class GenFrustumCoords {
 public:
  explicit GenFrustumCoords(const Camera& cam)
      : cam_(cam), right_(cam.right()), th_(cam.tan_half_fov()), aspect_(cam.aspect()) {}

  struct Coord {
    double px, py, t;
  };

  /// nullopt for points at or behind the camera plane.
  std::optional<Coord> to_frustum(Vec3 p) const {
    const Vec3 d = p - cam_.position;
    const double z = dot(d, cam_.forward);
    if (!(z > 0)) return std::nullopt;
    const double xn = dot(d, right_) / z / (th_ * aspect_);
    const double yn = dot(d, cam_.up) / z / th_;
    return Coord{(xn + 1.0) * 0.5 * cam_.width, (1.0 - yn) * 0.5 * cam_.height, length(d)};
  }

  Vec3 to_world(Coord c) const {
    const double u = (2.0 * c.px / cam_.width - 1.0) * th_ * aspect_;
    const double v = (1.0 - 2.0 * c.py / cam_.height) * th_;
    return cam_.position + normalize(cam_.forward + right_ * u + cam_.up * v) * c.t;
  }

  /// Row-major list index of the pixel containing the coordinate, if inside the viewport.
  std::optional<std::size_t> list_index(const Coord& c) const {
    const double fx = std::floor(c.px), fy = std::floor(c.py);
    if (fx < 0 || fy < 0 || fx >= cam_.width || fy >= cam_.height) return std::nullopt;
    return static_cast<std::size_t>(fy) * cam_.width + static_cast<std::size_t>(fx);
  }

  const Camera& camera() const { return cam_; }

 private:
  Camera cam_;
  Vec3 right_;
  double th_, aspect_;
};

/// Exact reconstruction from the generation viewpoint: per list, front-to-back `over` of the
/// stored supersegments.
inline Image render_original(const VdiFull& vdi) {
  Image img(vdi.width, vdi.height);
  for (std::size_t i = 0; i < vdi.list_count(); ++i) {
    Rgba acc;
    for (const Supersegment& s : vdi.list(i)) acc = over(acc, s.rgba());
    img.pixels[i] = Image::to_pixel(acc);
  }
  return img;
}

struct Bounds {
  Vec3 lo, hi;
  Vec3 center() const { return (lo + hi) * 0.5; }
};

/// World-space box around every populated supersegment, padded by one pixel footprint.
inline std::optional<Bounds> content_bounds(const VdiFull& vdi, const Camera& gen) {
  std::optional<Bounds> box;
  double max_t = 0;
  for (std::size_t i = 0; i < vdi.list_count(); ++i) {
    const auto list = vdi.list(i);
    if (list.empty()) continue;
    const Ray ray = ray_for_pixel(gen, static_cast<std::uint32_t>(i % vdi.width), static_cast<std::uint32_t>(i / vdi.width));
    for (const Supersegment& s : list) {
      for (double t : {double(s.t_front), double(s.t_back)}) {
        const Vec3 p = ray.at(t);
        if (!box) box = Bounds{p, p};
        for (int a = 0; a < 3; ++a) {
          box->lo[a] = std::min(box->lo[a], p[a]);
          box->hi[a] = std::max(box->hi[a], p[a]);
        }
      }
      max_t = std::max(max_t, double(s.t_back));
    }
  }
  if (box) {
    const double pad = max_t * 2.0 * gen.tan_half_fov() * std::max(1.0, gen.aspect()) / gen.height + 1e-6;
    box->lo = box->lo - Vec3{pad, pad, pad};
    box->hi = box->hi + Vec3{pad, pad, pad};
  }
  return box;
}

/// Point the `--deviation` orbit turns about: the center of the VDI's content.
inline Vec3 orbit_pivot(const VdiFull& vdi, const Camera& gen) {
  if (auto b = content_bounds(vdi, gen)) return b->center();
  return gen.position + gen.forward * (0.5 * (gen.near + gen.far));
}

/// Approximate rendering from an arbitrary viewpoint. Each view ray is marched in world space
/// with `march_step`; a march step is mapped into the generation frustum, and every supersegment
/// of the nearest list it overlaps contributes opacity adjusted for the overlapped share of the
/// step and color scaled by adjusted/stored opacity. At the generation viewpoint the steps tile
/// each supersegment and the result reproduces render_original.
inline Image render_novel(const VdiFull& vdi, const Camera& gen, const Camera& view, double march_step,
                          double early_term = 1.0) {
  if (!(march_step > 0)) throw InvalidArgument("march step must be > 0");
  view.validate();
  Image img(view.width, view.height);
  const auto bounds = content_bounds(vdi, gen);
  if (!bounds) return img;
  const GenFrustumCoords frustum(gen);

  const auto composite_list = [&](Rgba& acc, std::size_t list_idx, double ta, double tb, double world_len) {
    const auto list = vdi.list(list_idx);
    const double lo = std::min(ta, tb), hi = std::max(ta, tb), span = hi - lo;
    auto contribute = [&](const Supersegment& s) {
      double covered;
      if (span > 0) {
        const double overlap = std::min(hi, double(s.t_back)) - std::max(lo, double(s.t_front));
        if (overlap <= 0) return;
        covered = world_len * overlap / span;
      } else {
        if (!(lo >= s.t_front && lo < s.t_back)) return;
        covered = world_len;
      }
      const double a = adjusted_opacity(s.a, s.length(), covered);
      if (a <= 0) return;
      const double scale = s.a > 0 ? a / s.a : 0.0;
      acc = over(acc, Rgba{s.r * scale, s.g * scale, s.b * scale, a});
    };
    // first supersegment whose back lies beyond `lo`
    auto first = std::upper_bound(list.begin(), list.end(), lo,
                                  [](double v, const Supersegment& s) { return v < double(s.t_back); });
    auto last = first;
    while (last != list.end() && double(last->t_front) <= hi) ++last;
    if (tb >= ta) {
      for (auto it = first; it != last; ++it) contribute(*it);
    } else {
      for (auto it = last; it != first;) contribute(*--it);
    }
  };

  parallel_for(std::size_t(view.width) * view.height, [&](std::size_t i) {
    const Ray ray = ray_for_pixel(view, static_cast<std::uint32_t>(i % view.width), static_cast<std::uint32_t>(i / view.width));
    auto range = intersect_box(ray, bounds->lo, bounds->hi);
    if (!range) return;
    range->enter = std::max(range->enter, view.near);
    range->exit = std::min(range->exit, view.far);
    Rgba acc;
    for (std::int64_t k = 0;; ++k) {
      const double t0 = range->enter + double(k) * march_step;
      if (!(t0 < range->exit)) break;
      const double t1 = std::min(range->enter + double(k + 1) * march_step, range->exit);
      const auto ca = frustum.to_frustum(ray.at(t0)), cb = frustum.to_frustum(ray.at(t1));
      if (ca && cb) {
        const auto la = frustum.list_index(*ca), lb = frustum.list_index(*cb);
        if (la && lb && *la == *lb) {
          composite_list(acc, *la, ca->t, cb->t, t1 - t0);
        } else if (auto cm = frustum.to_frustum(ray.at(0.5 * (t0 + t1)))) {
          if (auto lm = frustum.list_index(*cm)) composite_list(acc, *lm, cm->t, cm->t, t1 - t0);
        }
      }
      if (acc.a >= early_term) break;
    }
    img.pixels[i] = Image::to_pixel(acc);
  });
  return img;
}

}  // namespace vdi

#endif  // VDI_VDI_RENDER_HPP_
