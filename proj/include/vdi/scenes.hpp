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

#ifndef VDI_SCENES_HPP_
#define VDI_SCENES_HPP_

#include <random>

#include "vdi/common.hpp"
#include "vdi/volume.hpp"

// Built-in synthetic volumes. Grids are centered on the world origin and scaled so the
// longest axis spans one world unit.

namespace vdi::scenes {

inline Grid unit_grid(Int3 dims) {
  const double s = 1.0 / double(std::max({dims.x, dims.y, dims.z}));
  Grid g{dims, {s, s, s}, {}};
  g.origin = {-0.5 * double(dims.x - 1) * s, -0.5 * double(dims.y - 1) * s, -0.5 * double(dims.z - 1) * s};
  return g;
}

template <typename Field>
ScalarVolume tabulate(Int3 dims, Field&& field, VoxelFormat format = VoxelFormat::kUint16) {
  const Grid g = unit_grid(dims);
  std::vector<float> values(static_cast<std::size_t>(dims.product()));
  std::size_t i = 0;
  for (std::int64_t z = 0; z < dims.z; ++z)
    for (std::int64_t y = 0; y < dims.y; ++y)
      for (std::int64_t x = 0; x < dims.x; ++x, ++i) {
        const Vec3 p = g.origin + Vec3{double(x) * g.spacing.x, double(y) * g.spacing.y, double(z) * g.spacing.z};
        values[i] = static_cast<float>(std::clamp(field(p), 0.0, 1.0));
      }
  return ScalarVolume::from_normalized(g, format, values);
}

/// Two concentric spherical shells: an outer one valued ~0.4 and an inner one valued ~0.8.
inline ScalarVolume two_shells(Int3 dims, double thickness = 0.035) {
  return tabulate(dims, [thickness](Vec3 p) {
    const double r = length(p);
    const auto bump = [&](double radius) {
      const double d = (r - radius) / thickness;
      return std::exp(-d * d);
    };
    return 0.4 * bump(0.4) + 0.8 * bump(0.2);
  });
}

/// Linear ramp from 0 to 1 along `axis`.
inline ScalarVolume axis_gradient(Int3 dims, int axis = 2) {
  return tabulate(dims, [axis](Vec3 p) { return p[axis] + 0.5; });
}

/// Sum of `count` Gaussian blobs with seeded random centers, radii and amplitudes.
inline ScalarVolume random_blobs(Int3 dims, std::uint64_t seed, int count = 12) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> pos(-0.35, 0.35), radius(0.03, 0.12), amp(0.3, 1.0);
  struct Blob {
    Vec3 c;
    double r, a;
  };
  std::vector<Blob> blobs;
  for (int i = 0; i < count; ++i) {
    const Vec3 c{pos(rng), pos(rng), pos(rng)};
    const double r = radius(rng);
    blobs.push_back({c, r, amp(rng)});
  }
  return tabulate(dims, [&](Vec3 p) {
    double v = 0;
    for (const Blob& b : blobs) {
      const Vec3 d = p - b.c;
      v += b.a * std::exp(-dot(d, d) / (b.r * b.r));
    }
    return v;
  });
}

/// Map used with the synthetic scenes: empty below 0.15, bluish mid values, orange-red highs.
inline TransferFunction default_transfer_function() {
  return TransferFunction({{0.0, {0, 0, 0}, 0.0},
                           {0.15, {0.1, 0.2, 0.8}, 0.0},
                           {0.4, {0.2, 0.5, 1.0}, 0.25},
                           {0.6, {0.9, 0.9, 0.3}, 0.15},
                           {0.8, {1.0, 0.4, 0.1}, 0.6},
                           {1.0, {1.0, 0.1, 0.05}, 0.9}});
}

/// Camera on the -z side of the unit volume looking at its center.
inline Camera default_camera(std::uint32_t w = 64, std::uint32_t h = 64, double distance = 2.2) {
  return Camera::look_at({0, 0, -distance}, {0, 0, 0}, {0, 1, 0}, 40.0, w, h, 0.1, 10.0);
}

}  // namespace vdi::scenes

#endif  // VDI_SCENES_HPP_
