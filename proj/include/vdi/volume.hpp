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

#ifndef VDI_VOLUME_HPP_
#define VDI_VOLUME_HPP_

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "vdi/common.hpp"

namespace vdi {

enum class VoxelFormat : std::uint8_t { kUint8 = 0, kUint16 = 1 };

constexpr std::size_t bytes_per_voxel(VoxelFormat f) { return f == VoxelFormat::kUint8 ? 1 : 2; }

/// World placement of a voxel grid. Voxel (i,j,k) has its center at origin + (i,j,k)*spacing;
/// the volume occupies the box spanned by the outer voxel faces.
struct Grid {
  Int3 dims{1, 1, 1};
  Vec3 spacing{1, 1, 1};
  Vec3 origin{0, 0, 0};

  /// World coordinate of the voxel face at (possibly fractional) index `face` along `axis`.
  double face(int axis, std::int64_t index) const {
    return origin[axis] + (static_cast<double>(index) - 0.5) * spacing[axis];
  }
  Vec3 lower() const { return {face(0, 0), face(1, 0), face(2, 0)}; }
  Vec3 upper() const { return {face(0, dims.x), face(1, dims.y), face(2, dims.z)}; }
  Vec3 center() const { return (lower() + upper()) * 0.5; }
  double voxel_diagonal() const { return length(spacing); }

  void validate() const {
    if (dims.x < 1 || dims.y < 1 || dims.z < 1) throw InvalidArgument("grid dims must all be >= 1");
    if (!(spacing.x > 0 && spacing.y > 0 && spacing.z > 0))
      throw InvalidArgument("grid spacing components must be > 0");
  }
};

/// Immutable 3-D scalar field stored in its on-disk voxel format (x fastest).
class ScalarVolume {
 public:
  ScalarVolume(Grid grid, VoxelFormat format, std::vector<std::byte> raw)
      : grid_(grid), format_(format), raw_(std::move(raw)) {
    grid_.validate();
    const auto expected = static_cast<std::size_t>(grid_.dims.product()) * bytes_per_voxel(format_);
    if (raw_.size() != expected)
      throw InvalidArgument("voxel buffer holds " + std::to_string(raw_.size()) + " bytes, expected " +
                            std::to_string(expected));
  }

  /// Quantizes normalized values in [0,1] into `format`.
  static ScalarVolume from_normalized(Grid grid, VoxelFormat format, std::span<const float> values) {
    std::vector<std::byte> raw(values.size() * bytes_per_voxel(format));
    const double max = format == VoxelFormat::kUint8 ? 255.0 : 65535.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const auto q = static_cast<std::uint32_t>(std::lround(std::clamp<double>(values[i], 0.0, 1.0) * max));
      if (format == VoxelFormat::kUint8) {
        raw[i] = static_cast<std::byte>(q);
      } else {
        raw[2 * i] = static_cast<std::byte>(q & 0xff);
        raw[2 * i + 1] = static_cast<std::byte>(q >> 8);
      }
    }
    return ScalarVolume(grid, format, std::move(raw));
  }

  const Grid& grid() const { return grid_; }
  Int3 dims() const { return grid_.dims; }
  VoxelFormat format() const { return format_; }
  std::span<const std::byte> raw() const { return raw_; }

  /// Normalized value of voxel (i,j,k); indices must be in range.
  double at(std::int64_t i, std::int64_t j, std::int64_t k) const {
    const auto idx = static_cast<std::size_t>(i + grid_.dims.x * (j + grid_.dims.y * k));
    if (format_ == VoxelFormat::kUint8) return static_cast<double>(raw_[idx]) / 255.0;
    const auto lo = static_cast<std::uint32_t>(raw_[2 * idx]);
    const auto hi = static_cast<std::uint32_t>(raw_[2 * idx + 1]);
    return static_cast<double>(lo | (hi << 8)) / 65535.0;
  }

  std::uint64_t digest() const {
    std::uint64_t h = fnv1a(raw_);
    const std::array<double, 9> geom{grid_.spacing.x, grid_.spacing.y, grid_.spacing.z,
                                     grid_.origin.x,  grid_.origin.y,  grid_.origin.z,
                                     double(grid_.dims.x), double(grid_.dims.y), double(grid_.dims.z)};
    return fnv1a(std::as_bytes(std::span(geom)), h);
  }

 private:
  Grid grid_;
  VoxelFormat format_;
  std::vector<std::byte> raw_;
};

/// Raised by load_raw when the file length disagrees with the requested shape.
class SizeMismatchError : public Error {
 public:
  SizeMismatchError(std::uintmax_t expected, std::uintmax_t actual)
      : Error("raw volume size mismatch: expected " + std::to_string(expected) + " bytes, file has " +
              std::to_string(actual)),
        expected_bytes(expected),
        actual_bytes(actual) {}
  std::uintmax_t expected_bytes;
  std::uintmax_t actual_bytes;
};

/// Loads a headerless little-endian voxel stream (x fastest).
inline ScalarVolume load_raw(const std::filesystem::path& path, Int3 dims, VoxelFormat format,
                             Vec3 spacing = {1, 1, 1}, Vec3 origin = {0, 0, 0}) {
  Grid grid{dims, spacing, origin};
  grid.validate();
  const auto expected = static_cast<std::uintmax_t>(dims.product()) * bytes_per_voxel(format);
  std::error_code ec;
  const auto actual = std::filesystem::file_size(path, ec);
  if (ec) throw Error("cannot stat raw volume '" + path.string() + "': " + ec.message());
  if (actual != expected) throw SizeMismatchError(expected, actual);
  std::vector<std::byte> raw(expected);
  std::ifstream in(path, std::ios::binary);
  if (!in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(expected)))
    throw Error("failed reading raw volume '" + path.string() + "'");
  return ScalarVolume(grid, format, std::move(raw));
}

/// Trilinear interpolation between voxel centers; zero outside the volume box.
/// Inside the outer half-voxel shell the nearest center row is used (edge clamp).
inline double sample_trilinear(const ScalarVolume& vol, Vec3 p) {
  const Grid& g = vol.grid();
  std::array<std::int64_t, 3> i0{};
  std::array<double, 3> f{};
  for (int axis = 0; axis < 3; ++axis) {
    const double c = (p[axis] - g.origin[axis]) / g.spacing[axis];
    const auto n = g.dims[axis];
    if (!(c >= -0.5 && c <= static_cast<double>(n) - 0.5)) return 0.0;
    if (n == 1) {
      i0[axis] = 0;
      f[axis] = 0.0;
      continue;
    }
    const double cc = std::clamp(c, 0.0, static_cast<double>(n - 1));
    i0[axis] = std::min<std::int64_t>(static_cast<std::int64_t>(std::floor(cc)), n - 2);
    f[axis] = cc - static_cast<double>(i0[axis]);
  }
  const auto step = [&](int axis) { return g.dims[axis] == 1 ? 0 : 1; };
  const std::int64_t x0 = i0[0], y0 = i0[1], z0 = i0[2];
  const std::int64_t x1 = x0 + step(0), y1 = y0 + step(1), z1 = z0 + step(2);
  const auto lerp = [](double a, double b, double t) { return a + (b - a) * t; };
  const double c00 = lerp(vol.at(x0, y0, z0), vol.at(x1, y0, z0), f[0]);
  const double c10 = lerp(vol.at(x0, y1, z0), vol.at(x1, y1, z0), f[0]);
  const double c01 = lerp(vol.at(x0, y0, z1), vol.at(x1, y0, z1), f[0]);
  const double c11 = lerp(vol.at(x0, y1, z1), vol.at(x1, y1, z1), f[0]);
  return lerp(lerp(c00, c10, f[1]), lerp(c01, c11, f[1]), f[2]);
}

struct ControlPoint {
  double scalar = 0;
  std::array<double, 3> color{};
  double opacity = 0;
};

/// Piecewise-linear color/opacity map, evaluated through a 256-entry table.
/// Lookups linearly interpolate between adjacent table entries.
class TransferFunction {
 public:
  static constexpr std::size_t kTableSize = 256;

  explicit TransferFunction(std::vector<ControlPoint> points) : points_(std::move(points)) {
    if (points_.size() < 2) throw InvalidArgument("transfer function needs at least 2 control points");
    if (points_.front().scalar != 0.0 || points_.back().scalar != 1.0)
      throw InvalidArgument("transfer function must start at scalar 0 and end at scalar 1");
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const auto& p = points_[i];
      if (i > 0 && !(p.scalar > points_[i - 1].scalar))
        throw InvalidArgument("transfer function scalars must be strictly increasing");
      for (double c : p.color)
        if (!(c >= 0 && c <= 1)) throw InvalidArgument("transfer function colors must lie in [0,1]");
      if (!(p.opacity >= 0 && p.opacity <= 1))
        throw InvalidArgument("transfer function opacities must lie in [0,1]");
    }
    for (std::size_t j = 0; j < kTableSize; ++j) table_[j] = evaluate(double(j) / double(kTableSize - 1));
  }

  /// Straight (non-premultiplied) color and opacity for a normalized scalar.
  Rgba lookup(double s) const {
    const double x = std::clamp(s, 0.0, 1.0) * double(kTableSize - 1);
    const auto i = std::min<std::size_t>(static_cast<std::size_t>(x), kTableSize - 2);
    const double t = x - double(i);
    const Rgba& a = table_[i];
    const Rgba& b = table_[i + 1];
    return {a.r + (b.r - a.r) * t, a.g + (b.g - a.g) * t, a.b + (b.b - a.b) * t, a.a + (b.a - a.a) * t};
  }

  const std::vector<ControlPoint>& points() const { return points_; }
  const std::array<Rgba, kTableSize>& table() const { return table_; }

  std::uint64_t digest() const { return fnv1a(std::as_bytes(std::span(table_))); }

  bool fully_transparent() const {
    return std::all_of(table_.begin(), table_.end(), [](const Rgba& e) { return e.a == 0.0; });
  }

 private:
  Rgba evaluate(double s) const {
    auto hi = std::find_if(points_.begin(), points_.end(), [s](const ControlPoint& p) { return p.scalar >= s; });
    if (hi == points_.begin()) ++hi;
    const auto lo = hi - 1;
    const double t = (s - lo->scalar) / (hi->scalar - lo->scalar);
    const auto mix = [t](double a, double b) { return a + (b - a) * t; };
    return {mix(lo->color[0], hi->color[0]), mix(lo->color[1], hi->color[1]), mix(lo->color[2], hi->color[2]),
            mix(lo->opacity, hi->opacity)};
  }

  std::vector<ControlPoint> points_;
  std::array<Rgba, kTableSize> table_{};
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
  std::uint32_t x = 0, y = 0;

  Vec3 at(double t) const { return origin + direction * t; }
};

/// Perspective pinhole camera. Pixel (0,0) is the top-left corner of the viewport.
struct Camera {
  Vec3 position{0, 0, -3};
  Vec3 forward{0, 0, 1};
  Vec3 up{0, 1, 0};
  double vfov_deg = 45.0;
  std::uint32_t width = 64, height = 64;
  double near = 0.01, far = 100.0;

  Vec3 right() const { return cross(forward, up); }
  double tan_half_fov() const { return std::tan(vfov_deg * std::numbers::pi / 360.0); }
  double aspect() const { return double(width) / double(height); }
  friend bool operator==(const Camera&, const Camera&) = default;

  void validate() const {
    if (width < 1 || height < 1) throw InvalidArgument("camera viewport must be at least 1x1");
    if (!(near > 0 && near < far)) throw InvalidArgument("camera requires 0 < near < far");
    if (!(vfov_deg > 0 && vfov_deg < 180)) throw InvalidArgument("camera vfov must lie in (0, 180) degrees");
    if (std::abs(length(forward) - 1) > 1e-6 || std::abs(length(up) - 1) > 1e-6)
      throw InvalidArgument("camera forward/up must be unit vectors");
    if (std::abs(dot(forward, up)) > 1e-6) throw InvalidArgument("camera forward and up must be orthogonal");
  }

  /// Builds a camera at `eye` looking at `target`, with `up_hint` orthogonalized.
  static Camera look_at(Vec3 eye, Vec3 target, Vec3 up_hint, double vfov_deg, std::uint32_t w, std::uint32_t h,
                        double near, double far) {
    Camera c;
    c.position = eye;
    c.forward = normalize(target - eye);
    c.up = normalize(up_hint - c.forward * dot(up_hint, c.forward));
    c.vfov_deg = vfov_deg;
    c.width = w;
    c.height = h;
    c.near = near;
    c.far = far;
    return c;
  }

  /// Orbits the camera about `pivot` by `degrees` around its own up axis.
  Camera orbited(Vec3 pivot, double degrees) const {
    const double rad = degrees * std::numbers::pi / 180.0;
    Camera c = *this;
    c.position = pivot + rotate(position - pivot, up, rad);
    c.forward = normalize(rotate(forward, up, rad));
    return c;
  }
};

inline Ray ray_for_pixel(const Camera& cam, std::uint32_t x, std::uint32_t y) {
  if (x >= cam.width || y >= cam.height)
    throw InvalidArgument("pixel (" + std::to_string(x) + ", " + std::to_string(y) + ") outside " +
                          std::to_string(cam.width) + "x" + std::to_string(cam.height) + " viewport");
  const double th = cam.tan_half_fov();
  const double u = (2.0 * (x + 0.5) / cam.width - 1.0) * th * cam.aspect();
  const double v = (1.0 - 2.0 * (y + 0.5) / cam.height) * th;
  return Ray{cam.position, normalize(cam.forward + cam.right() * u + cam.up * v), x, y};
}

/// Half-open parameter interval [enter, exit) along a ray.
struct Interval {
  double enter = 0, exit = 0;
  friend constexpr bool operator==(Interval, Interval) = default;
};

/// Slab test against a world-space box; returns the clipped parameter range if hit.
inline std::optional<Interval> intersect_box(const Ray& ray, Vec3 lo, Vec3 hi) {
  double t0 = -std::numeric_limits<double>::infinity();
  double t1 = std::numeric_limits<double>::infinity();
  for (int axis = 0; axis < 3; ++axis) {
    const double o = ray.origin[axis], d = ray.direction[axis];
    if (d == 0.0) {
      if (o < lo[axis] || o >= hi[axis]) return std::nullopt;
      continue;
    }
    const double inv = 1.0 / d;
    double ta = (lo[axis] - o) * inv, tb = (hi[axis] - o) * inv;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t0 < t1)) return std::nullopt;
  return Interval{t0, t1};
}

/// Axis-aligned box of voxel indices, half-open: [lo, hi).
struct Brick {
  Int3 lo, hi;

  std::int64_t voxel_count() const { return (hi.x - lo.x) * (hi.y - lo.y) * (hi.z - lo.z); }
  bool contains(Int3 v) const {
    return v.x >= lo.x && v.x < hi.x && v.y >= lo.y && v.y < hi.y && v.z >= lo.z && v.z < hi.z;
  }
  bool overlaps(const Brick& o) const {
    for (int a = 0; a < 3; ++a)
      if (hi[a] <= o.lo[a] || o.hi[a] <= lo[a]) return false;
    return true;
  }
  Vec3 world_lower(const Grid& g) const { return {g.face(0, lo.x), g.face(1, lo.y), g.face(2, lo.z)}; }
  Vec3 world_upper(const Grid& g) const { return {g.face(0, hi.x), g.face(1, hi.y), g.face(2, hi.z)}; }
  friend constexpr bool operator==(const Brick&, const Brick&) = default;
};

/// Assignment of voxel bricks to processing elements. A PE's union may be non-convex.
struct DomainDecomposition {
  Int3 dims;
  std::vector<std::vector<Brick>> bricks_per_pe;

  std::size_t pe_count() const { return bricks_per_pe.size(); }

  /// Checks pairwise disjointness and exact coverage of the grid.
  void validate() const {
    std::vector<Brick> all;
    for (const auto& pe : bricks_per_pe) all.insert(all.end(), pe.begin(), pe.end());
    std::int64_t covered = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
      const Brick& b = all[i];
      for (int a = 0; a < 3; ++a)
        if (b.lo[a] < 0 || b.hi[a] > dims[a] || b.lo[a] >= b.hi[a])
          throw InvalidArgument("brick outside grid or empty");
      for (std::size_t j = i + 1; j < all.size(); ++j)
        if (b.overlaps(all[j])) throw InvalidArgument("bricks overlap");
      covered += b.voxel_count();
    }
    if (covered != dims.product()) throw InvalidArgument("bricks do not cover the whole grid");
  }

  std::optional<std::size_t> owner_of(Int3 voxel) const {
    for (std::size_t pe = 0; pe < bricks_per_pe.size(); ++pe)
      for (const Brick& b : bricks_per_pe[pe])
        if (b.contains(voxel)) return pe;
    return std::nullopt;
  }
};

/// k contiguous z-slabs whose thicknesses differ by at most one voxel.
inline DomainDecomposition make_slab_decomposition(Int3 dims, std::size_t k) {
  if (k < 1) throw InvalidArgument("slab decomposition needs k >= 1");
  if (static_cast<std::int64_t>(k) > dims.z)
    throw InvalidArgument("cannot split " + std::to_string(dims.z) + " z-slices among " + std::to_string(k) + " PEs");
  DomainDecomposition d{dims, std::vector<std::vector<Brick>>(k)};
  const std::int64_t base = dims.z / static_cast<std::int64_t>(k);
  const std::int64_t extra = dims.z % static_cast<std::int64_t>(k);
  std::int64_t z = 0;
  for (std::size_t pe = 0; pe < k; ++pe) {
    const std::int64_t thick = base + (static_cast<std::int64_t>(pe) < extra ? 1 : 0);
    d.bricks_per_pe[pe].push_back(Brick{{0, 0, z}, {dims.x, dims.y, z + thick}});
    z += thick;
  }
  return d;
}

/// z-slabs of `period` voxels dealt round-robin to k PEs; each PE owning more than one slab
/// has a non-convex domain along z.
inline DomainDecomposition make_interleaved_decomposition(Int3 dims, std::size_t k, std::int64_t period) {
  if (k < 2) throw InvalidArgument("interleaved decomposition needs k >= 2");
  if (period < 1) throw InvalidArgument("interleave period must be >= 1");
  if (period >= dims.z)
    throw InvalidArgument("interleave period " + std::to_string(period) + " >= dims.z would give convex domains");
  DomainDecomposition d{dims, std::vector<std::vector<Brick>>(k)};
  std::size_t pe = 0;
  for (std::int64_t z = 0; z < dims.z; z += period, pe = (pe + 1) % k)
    d.bricks_per_pe[pe].push_back(Brick{{0, 0, z}, {dims.x, dims.y, std::min(z + period, dims.z)}});
  return d;
}

/// Parameter intervals (t >= 0) where `ray` lies inside the union of `bricks`, sorted and disjoint.
/// Intervals of face-sharing bricks are merged.
inline std::vector<Interval> intersect_domain(const Ray& ray, const Grid& grid, std::span<const Brick> bricks) {
  std::vector<Interval> hits;
  for (const Brick& b : bricks) {
    auto hit = intersect_box(ray, b.world_lower(grid), b.world_upper(grid));
    if (!hit || !(hit->exit > 0.0)) continue;
    hit->enter = std::max(hit->enter, 0.0);
    hits.push_back(*hit);
  }
  std::sort(hits.begin(), hits.end(), [](const Interval& a, const Interval& b) { return a.enter < b.enter; });
  std::vector<Interval> merged;
  for (const Interval& h : hits) {
    if (!merged.empty() && h.enter <= merged.back().exit + 1e-9 * (1.0 + std::abs(h.enter)))
      merged.back().exit = std::max(merged.back().exit, h.exit);
    else
      merged.push_back(h);
  }
  return merged;
}

}  // namespace vdi

#endif  // VDI_VOLUME_HPP_
