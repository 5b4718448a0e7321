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

#ifndef VDI_VDI_CORE_HPP_
#define VDI_VDI_CORE_HPP_

#include <numeric>
#include <optional>
#include <vector>

#include "vdi/common.hpp"
#include "vdi/dvr.hpp"
#include "vdi/volume.hpp"

namespace vdi {

/// A depth interval along a generation ray carrying the premultiplied color and opacity
/// accumulated over it. 24 bytes, identical to the on-disk and on-wire record.
struct Supersegment {
  float t_front = 0, t_back = 0;
  float r = 0, g = 0, b = 0, a = 0;

  bool populated() const { return t_front < t_back; }
  Rgba rgba() const { return {r, g, b, a}; }
  double length() const { return double(t_back) - double(t_front); }

  static Supersegment make(double front, double back, const Rgba& c) {
    return {float(front), float(back), float(c.r), float(c.g), float(c.b), float(c.a)};
  }
  friend bool operator==(const Supersegment&, const Supersegment&) = default;
};
static_assert(sizeof(Supersegment) == 24);

/// One ray sample (or, during recompositing, one whole sub-supersegment).
struct Sample {
  double t_front = 0, t_back = 0;
  Rgba value;        // premultiplied contribution composited into a supersegment
  Rgba probe;        // premultiplied value compared by the split criterion
  bool contiguous = false;   // adjoins the previous sample with no gap
  bool hard_break = false;   // first sample after leaving the owning domain
};

/// Samples at the fixed global positions that fall inside `intervals`, opacity-corrected for `step`.
/// Footprints are clipped to the interval holding the sample.
inline std::vector<Sample> sample_ray(const ScalarVolume& vol, const TransferFunction& tf, const Camera& cam,
                                      const Ray& ray, double step, std::span<const Interval> intervals) {
  std::vector<Sample> out;
  const auto range = volume_range(ray, vol.grid(), cam);
  if (!range || intervals.empty()) return out;
  const double anchor = range->enter;
  bool first_interval = true;
  for (const Interval& iv : intervals) {
    const double lo = std::max(iv.enter, range->enter), hi = std::min(iv.exit, range->exit);
    if (!(lo < hi)) continue;
    auto k = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil((lo - anchor) / step - 0.5)));
    while (k > 0 && sample_position(anchor, k - 1, step) >= lo) --k;
    while (sample_position(anchor, k, step) < lo) ++k;
    bool first_in_interval = true;
    for (;; ++k) {
      const double t = sample_position(anchor, k, step);
      if (!(t < hi)) break;
      Sample s;
      s.t_front = std::max(lo, anchor + double(k) * step);
      s.t_back = std::min(hi, anchor + double(k + 1) * step);
      s.value = s.probe = classify(vol, tf, ray.at(t), step);
      s.contiguous = !first_in_interval;
      s.hard_break = first_in_interval && !first_interval;
      out.push_back(s);
      first_in_interval = false;
    }
    if (!first_in_interval) first_interval = false;
  }
  return out;
}

/// Split criterion: a new supersegment starts when the incoming premultiplied sample differs
/// from the running supersegment's reference by more than `gamma`.
inline bool should_split(double gamma, const Rgba& segment_reference, const Rgba& sample) {
  return distance(segment_reference, sample) > gamma;
}

struct ListBuild {
  std::vector<Supersegment> list;
  std::size_t raw_count = 0;  // supersegments the sweep opens when the budget is ignored
};

namespace detail {

/// Front-to-back segmentation sweep. The reference compared against each sample is the probe
/// of the sample merged last. Transparent samples and gaps close the running supersegment.
/// When `out` is set, supersegments past `n_sup` are merged into the last written one, except
/// across a hard break, which always opens a new supersegment.
inline std::size_t sweep(std::span<const Sample> samples, double gamma, std::size_t n_sup,
                         std::vector<Supersegment>* out) {
  struct Open {
    double front, back;
    Rgba acc;
  };
  std::vector<Open> written;
  std::size_t raw = 0;
  bool open = false, pending_hard = false;
  Rgba reference;
  for (const Sample& s : samples) {
    if (s.hard_break) pending_hard = true;
    if (!s.contiguous || s.hard_break) open = false;
    if (s.value.a <= 0.0) {
      open = false;
      continue;
    }
    if (open && !should_split(gamma, reference, s.probe)) {
      if (out) {
        written.back().acc = over(written.back().acc, s.value);
        written.back().back = s.t_back;
      }
      reference = s.probe;
      continue;
    }
    ++raw;
    open = true;
    reference = s.probe;
    if (!out) continue;
    if (written.size() < n_sup || pending_hard || written.empty()) {
      written.push_back({s.t_front, s.t_back, s.value});
      pending_hard = false;
    } else {
      written.back().acc = over(written.back().acc, s.value);
      written.back().back = s.t_back;
    }
  }
  if (out) {
    out->clear();
    out->reserve(written.size());
    for (const Open& w : written) out->push_back(Supersegment::make(w.front, w.back, w.acc));
  }
  return raw;
}

}  // namespace detail

/// Number of supersegments the sweep would open at `gamma`, ignoring any budget.
inline std::size_t count_supersegments(std::span<const Sample> samples, double gamma) {
  return detail::sweep(samples, gamma, 0, nullptr);
}

inline ListBuild build_list(std::span<const Sample> samples, double gamma, std::size_t n_sup) {
  ListBuild b;
  b.raw_count = detail::sweep(samples, gamma, n_sup, &b.list);
  return b;
}

/// Largest possible distance between two premultiplied RGBA values in [0,1]^4.
inline constexpr double kGammaMax = 2.0;
inline constexpr int kDefaultGammaIterations = 16;

/// Bisection for the smallest gamma whose supersegment count fits in `n_sup`.
/// Returns kGammaMax when no gamma fits (the writing pass then merges the overflow).
inline double gamma_search(std::span<const Sample> samples, std::size_t n_sup,
                           int max_iters = kDefaultGammaIterations) {
  if (max_iters < 1) throw InvalidArgument("gamma search needs at least one iteration");
  if (count_supersegments(samples, 0.0) <= n_sup) return 0.0;
  double lo = 0.0, hi = kGammaMax, best = kGammaMax;
  for (int i = 0; i < max_iters; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (count_supersegments(samples, mid) > n_sup) {
      lo = mid;
    } else {
      hi = mid;
      best = mid;
    }
  }
  return best;
}

/// Fixed-capacity layout: width*height lists of n_sup slots, unused slots zeroed.
struct VdiFull {
  std::uint32_t width = 0, height = 0, n_sup = 0;
  std::vector<Supersegment> grid;

  VdiFull() = default;
  VdiFull(std::uint32_t w, std::uint32_t h, std::uint32_t n) : width(w), height(h), n_sup(n), grid(std::size_t(w) * h * n) {}

  std::size_t list_count() const { return std::size_t(width) * height; }
  std::span<Supersegment> slots(std::size_t list) { return std::span(grid).subspan(list * n_sup, n_sup); }
  std::span<const Supersegment> slots(std::size_t list) const { return std::span(grid).subspan(list * n_sup, n_sup); }
  /// Populated prefix of a list.
  std::span<const Supersegment> list(std::size_t i) const {
    auto s = slots(i);
    std::size_t n = 0;
    while (n < s.size() && s[n].populated()) ++n;
    return s.first(n);
  }
  std::size_t byte_size() const { return grid.size() * sizeof(Supersegment); }
  friend bool operator==(const VdiFull&, const VdiFull&) = default;
};

/// Packed layout: per-list counts, their exclusive prefix sum, and the generated supersegments.
struct VdiDense {
  std::uint32_t width = 0, height = 0, n_sup = 0;
  std::vector<std::uint32_t> counts;
  std::vector<std::uint64_t> offsets;
  std::vector<Supersegment> payload;

  std::size_t list_count() const { return std::size_t(width) * height; }
  std::span<const Supersegment> list(std::size_t i) const {
    return std::span(payload).subspan(offsets[i], counts[i]);
  }
  std::size_t byte_size() const {
    return counts.size() * sizeof(std::uint32_t) + payload.size() * sizeof(Supersegment);
  }
  friend bool operator==(const VdiDense&, const VdiDense&) = default;
};

/// Reproducibility header carried alongside a VDI.
struct VdiMeta {
  Camera camera;
  std::uint64_t tf_digest = 0;
  std::uint64_t volume_digest = 0;
  std::uint32_t n_sup = 0;
  double step = 0;
  friend bool operator==(const VdiMeta&, const VdiMeta&) = default;
};

inline std::vector<std::uint64_t> exclusive_prefix_sum(std::span<const std::uint32_t> counts) {
  std::vector<std::uint64_t> offsets(counts.size());
  std::exclusive_scan(counts.begin(), counts.end(), offsets.begin(), std::uint64_t{0});
  return offsets;
}

class CorruptVdiError : public Error {
 public:
  using Error::Error;
};

inline VdiDense densify(const VdiFull& full) {
  VdiDense d{full.width, full.height, full.n_sup, {}, {}, {}};
  d.counts.resize(full.list_count());
  for (std::size_t i = 0; i < d.counts.size(); ++i) {
    auto l = full.list(i);
    d.counts[i] = static_cast<std::uint32_t>(l.size());
    d.payload.insert(d.payload.end(), l.begin(), l.end());
  }
  d.offsets = exclusive_prefix_sum(d.counts);
  return d;
}

inline VdiFull inflate(const VdiDense& dense) {
  if (dense.counts.size() != dense.list_count()) throw CorruptVdiError("dense VDI count array has wrong length");
  VdiFull full(dense.width, dense.height, dense.n_sup);
  std::uint64_t total = 0;
  for (std::size_t i = 0; i < dense.counts.size(); ++i) {
    if (dense.counts[i] > dense.n_sup)
      throw CorruptVdiError("list " + std::to_string(i) + " holds " + std::to_string(dense.counts[i]) +
                            " supersegments, capacity is " + std::to_string(dense.n_sup));
    total += dense.counts[i];
  }
  if (total != dense.payload.size()) throw CorruptVdiError("dense VDI payload length disagrees with counts");
  const auto offsets = exclusive_prefix_sum(dense.counts);
  for (std::size_t i = 0; i < dense.counts.size(); ++i)
    std::copy_n(dense.payload.begin() + static_cast<std::ptrdiff_t>(offsets[i]), dense.counts[i],
                full.slots(i).begin());
  return full;
}

/// Ray sampling setup shared by full and dense generation. `domain`, when set, restricts each
/// ray to the parameter intervals inside those bricks.
struct GenerationSetup {
  const ScalarVolume& volume;
  const TransferFunction& tf;
  const Camera& camera;
  std::uint32_t n_sup;
  double step;
  std::optional<std::span<const Brick>> domain;
  int max_iters = kDefaultGammaIterations;

  std::vector<Sample> samples_for(std::size_t list) const {
    const Ray ray = ray_for_pixel(camera, static_cast<std::uint32_t>(list % camera.width),
                                  static_cast<std::uint32_t>(list / camera.width));
    if (domain) {
      const auto iv = intersect_domain(ray, volume.grid(), *domain);
      return sample_ray(volume, tf, camera, ray, step, iv);
    }
    const auto range = volume_range(ray, volume.grid(), camera);
    if (!range) return {};
    const Interval whole[] = {*range};
    return sample_ray(volume, tf, camera, ray, step, whole);
  }

  void validate() const {
    if (n_sup < 1) throw InvalidArgument("n_sup must be >= 1");
    if (!(step > 0)) throw InvalidArgument("step must be > 0");
    camera.validate();
  }

  VdiMeta meta() const { return {camera, tf.digest(), volume.digest(), n_sup, step}; }
};

inline std::pair<VdiFull, VdiMeta> generate_full(const GenerationSetup& setup) {
  setup.validate();
  VdiFull full(setup.camera.width, setup.camera.height, setup.n_sup);
  parallel_for(full.list_count(), [&](std::size_t i) {
    const auto samples = setup.samples_for(i);
    const double gamma = gamma_search(samples, setup.n_sup, setup.max_iters);
    const auto built = build_list(samples, gamma, setup.n_sup);
    if (built.list.size() > setup.n_sup)
      throw Error("list " + std::to_string(i) + " needs " + std::to_string(built.list.size()) +
                  " supersegments across domain gaps; full layout capacity is " + std::to_string(setup.n_sup));
    std::copy(built.list.begin(), built.list.end(), full.slots(i).begin());
  });
  return {std::move(full), setup.meta()};
}

inline std::pair<VdiFull, VdiMeta> generate_full(const ScalarVolume& vol, const TransferFunction& tf,
                                                 const Camera& cam, std::uint32_t n_sup, double step) {
  return generate_full(GenerationSetup{vol, tf, cam, n_sup, step, std::nullopt});
}

/// Two-pass dense generation: per-list (gamma, count), exclusive prefix sum, then each list is
/// regenerated with its stored gamma and written at its offset.
/// The dense capacity grows beyond n_sup only if a list needs more supersegments than n_sup to
/// avoid spanning a gap in a non-convex domain.
inline std::pair<VdiDense, VdiMeta> generate_dense(const GenerationSetup& setup) {
  setup.validate();
  VdiDense dense{setup.camera.width, setup.camera.height, setup.n_sup, {}, {}, {}};
  const std::size_t lists = dense.list_count();
  std::vector<double> gammas(lists);
  dense.counts.resize(lists);
  parallel_for(lists, [&](std::size_t i) {
    const auto samples = setup.samples_for(i);
    gammas[i] = gamma_search(samples, setup.n_sup, setup.max_iters);
    dense.counts[i] = static_cast<std::uint32_t>(build_list(samples, gammas[i], setup.n_sup).list.size());
  });
  dense.offsets = exclusive_prefix_sum(dense.counts);
  const std::uint64_t total = lists ? dense.offsets.back() + dense.counts.back() : 0;
  dense.payload.resize(total);
  dense.n_sup = std::max(setup.n_sup, lists ? *std::max_element(dense.counts.begin(), dense.counts.end()) : 0u);
  parallel_for(lists, [&](std::size_t i) {
    const auto built = build_list(setup.samples_for(i), gammas[i], setup.n_sup);
    std::copy(built.list.begin(), built.list.end(),
              dense.payload.begin() + static_cast<std::ptrdiff_t>(dense.offsets[i]));
  });
  return {std::move(dense), setup.meta()};
}

inline std::pair<VdiDense, VdiMeta> generate_dense(const ScalarVolume& vol, const TransferFunction& tf,
                                                   const Camera& cam, std::uint32_t n_sup, double step) {
  return generate_dense(GenerationSetup{vol, tf, cam, n_sup, step, std::nullopt});
}

}  // namespace vdi

#endif  // VDI_VDI_CORE_HPP_
