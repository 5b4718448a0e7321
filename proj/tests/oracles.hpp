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

// Independent reference computations used as test oracles. Nothing here calls the code paths
// it is used to check.

#ifndef VDI_TESTS_ORACLES_HPP_
#define VDI_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "vdi/dvr.hpp"
#include "vdi/vdi_core.hpp"

namespace vdi::oracle {

inline std::vector<std::uint64_t> running_offsets(const std::vector<std::uint32_t>& counts) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    std::uint64_t sum = 0;
    for (std::size_t j = 0; j < i; ++j) sum += counts[j];
    out.push_back(sum);
  }
  return out;
}

/// Back-to-front accumulation, an algebraically different route to front-to-back `over`.
inline Rgba composite_back_to_front(const std::vector<Rgba>& front_to_back) {
  Rgba acc;
  for (auto it = front_to_back.rbegin(); it != front_to_back.rend(); ++it) {
    const double t = 1.0 - it->a;
    acc = {it->r + t * acc.r, it->g + t * acc.g, it->b + t * acc.b, it->a + t * acc.a};
  }
  return acc;
}

/// Concatenate-then-stable-sort merge keyed by (t_front, source).
inline std::vector<Supersegment> sorted_merge(const std::vector<std::vector<Supersegment>>& sources) {
  std::vector<std::pair<std::size_t, Supersegment>> all;
  for (std::size_t s = 0; s < sources.size(); ++s)
    for (const auto& seg : sources[s]) all.emplace_back(s, seg);
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    if (a.second.t_front != b.second.t_front) return a.second.t_front < b.second.t_front;
    return a.first < b.first;
  });
  std::vector<Supersegment> out;
  for (auto& [s, seg] : all) out.push_back(seg);
  return out;
}

/// Smallest gamma on a uniform grid whose supersegment count fits the budget, found by
/// scanning every grid value with a caller-supplied counter.
template <typename Counter>
double gamma_scan(Counter&& count, std::size_t n_sup, double resolution = 1e-3, double gamma_max = 2.0) {
  for (double g = 0.0; g <= gamma_max + 1e-12; g += resolution)
    if (count(g) <= n_sup) return g;
  return gamma_max;
}

/// Windowed SSIM from raw moments (E[xy] - E[x]E[y]) in long double on straight luminance;
/// same window layout and constants as the library's definition.
inline double ssim_from_moments(const Image& a, const Image& b) {
  const auto lum = [](const std::array<float, 4>& p) {
    return 0.299L * p[0] + 0.587L * p[1] + 0.114L * p[2];
  };
  const std::uint32_t wx = std::min<std::uint32_t>(8, a.width), wy = std::min<std::uint32_t>(8, a.height);
  long double total = 0;
  int windows = 0;
  for (std::uint32_t y0 = 0; y0 + wy <= a.height; y0 += wy)
    for (std::uint32_t x0 = 0; x0 + wx <= a.width; x0 += wx) {
      long double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
      for (std::uint32_t y = y0; y < y0 + wy; ++y)
        for (std::uint32_t x = x0; x < x0 + wx; ++x) {
          const long double p = lum(a.at(x, y)), q = lum(b.at(x, y));
          sx += p, sy += q, sxx += p * p, syy += q * q, sxy += p * q;
        }
      const long double n = wx * wy;
      const long double mx = sx / n, my = sy / n;
      const long double vx = sxx / n - mx * mx, vy = syy / n - my * my, cxy = sxy / n - mx * my;
      const long double c1 = 1e-4L, c2 = 9e-4L;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  return static_cast<double>(total / windows);
}

inline double psnr_long_double(const Image& a, const Image& b) {
  long double se = 0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i)
    for (int c = 0; c < 3; ++c) {
      const long double d = (long double)a.pixels[i][c] - (long double)b.pixels[i][c];
      se += d * d;
    }
  const long double mse = se / (3.0L * a.pixels.size());
  return static_cast<double>(-10.0L * std::log10(mse));
}

}  // namespace vdi::oracle

#endif  // VDI_TESTS_ORACLES_HPP_
