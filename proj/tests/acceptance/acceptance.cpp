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

// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <unistd.h>

#include "oracles.hpp"
#include "vdi/distributed.hpp"
#include "vdi/scenes.hpp"
#include "vdi/vdi_file.hpp"
#include "vdi/vdi_render.hpp"

namespace {

using namespace vdi;
namespace fs = std::filesystem;

struct Outcome {
  bool pass;
  std::string detail;
};

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

constexpr double kStep64 = 1.0 / 64;

Outcome exact_view() {
  Stopwatch sw;
  const auto tf = scenes::default_transfer_function();
  const auto cam = scenes::default_camera(64, 64);
  const ScalarVolume vols[] = {scenes::two_shells({64, 64, 64}), scenes::axis_gradient({64, 64, 64}),
                               scenes::random_blobs({64, 64, 64}, 17)};
  double worst = 0;
  for (const auto& vol : vols) {
    const Image dvr = render_dvr(vol, tf, cam, kStep64, 1.0);
    for (std::uint32_t n_sup : {4u, 8u, 32u})
      worst = std::max(worst, max_abs_difference(render_original(generate_full(vol, tf, cam, n_sup, kStep64).first), dvr));
  }
  const double t = sw.seconds();
  return {worst <= 1e-4 && t < 30, fmt("max |diff| %.3g (tol 1e-4) over 3 scenes x n_sup {4,8,32}; %.1f s (limit 30 s)", worst, t)};
}

Outcome dense_full_equivalence() {
  Stopwatch sw;
  std::mt19937_64 rng(20240601);
  const auto tf = scenes::default_transfer_function();
  int equal = 0, round_trips = 0;
  for (int i = 0; i < 20; ++i) {
    const auto vol = scenes::random_blobs({32, 32, 32}, rng(), 4 + int(rng() % 12));
    const Camera cam = scenes::default_camera(24 + rng() % 16, 24 + rng() % 16, 1.8 + 0.1 * double(rng() % 8))
                           .orbited({0, 0, 0}, double(rng() % 360));
    const std::uint32_t n_sup = 1 + rng() % 8;
    const double step = 1.0 / double(24 + rng() % 40);
    const auto [full, meta] = generate_full(vol, tf, cam, n_sup, step);
    const auto dense = generate_dense(vol, tf, cam, n_sup, step).first;
    equal += inflate(dense) == full;
    for (bool compress : {false, true})
      for (const AnyVdi& v : {AnyVdi(full), AnyVdi(dense)}) {
        const auto bytes = encode_vdi(v, meta, compress);
        const auto [back, back_meta] = decode_vdi(bytes);
        round_trips += back == v && back_meta == meta && encode_vdi(back, back_meta, compress) == bytes;
      }
  }
  const double t = sw.seconds();
  return {equal == 20 && round_trips == 80 && t < 60,
          fmt("%d/20 scenes inflate-equal, %d/80 file round trips bit-exact; %.1f s (limit 60 s)", equal, round_trips, t)};
}

Outcome k_invariance() {
  Stopwatch sw;
  // three thin modulated sheets facing the camera, placed on slab boundaries for k = 2, 4 and 8
  const auto vol = scenes::tabulate({64, 64, 64}, [](Vec3 p) {
    double v = 0;
    for (double z : {-0.25, 0.0, 0.25}) v += std::exp(-std::pow((p.z - z) / 0.02, 2));
    return v * (0.65 + 0.3 * std::cos(7 * p.x) * std::cos(5 * p.y));
  });
  const auto tf = scenes::default_transfer_function();
  const auto cam = scenes::default_camera(48, 48);
  // the scene qualifies only if no ray carries more than 16 samples with content
  std::size_t max_content = 0;
  const GenerationSetup setup{vol, tf, cam, 64, kStep64, std::nullopt};
  for (std::size_t i = 0; i < std::size_t(cam.width) * cam.height; ++i) {
    std::size_t n = 0;
    for (const auto& s : setup.samples_for(i)) n += s.value.a > 0;
    max_content = std::max(max_content, n);
  }
  std::vector<Image> images;
  for (std::size_t k : {1u, 2u, 4u, 8u}) {
    Harness h(k);
    images.push_back(render_original(composite(h, make_slab_decomposition(vol.dims(), k), vol, tf, cam, 64, kStep64).vdi));
  }
  double worst = 0;
  for (std::size_t a = 0; a < images.size(); ++a)
    for (std::size_t b = a + 1; b < images.size(); ++b) worst = std::max(worst, max_abs_difference(images[a], images[b]));
  const double t = sw.seconds();
  return {max_content <= 16 && worst <= 1e-5 && t < 120,
          fmt("k in {1,2,4,8} slab, n_sup 64, max content samples/ray %zu (<= 16); pairwise max |diff| %.3g (tol 1e-5); "
              "%.1f s (limit 120 s)",
              max_content, worst, t)};
}

Outcome non_convex() {
  const auto vol = scenes::random_blobs({64, 64, 64}, 5);
  const auto tf = scenes::default_transfer_function();
  const auto cam = scenes::default_camera(48, 48);
  const Image dvr = render_dvr(vol, tf, cam, kStep64, 1.0);
  double limit_worst = 0, composite_worst = 0, ssim_min = 1;
  for (std::size_t k : {2u, 3u}) {
    const auto d = make_interleaved_decomposition(vol.dims(), k, 4);
    Harness h(k);
    limit_worst = std::max(limit_worst, max_abs_difference(composite_image_limit_case(h, d, vol, tf, cam, kStep64), dvr));
    const Image img = render_original(composite(h, d, vol, tf, cam, 8, kStep64).vdi);
    composite_worst = std::max(composite_worst, max_abs_difference(img, dvr));
    ssim_min = std::min(ssim_min, ssim(img, dvr));
  }
  return {limit_worst <= 1e-4 && ssim_min >= 0.99,
          fmt("interleaved k in {2,3}: limit case max |diff| %.3g (tol 1e-4); full composite SSIM %.5f (>= 0.99), "
              "max |diff| %.3g",
              limit_worst, ssim_min, composite_worst)};
}

Outcome lossy_reduction() {
  const auto vol = scenes::random_blobs({64, 64, 64}, 99, 24);
  const auto tf = scenes::default_transfer_function();
  const auto cam = scenes::default_camera(64, 64);
  const std::uint32_t n_sup = 8;
  const std::size_t k = 8;
  const auto d = make_slab_decomposition(vol.dims(), k);
  // lists whose incoming sub-supersegments exceed the budget must be reduced by recompositing
  std::vector<std::uint32_t> incoming(std::size_t(cam.width) * cam.height, 0);
  for (std::size_t pe = 0; pe < k; ++pe) {
    const auto sub = phase1_generate(pe, vol, tf, cam, d, n_sup, kStep64);
    for (std::size_t i = 0; i < incoming.size(); ++i) incoming[i] += sub.counts[i];
  }
  const auto reduced = std::count_if(incoming.begin(), incoming.end(), [&](auto c) { return c > n_sup; });
  Harness h1(1), hk(k);
  const auto one = composite(h1, make_slab_decomposition(vol.dims(), 1), vol, tf, cam, n_sup, kStep64).vdi;
  const auto many = composite(hk, d, vol, tf, cam, n_sup, kStep64).vdi;
  const double s0 = ssim(render_original(many), render_original(one));
  const Camera moved = cam.orbited(orbit_pivot(one, cam), 5.0);
  const double s5 = ssim(render_novel(many, cam, moved, kStep64 / 2), render_novel(one, cam, moved, kStep64 / 2));
  return {reduced > 0 && s0 >= 0.95 && s5 >= 0.95,
          fmt("k 8 vs 1, n_sup 8: %td lists reduced; SSIM %.5f at 0 deg, %.5f at 5 deg (>= 0.95)", reduced, s0, s5)};
}

Outcome exchange_volume() {
  const auto vol = scenes::two_shells({64, 64, 64});
  const auto tf = scenes::default_transfer_function();
  const auto cam = scenes::default_camera(64, 64, 3.0);
  bool below = true;
  double ratio2 = 0, ratio8 = 0;
  std::string per_k;
  for (std::size_t k : {1u, 2u, 4u, 8u}) {
    Harness h(k);
    const auto m = composite(h, make_slab_decomposition(vol.dims(), k), vol, tf, cam, 16, kStep64).metrics;
    const double ratio = double(m.exchange_bytes()) / double(m.full_exchange_bound_bytes());
    below = below && m.exchange_bytes() < m.full_exchange_bound_bytes();
    if (k == 2) ratio2 = ratio;
    if (k == 8) ratio8 = ratio;
    per_k += fmt(" k=%zu %.4f", k, ratio);
  }
  return {below && ratio8 < ratio2,
          fmt("dense:full exchange ratio%s; all below bound: %s; k=8 < k=2: %s", per_k.c_str(), below ? "yes" : "no",
              ratio8 < ratio2 ? "yes" : "no")};
}

Outcome oracle_suites() {
  std::mt19937 rng(7);
  int merge_ok = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t k = 1 + rng() % 6;
    std::vector<std::vector<Supersegment>> lists(k);
    float t = 0;
    for (int i = 0, n = rng() % 12; i < n; ++i) {
      const float f = t += 0.25f * float(1 + rng() % 4);
      t += 0.25f * float(1 + rng() % 4);
      lists[rng() % k].push_back({f, t, 0.1f, 0.1f, 0.1f, 0.2f + 0.05f * float(i % 10)});
    }
    std::vector<std::span<const Supersegment>> spans(lists.begin(), lists.end());
    merge_ok += merge_streams(spans).list == oracle::sorted_merge(lists);
  }

  const auto vol = scenes::random_blobs({32, 32, 32}, 3);
  const auto tf = scenes::default_transfer_function();
  const auto cam = scenes::default_camera(40, 40);
  int rays = 0, gamma_ok = 0;
  const double tol = 1e-3 + kGammaMax / 65536;
  while (rays < 100) {
    const Ray ray = ray_for_pixel(cam, rng() % 40, rng() % 40);
    const auto range = volume_range(ray, vol.grid(), cam);
    if (!range) continue;
    const Interval iv[] = {*range};
    const auto samples = sample_ray(vol, tf, cam, ray, 1.0 / 64, iv);
    if (count_supersegments(samples, 0.0) <= 2) continue;
    ++rays;
    const std::size_t n_sup = 2 + rng() % 3;
    const double scanned = oracle::gamma_scan([&](double g) { return count_supersegments(samples, g); }, n_sup);
    gamma_ok += std::abs(gamma_search(samples, n_sup) - scanned) <= tol;
  }

  bool opacity_ok = adjusted_opacity(0.0, 1.5, 0.7) == 0.0;
  std::uniform_real_distribution<double> u(0.01, 0.99);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), ls = 2 * u(rng), l1 = 2 * u(rng), l2 = 2 * u(rng);
    opacity_ok = opacity_ok && std::abs(adjusted_opacity(a, ls, ls) - a) <= 1e-12 &&
          adjusted_opacity(a, ls, std::min(l1, l2)) <= adjusted_opacity(a, ls, std::max(l1, l2));
  }

  double assoc = 0;
  const auto rgba = [&] {
    const double a = u(rng);
    return Rgba{a * u(rng), a * u(rng), a * u(rng), a};
  };
  for (int i = 0; i < 100000; ++i) {
    const Rgba a = rgba(), b = rgba(), c = rgba();
    const Rgba l = over(over(a, b), c), r = over(a, over(b, c));
    assoc = std::max({assoc, std::abs(l.r - r.r), std::abs(l.g - r.g), std::abs(l.b - r.b), std::abs(l.a - r.a)});
  }
  const Rgba red{0.5, 0, 0, 0.5}, blue{0, 0, 0.5, 0.5};
  const bool witness = !(over(red, blue) == over(blue, red));

  int prefix_ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::uint32_t> counts(rng() % 300);
    for (auto& c : counts) c = rng() % 40;
    prefix_ok += exclusive_prefix_sum(counts) == oracle::running_offsets(counts);
  }
  return {merge_ok == 10000 && gamma_ok == 100 && opacity_ok && assoc <= 1e-6 && witness && prefix_ok == 100,
          fmt("merge %d/10000 exact; gamma %d/100 within %.2g; opacity identities %s; over assoc err %.2g (tol 1e-6), "
              "non-commutative %s; prefix sum %d/100",
              merge_ok, gamma_ok, tol, opacity_ok ? "hold" : "FAIL", assoc, witness ? "yes" : "no", prefix_ok)};
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / ("vdi_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  {
    std::ofstream scene(dir / "scene.json");
    scene << R"({"name": "blobs", "volume": {"kind": "random_blobs", "dims": [48, 48, 48], "seed": 11},
                 "camera": {"width": 48, "height": 48}, "n_sup": 6, "step": 0.03125})";
  }
  int identical = 0;
  std::string detail;
  for (const char* kind : {"slab", "interleaved"}) {
    std::uint64_t hashes[2] = {0, 0};
    for (int run = 0; run < 2; ++run) {
      const fs::path out = dir / fmt("%s_%d.vdi", kind, run);
      const std::string cmd = fmt("%s simulate --scene %s -o %s --k 4 --decomposition %s --period 3 >/dev/null",
                                  VDI_CLI_PATH, (dir / "scene.json").c_str(), out.c_str(), kind);
      if (std::system(cmd.c_str()) != 0 || !fs::exists(out)) break;
      hashes[run] = fnv1a(read_binary_file(out));
    }
    const bool same = hashes[0] != 0 && hashes[0] == hashes[1];
    identical += same;
    detail += fmt(" %s %016llx/%016llx", kind, (unsigned long long)hashes[0], (unsigned long long)hashes[1]);
  }
  fs::remove_all(dir);
  return {identical == 2, fmt("two simulate runs, k 4, root VDI hashes:%s", detail.c_str())};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"exact-view reproduction", exact_view},
      {"dense/full equivalence and file round trip", dense_full_equivalence},
      {"k-PE invariance without reduction", k_invariance},
      {"non-convex domain correctness", non_convex},
      {"lossy reduction quality", lossy_reduction},
      {"exchange volume trend", exchange_volume},
      {"oracle micro-suites", oracle_suites},
      {"determinism", determinism},
  };
  int failures = 0, id = 0;
  for (const auto& [name, check] : criteria) {
    ++id;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
