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
#include "vdi/distributed.hpp"
#include "vdi/scenes.hpp"
#include "vdi/vdi_render.hpp"

namespace vdi {
namespace {

Supersegment seg(float f, float b, float a = 0.5f) { return {f, b, 0.1f * a, 0.2f * a, 0.3f * a, a}; }

MergeResult merge(const std::vector<std::vector<Supersegment>>& lists) {
  std::vector<std::span<const Supersegment>> spans(lists.begin(), lists.end());
  return merge_streams(spans);
}

TEST(PartitionImage, BalancedRowMajorRegions) {
  EXPECT_EQ(partition_image(4, 2, 2), (std::vector<ImageRegion>{{0, 4}, {4, 8}}));
  EXPECT_EQ(partition_image(7, 3, 1), (std::vector<ImageRegion>{{0, 21}}));
  EXPECT_EQ(partition_image(10, 1, 3), (std::vector<ImageRegion>{{0, 4}, {4, 7}, {7, 10}}));
  const auto many = partition_image(2, 1, 4);
  std::uint32_t covered = 0;
  for (const auto& r : many) covered += r.size();
  EXPECT_EQ(covered, 2u);
  EXPECT_THROW(partition_image(2, 2, 0), InvalidArgument);
}

VdiDense sample_dense() {
  VdiFull full(4, 2, 3);
  const std::uint32_t counts[] = {1, 0, 3, 2, 0, 0, 1, 2};
  for (std::size_t i = 0; i < 8; ++i)
    for (std::uint32_t j = 0; j < counts[i]; ++j) full.slots(i)[j] = seg(float(i + j), float(i + j) + 0.5f);
  return densify(full);
}

TEST(Chunks, ConcatenationRecoversTheSubVdi) {
  const VdiDense d = sample_dense();
  for (std::size_t k : {1u, 2u, 3u, 5u}) {
    std::vector<Supersegment> payload;
    std::vector<std::uint32_t> counts;
    for (const auto& region : partition_image(4, 2, k)) {
      const auto c = extract_chunk(d, region, 0);
      EXPECT_EQ(c.wire_size(), SubVdiChunk::kHeaderBytes + 4 * c.counts.size() + 24 * c.payload.size());
      EXPECT_EQ(encode_chunk(c).size(), c.wire_size());
      EXPECT_EQ(decode_chunk(encode_chunk(c)), c);
      payload.insert(payload.end(), c.payload.begin(), c.payload.end());
      counts.insert(counts.end(), c.counts.begin(), c.counts.end());
    }
    EXPECT_EQ(payload, d.payload);
    EXPECT_EQ(counts, d.counts);
  }
}

TEST(Chunks, EmptyRegionHasOnlyHeader) {
  const auto c = extract_chunk(sample_dense(), {4, 6}, 2);
  EXPECT_EQ(c.counts, (std::vector<std::uint32_t>{0, 0}));
  EXPECT_TRUE(c.payload.empty());
  EXPECT_EQ(c.wire_size(), SubVdiChunk::kHeaderBytes + 8);
  const auto none = extract_chunk(sample_dense(), {3, 3}, 1);
  EXPECT_EQ(none.wire_size(), SubVdiChunk::kHeaderBytes);
}

TEST(Chunks, CorruptMessagesAreRejected) {
  auto bytes = encode_chunk(extract_chunk(sample_dense(), {0, 8}, 0));
  bytes.pop_back();
  EXPECT_THROW(decode_chunk(bytes), Error);
}

TEST(Exchange, TransposesSendMatrix) {
  const VdiDense d = sample_dense();
  const std::size_t k = 3;
  const auto regions = partition_image(4, 2, k);
  std::vector<std::vector<SubVdiChunk>> sends(k);
  for (std::size_t src = 0; src < k; ++src)
    for (std::size_t dst = 0; dst < k; ++dst) sends[src].push_back(extract_chunk(d, regions[dst], std::uint32_t(src)));
  Harness h(k);
  const auto received = all_to_all_exchange(h, sends);
  std::uint64_t sent = 0, got = 0;
  for (std::size_t dst = 0; dst < k; ++dst) {
    ASSERT_EQ(received[dst].size(), k);
    for (std::size_t src = 0; src < k; ++src) EXPECT_EQ(received[dst][src], sends[src][dst]);
  }
  for (const auto& t : h.traffic()) sent += t.sent, got += t.received;
  EXPECT_EQ(sent, got);
}

TEST(Exchange, SinglePeIsIdentity) {
  const auto c = extract_chunk(sample_dense(), {0, 8}, 0);
  Harness h(1);
  const auto received = all_to_all_exchange(h, {{c}});
  ASSERT_EQ(received.size(), 1u);
  EXPECT_EQ(received[0][0], c);
}

TEST(Exchange, MissingSubmissionNamesThePe) {
  const VdiDense d = sample_dense();
  const auto regions = partition_image(4, 2, 3);
  std::vector<std::vector<SubVdiChunk>> sends(3);
  for (std::size_t src : {0u, 2u})
    for (const auto& r : regions) sends[src].push_back(extract_chunk(d, r, std::uint32_t(src)));
  Harness h(3);
  try {
    all_to_all_exchange(h, sends);
    FAIL() << "exchange completed without PE 1";
  } catch (const CollectiveError& e) {
    EXPECT_EQ(e.pe, 1u);
  }
}

TEST(Harness, GatherCollectsAtRootInSourceOrder) {
  Harness h(4);
  std::vector<Bytes> at_root;
  h.run([&](PeContext& pe) {
    Bytes msg(pe.rank() + 1, std::byte(pe.rank()));
    auto got = pe.gather(std::move(msg), 0);
    if (pe.rank() == 0) at_root = std::move(got);
    else EXPECT_TRUE(got.empty());
  });
  ASSERT_EQ(at_root.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(at_root[i], Bytes(i + 1, std::byte(i)));
}

TEST(Harness, FailureOnOnePeReleasesTheOthers) {
  Harness h(3);
  EXPECT_THROW(h.run([](PeContext& pe) {
                 if (pe.rank() == 2) throw Error("PE 2 crashed");
                 pe.all_to_allv(std::vector<Bytes>(3));
               }),
               Error);
}

TEST(MergeStreams, Examples) {
  EXPECT_TRUE(merge({}).list.empty());
  EXPECT_TRUE(merge({{}, {}}).list.empty());
  const auto r = merge({{seg(0, 1), seg(4, 5)}, {seg(2, 3)}});
  ASSERT_EQ(r.list.size(), 3u);
  EXPECT_EQ(r.list[1], seg(2, 3));
  EXPECT_EQ(r.overlaps_resolved, 0u);
  const auto tie = merge({{seg(1, 2, 0.1f)}, {seg(1, 2, 0.9f)}});
  EXPECT_EQ(tie.list[0].a, 0.1f);
  EXPECT_EQ(tie.overlaps_resolved, 1u);
  EXPECT_LT(tie.list[1].t_front, tie.list[1].t_back);
}

TEST(MergeStreams, TruncatesOverlapToPredecessorBack) {
  const auto r = merge({{seg(0, 2)}, {seg(1.5f, 3)}});
  ASSERT_EQ(r.list.size(), 2u);
  EXPECT_EQ(r.list[1].t_front, 2.0f);
  EXPECT_EQ(r.list[1].t_back, 3.0f);
}

// Property: on disjoint random inputs the k-way merge equals a stable sort by (t_front, source).
TEST(MergeStreams, MatchesSortOracle) {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t k = 1 + rng() % 6;
    std::vector<float> cuts(2 * (rng() % 12));
    float t = 0;
    for (auto& c : cuts) c = t += 0.25f * float(1 + rng() % 4);
    std::vector<std::vector<Supersegment>> lists(k);
    for (std::size_t i = 0; i + 1 < cuts.size(); i += 2) lists[rng() % k].push_back(seg(cuts[i], cuts[i + 1], 0.1f * float(i % 9 + 1)));
    const auto r = merge(lists);
    ASSERT_EQ(r.list, oracle::sorted_merge(lists)) << "trial " << trial;
    ASSERT_EQ(r.overlaps_resolved, 0u);
  }
}

TEST(RecompositeList, FittingListPassesThrough) {
  EXPECT_TRUE(recomposite_list({}, 4, 0.1).empty());
  const std::vector<Supersegment> one{seg(1, 2, 0.3f)};
  EXPECT_EQ(recomposite_list(one, 4, 0.1), one);
  const std::vector<Supersegment> apart{seg(1, 2, 0.3f), seg(3, 4, 0.6f), seg(5, 6, 0.2f)};
  EXPECT_EQ(recomposite_list(apart, 3, 0.1), apart);
}

TEST(RecompositeList, ContiguousPairsCollapseUnderBudget) {
  // three touching pairs with matching densities, separated by gaps
  std::vector<Supersegment> in;
  for (int p = 0; p < 3; ++p) {
    const float base = 3.0f * p;
    in.push_back(Supersegment::make(base, base + 1, {0.1, 0.1, 0.1, 0.4}));
    in.push_back(Supersegment::make(base + 1, base + 2, {0.1, 0.1, 0.1, 0.4}));
  }
  const auto out = recomposite_list(in, 3, 1.0);
  ASSERT_EQ(out.size(), 3u);
  for (int p = 0; p < 3; ++p) {
    EXPECT_EQ(out[p].t_front, 3.0f * p);
    EXPECT_EQ(out[p].t_back, 3.0f * p + 2);
    EXPECT_NEAR(out[p].a, 1 - 0.6 * 0.6, 1e-6);
  }
}

TEST(RecompositeList, CompositingIsPreserved) {
  std::mt19937 rng(9);
  std::uniform_real_distribution<float> u(0.05f, 0.9f);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Supersegment> in;
    float t = 0;
    for (int i = 0; i < 12; ++i) {
      const float len = 0.1f * float(1 + rng() % 5);
      const float a = u(rng);
      in.push_back({t, t + len, a * u(rng), a * u(rng), a * u(rng), a});
      t += len + (rng() % 3 == 0 ? 0.3f : 0.0f);
    }
    Rgba truth, got;
    for (const auto& s : in) truth = over(truth, s.rgba());
    const auto out = recomposite_list(in, 1 + rng() % 5, 0.1);
    for (const auto& s : out) got = over(got, s.rgba());
    EXPECT_NEAR(got.a, truth.a, 1e-5);
    EXPECT_NEAR(got.r, truth.r, 1e-5);
  }
}

struct Scene {
  ScalarVolume vol = scenes::two_shells({32, 32, 32});
  TransferFunction tf = scenes::default_transfer_function();
  Camera cam = scenes::default_camera(24, 24);
  double step = 1.0 / 32;
};

TEST(Phase1, BricksOutsideTheFrustumYieldNothing) {
  Scene s;
  s.cam = Camera::look_at({0, 0, -2}, {0, 3, 0}, {0, 1, 0}, 20, 8, 8, 0.1, 10);
  const auto d = make_slab_decomposition(s.vol.dims(), 2);
  for (std::size_t pe = 0; pe < 2; ++pe) EXPECT_TRUE(phase1_generate(pe, s.vol, s.tf, s.cam, d, 4, s.step).payload.empty());
  EXPECT_THROW(phase1_generate(2, s.vol, s.tf, s.cam, d, 4, s.step), InvalidArgument);
}

TEST(Phase1, InterleavedSubVdiStaysInsideOwnBricks) {
  Scene s;
  const auto d = make_interleaved_decomposition(s.vol.dims(), 2, 4);
  for (std::size_t pe = 0; pe < 2; ++pe) {
    const VdiDense sub = phase1_generate(pe, s.vol, s.tf, s.cam, d, 16, s.step);
    std::size_t multi_interval_lists = 0;
    for (std::size_t i = 0; i < sub.list_count(); ++i) {
      const Ray ray = ray_for_pixel(s.cam, i % s.cam.width, i / s.cam.width);
      const auto intervals = intersect_domain(ray, s.vol.grid(), d.bricks_per_pe[pe]);
      multi_interval_lists += intervals.size() > 1;
      for (const auto& sg : sub.list(i)) {
        const bool inside = std::any_of(intervals.begin(), intervals.end(), [&](const Interval& iv) {
          return sg.t_front >= float(iv.enter) - 1e-5f && sg.t_back <= float(iv.exit) + 1e-5f;
        });
        EXPECT_TRUE(inside) << "pe " << pe << " list " << i;
      }
    }
    EXPECT_GT(multi_interval_lists, 0u);
  }
}

// A ray that leaves PE 0's domain, crosses PE 1 and re-enters PE 0 keeps the correct order.
TEST(Composite, RayReenteringADomainComposesInOrder) {
  Scene s;
  const auto d = make_interleaved_decomposition(s.vol.dims(), 2, 8);
  Harness h(2);
  const auto result = composite(h, d, s.vol, s.tf, s.cam, 64, s.step);
  const Image dvr = render_dvr(s.vol, s.tf, s.cam, s.step, 1.0);
  EXPECT_LE(max_abs_difference(render_original(result.vdi), dvr), 1e-4);
}

TEST(Composite, SinglePeMatchesDirectGeneration) {
  Scene s;
  Harness h(1);
  const auto result = composite(h, make_slab_decomposition(s.vol.dims(), 1), s.vol, s.tf, s.cam, 6, s.step);
  const auto direct = generate_full(s.vol, s.tf, s.cam, 6, s.step);
  EXPECT_LE(max_abs_difference(render_original(result.vdi), render_original(direct.first)), 1e-5);
  EXPECT_EQ(result.meta, direct.second);
}

TEST(Composite, MatchesDvrForSlabAndInterleaved) {
  Scene s;
  const Image dvr = render_dvr(s.vol, s.tf, s.cam, s.step, 1.0);
  for (const auto& d : {make_slab_decomposition(s.vol.dims(), 4), make_interleaved_decomposition(s.vol.dims(), 4, 2)}) {
    Harness h(4);
    const auto result = composite(h, d, s.vol, s.tf, s.cam, 8, s.step);
    const Image img = render_original(result.vdi);
    EXPECT_LE(max_abs_difference(img, dvr), 1e-4);
    for (std::size_t i = 0; i < result.vdi.list_count(); ++i) EXPECT_LE(result.vdi.list(i).size(), 8u);
  }
}

TEST(Composite, IsDeterministic) {
  Scene s;
  const auto d = make_interleaved_decomposition(s.vol.dims(), 4, 3);
  Harness h1(4), h2(4);
  const auto a = composite(h1, d, s.vol, s.tf, s.cam, 4, s.step);
  const auto b = composite(h2, d, s.vol, s.tf, s.cam, 4, s.step);
  EXPECT_EQ(a.vdi, b.vdi);
}

TEST(Composite, WithoutReductionResultIsIndependentOfK) {
  Scene s;
  std::optional<Image> first;
  for (std::size_t k : {1u, 2u, 4u}) {
    Harness h(k);
    const Image img = render_original(composite(h, make_slab_decomposition(s.vol.dims(), k), s.vol, s.tf, s.cam, 64, s.step).vdi);
    if (first) EXPECT_LE(max_abs_difference(img, *first), 1e-5) << "k=" << k;
    else first = img;
  }
}

TEST(Composite, ExchangeByteAccounting) {
  Scene s;
  const std::size_t k = 4;
  Harness h(k);
  const auto d = make_slab_decomposition(s.vol.dims(), k);
  const auto result = composite(h, d, s.vol, s.tf, s.cam, 8, s.step);
  const auto regions = partition_image(s.cam.width, s.cam.height, k);
  std::uint64_t expected = 0;
  for (std::size_t pe = 0; pe < k; ++pe) {
    const auto sub = phase1_generate(pe, s.vol, s.tf, s.cam, d, 8, s.step);
    EXPECT_EQ(result.metrics.pes[pe].sub_supersegments, sub.payload.size());
    for (const auto& r : regions) expected += extract_chunk(sub, r, 0).wire_size();
  }
  EXPECT_EQ(result.metrics.exchange_bytes(), expected);
  EXPECT_LT(result.metrics.exchange_bytes(), result.metrics.full_exchange_bound_bytes());
  EXPECT_EQ(result.metrics.full_exchange_bound_bytes(), std::uint64_t(k) * 24 * 24 * 8 * 24);
}

TEST(Composite, RejectsMismatchedPeCounts) {
  Scene s;
  Harness h(2);
  EXPECT_THROW(composite(h, make_slab_decomposition(s.vol.dims(), 3), s.vol, s.tf, s.cam, 4, s.step), InvalidArgument);
}

TEST(LimitCase, EqualsDvr) {
  Scene s;
  const Image dvr = render_dvr(s.vol, s.tf, s.cam, s.step, 1.0);
  for (std::size_t k : {1u, 2u, 3u}) {
    Harness h(k);
    const auto d = k == 1 ? make_slab_decomposition(s.vol.dims(), 1) : make_interleaved_decomposition(s.vol.dims(), k, 3);
    EXPECT_LE(max_abs_difference(composite_image_limit_case(h, d, s.vol, s.tf, s.cam, s.step), dvr), 1e-4) << "k=" << k;
  }
}

}  // namespace
}  // namespace vdi
