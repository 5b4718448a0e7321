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

#ifndef VDI_DISTRIBUTED_HPP_
#define VDI_DISTRIBUTED_HPP_

#include <chrono>
#include <condition_variable>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>

#include "vdi/common.hpp"
#include "vdi/dvr.hpp"
#include "vdi/vdi_core.hpp"
#include "vdi/vdi_render.hpp"
#include "vdi/volume.hpp"

namespace vdi {

using Bytes = std::vector<std::byte>;

/// Raised when a collective cannot complete because a PE never submitted its part.
class CollectiveError : public Error {
 public:
  CollectiveError(std::size_t pe, const std::string& what) : Error(what), pe(pe) {}
  std::size_t pe;
};

struct TrafficCounters {
  std::uint64_t sent = 0;
  std::uint64_t received = 0;
};

class Harness;

/// A PE's handle on the harness. Collectives block until every PE has submitted.
class PeContext {
 public:
  std::size_t rank() const { return rank_; }
  std::size_t size() const;

  /// Variable-length personalized exchange: `sends[j]` goes to PE j. Returns one message per
  /// source PE, ordered by source id.
  std::vector<Bytes> all_to_allv(std::vector<Bytes> sends);

  /// Collects one message per PE at `root`, ordered by source id; other PEs receive nothing.
  std::vector<Bytes> gather(Bytes message, std::size_t root = 0);

  const TrafficCounters& traffic() const;

 private:
  friend class Harness;
  PeContext(Harness& h, std::size_t rank) : harness_(h), rank_(rank) {}
  Harness& harness_;
  std::size_t rank_;
};

/// k logical PEs, each running on its own thread with private state. Messages are delivered
/// exactly once; collectives are deterministic because results are keyed by source id.
class Harness {
 public:
  explicit Harness(std::size_t k) : k_(k), traffic_(k), departed_(k, false), submitted_(k), results_(k) {
    if (k < 1) throw InvalidArgument("harness needs at least one PE");
  }

  std::size_t size() const { return k_; }
  const std::vector<TrafficCounters>& traffic() const { return traffic_; }

  /// Runs `body` once per PE concurrently and rethrows the first root-cause failure.
  void run(const std::function<void(PeContext&)>& body) {
    {
      std::lock_guard lock(mutex_);
      std::fill(departed_.begin(), departed_.end(), false);
      for (auto& s : submitted_) s.reset();
      arrived_ = 0;
    }
    std::vector<std::exception_ptr> errors(k_);
    {
      std::vector<std::jthread> threads;
      threads.reserve(k_);
      for (std::size_t pe = 0; pe < k_; ++pe) {
        threads.emplace_back([&, pe] {
          PeContext ctx(*this, pe);
          try {
            body(ctx);
          } catch (...) {
            errors[pe] = std::current_exception();
          }
          depart(pe);
        });
      }
    }
    std::exception_ptr collective_failure;
    for (auto& e : errors) {
      if (!e) continue;
      try {
        std::rethrow_exception(e);
      } catch (const CollectiveError&) {
        if (!collective_failure) collective_failure = e;
      } catch (...) {
        throw;
      }
    }
    if (collective_failure) std::rethrow_exception(collective_failure);
  }

 private:
  friend class PeContext;

  std::vector<Bytes> exchange(std::size_t rank, std::vector<Bytes> sends) {
    if (sends.size() != k_)
      throw InvalidArgument("PE " + std::to_string(rank) + " submitted " + std::to_string(sends.size()) +
                            " messages to all_to_allv, expected " + std::to_string(k_));
    std::unique_lock lock(mutex_);
    check_departures(rank);
    const std::uint64_t my_generation = generation_;
    submitted_[rank] = std::move(sends);
    if (++arrived_ == k_) {
      for (std::size_t dst = 0; dst < k_; ++dst) {
        results_[dst].assign(k_, {});
        for (std::size_t src = 0; src < k_; ++src) {
          auto& msg = (*submitted_[src])[dst];
          traffic_[src].sent += msg.size();
          traffic_[dst].received += msg.size();
          results_[dst][src] = std::move(msg);
        }
      }
      for (auto& s : submitted_) s.reset();
      arrived_ = 0;
      ++generation_;
      cv_.notify_all();
    } else {
      cv_.wait(lock, [&] { return generation_ != my_generation || missing_departed().has_value(); });
      if (generation_ == my_generation) {
        const std::size_t missing = *missing_departed();
        throw CollectiveError(missing, "PE " + std::to_string(missing) +
                                           " left without submitting to the collective; PE " +
                                           std::to_string(rank) + " would deadlock");
      }
    }
    return std::move(results_[rank]);
  }

  std::optional<std::size_t> missing_departed() const {
    for (std::size_t pe = 0; pe < k_; ++pe)
      if (departed_[pe] && !submitted_[pe]) return pe;
    return std::nullopt;
  }

  void check_departures(std::size_t rank) const {
    if (auto pe = missing_departed())
      throw CollectiveError(*pe, "PE " + std::to_string(*pe) + " left before the collective entered by PE " +
                                     std::to_string(rank));
  }

  void depart(std::size_t pe) {
    std::lock_guard lock(mutex_);
    departed_[pe] = true;
    cv_.notify_all();
  }

  std::size_t k_;
  std::vector<TrafficCounters> traffic_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::vector<bool> departed_;
  std::vector<std::optional<std::vector<Bytes>>> submitted_;
  std::vector<std::vector<Bytes>> results_;
  std::size_t arrived_ = 0;
  std::uint64_t generation_ = 0;
};

inline std::size_t PeContext::size() const { return harness_.size(); }
inline std::vector<Bytes> PeContext::all_to_allv(std::vector<Bytes> sends) {
  return harness_.exchange(rank_, std::move(sends));
}
inline std::vector<Bytes> PeContext::gather(Bytes message, std::size_t root) {
  std::vector<Bytes> sends(size());
  sends.at(root) = std::move(message);
  auto received = harness_.exchange(rank_, std::move(sends));
  if (rank_ != root) return {};
  return received;
}
inline const TrafficCounters& PeContext::traffic() const { return harness_.traffic_[rank_]; }

/// Contiguous row-major range [begin, end) of list indices.
struct ImageRegion {
  std::uint32_t begin = 0, end = 0;
  std::uint32_t size() const { return end - begin; }
  friend constexpr bool operator==(ImageRegion, ImageRegion) = default;
};

/// Splits w*h lists into k contiguous ranges whose sizes differ by at most one.
inline std::vector<ImageRegion> partition_image(std::uint32_t w, std::uint32_t h, std::size_t k) {
  if (k < 1) throw InvalidArgument("image partition needs k >= 1");
  const std::uint64_t n = std::uint64_t(w) * h;
  std::vector<ImageRegion> out;
  std::uint64_t begin = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::uint64_t size = n / k + (i < n % k ? 1 : 0);
    out.push_back({static_cast<std::uint32_t>(begin), static_cast<std::uint32_t>(begin + size)});
    begin += size;
  }
  return out;
}

/// Sub-supersegments of one image region produced by one PE; the unit of the exchange.
/// Wire layout: source (u32), region begin (u32), region end (u32), one u32 count per list,
/// then the packed 24-byte supersegments.
struct SubVdiChunk {
  std::uint32_t source = 0;
  ImageRegion region;
  std::vector<std::uint32_t> counts;
  std::vector<std::uint64_t> offsets;
  std::vector<Supersegment> payload;

  static constexpr std::size_t kHeaderBytes = 12;

  std::span<const Supersegment> list(std::size_t local) const {
    return std::span(payload).subspan(offsets[local], counts[local]);
  }
  std::size_t wire_size() const { return kHeaderBytes + 4 * counts.size() + sizeof(Supersegment) * payload.size(); }
  friend bool operator==(const SubVdiChunk&, const SubVdiChunk&) = default;
};

inline SubVdiChunk extract_chunk(const VdiDense& dense, ImageRegion region, std::uint32_t pe) {
  if (region.begin > region.end || region.end > dense.list_count())
    throw InvalidArgument("region [" + std::to_string(region.begin) + ", " + std::to_string(region.end) +
                          ") outside the viewport");
  SubVdiChunk c{pe, region, {}, {}, {}};
  c.counts.assign(dense.counts.begin() + region.begin, dense.counts.begin() + region.end);
  c.offsets = exclusive_prefix_sum(c.counts);
  if (region.size() > 0) {
    const auto first = dense.offsets[region.begin];
    const auto last = dense.offsets[region.end - 1] + dense.counts[region.end - 1];
    c.payload.assign(dense.payload.begin() + static_cast<std::ptrdiff_t>(first),
                     dense.payload.begin() + static_cast<std::ptrdiff_t>(last));
  }
  return c;
}

inline Bytes encode_chunk(const SubVdiChunk& c) {
  ByteWriter w;
  w.put(c.source);
  w.put(c.region.begin);
  w.put(c.region.end);
  w.put_bytes(std::as_bytes(std::span(c.counts)));
  w.put_bytes(std::as_bytes(std::span(c.payload)));
  return w.take();
}

inline SubVdiChunk decode_chunk(std::span<const std::byte> bytes) {
  ByteReader r(bytes, "sub-VDI chunk");
  SubVdiChunk c;
  c.source = r.get<std::uint32_t>();
  c.region.begin = r.get<std::uint32_t>();
  c.region.end = r.get<std::uint32_t>();
  if (c.region.end < c.region.begin) throw Error("sub-VDI chunk: region end before begin");
  c.counts.resize(c.region.size());
  const auto counts = r.take(4 * c.counts.size());
  std::memcpy(c.counts.data(), counts.data(), counts.size());
  c.offsets = exclusive_prefix_sum(c.counts);
  const std::uint64_t total = c.counts.empty() ? 0 : c.offsets.back() + c.counts.back();
  if (r.remaining() != total * sizeof(Supersegment)) throw Error("sub-VDI chunk: payload length disagrees with counts");
  c.payload.resize(total);
  std::memcpy(c.payload.data(), r.take(r.remaining()).data(), total * sizeof(Supersegment));
  return c;
}

/// Personalized exchange of chunks: `sends[src][dst]` is delivered to PE dst. Returns, per PE,
/// the k received chunks ordered by source id.
inline std::vector<std::vector<SubVdiChunk>> all_to_all_exchange(Harness& harness,
                                                                 const std::vector<std::vector<SubVdiChunk>>& sends) {
  const std::size_t k = harness.size();
  std::vector<std::vector<SubVdiChunk>> received(k);
  harness.run([&](PeContext& pe) {
    if (pe.rank() >= sends.size() || sends[pe.rank()].size() != k)
      throw CollectiveError(pe.rank(), "PE " + std::to_string(pe.rank()) + " has no complete submission (" +
                                           std::to_string(pe.rank() < sends.size() ? sends[pe.rank()].size() : 0) +
                                           " of " + std::to_string(k) + " chunks)");
    std::vector<Bytes> out;
    for (const auto& c : sends[pe.rank()]) out.push_back(encode_chunk(c));
    for (const auto& msg : pe.all_to_allv(std::move(out))) received[pe.rank()].push_back(decode_chunk(msg));
  });
  return received;
}

struct MergeResult {
  std::vector<Supersegment> list;
  std::size_t overlaps_resolved = 0;
};

/// k-way merge of per-source depth-sorted lists by t_front, ties to the lower source index.
/// A segment starting inside its predecessor (possible only from boundary rounding) is
/// truncated to start at the predecessor's back.
inline MergeResult merge_streams(std::span<const std::span<const Supersegment>> sources) {
  MergeResult out;
  std::vector<std::size_t> head(sources.size(), 0);
  std::size_t total = 0;
  for (auto s : sources) total += s.size();
  out.list.reserve(total);
  for (std::size_t n = 0; n < total; ++n) {
    std::size_t best = sources.size();
    for (std::size_t src = 0; src < sources.size(); ++src) {
      if (head[src] == sources[src].size()) continue;
      if (best == sources.size() || sources[src][head[src]].t_front < sources[best][head[best]].t_front) best = src;
    }
    Supersegment s = sources[best][head[best]++];
    if (!out.list.empty() && s.t_front < out.list.back().t_back) {
      ++out.overlaps_resolved;
      s.t_front = out.list.back().t_back;
      if (!(s.t_front < s.t_back)) s.t_back = std::nextafter(s.t_front, std::numeric_limits<float>::infinity());
    }
    out.list.push_back(s);
  }
  return out;
}

/// Recombines depth-ordered sub-supersegments into at most `n_sup` supersegments. Each input
/// is one sample carrying its stored color and opacity; gaps between inputs are empty space.
/// For the split criterion an input's opacity is normalized to `reference_length` so inputs of
/// different lengths compare by density.
inline std::vector<Supersegment> recomposite_list(std::span<const Supersegment> ordered, std::size_t n_sup,
                                                  double reference_length, int max_iters = kDefaultGammaIterations) {
  std::vector<Sample> samples;
  samples.reserve(ordered.size());
  for (std::size_t i = 0; i < ordered.size(); ++i) {
    const Supersegment& s = ordered[i];
    Sample smp;
    smp.t_front = s.t_front;
    smp.t_back = s.t_back;
    smp.value = s.rgba();
    const double a = adjusted_opacity(s.a, s.length(), reference_length);
    const double scale = s.a > 0 ? a / s.a : 0.0;
    smp.probe = {s.r * scale, s.g * scale, s.b * scale, a};
    smp.contiguous = i > 0 && ordered[i - 1].t_back == s.t_front;
    samples.push_back(smp);
  }
  const double gamma = gamma_search(samples, n_sup, max_iters);
  return build_list(samples, gamma, n_sup).list;
}

/// Phase 1 on one PE: a dense sub-VDI of the PE's own bricks at full viewport resolution.
inline VdiDense phase1_generate(std::size_t pe, const ScalarVolume& vol, const TransferFunction& tf,
                                const Camera& cam, const DomainDecomposition& decomposition, std::uint32_t n_sup,
                                double step, int max_iters = kDefaultGammaIterations) {
  if (pe >= decomposition.pe_count())
    throw InvalidArgument("PE " + std::to_string(pe) + " outside decomposition of " +
                          std::to_string(decomposition.pe_count()));
  GenerationSetup setup{vol, tf, cam, n_sup, step, std::span<const Brick>(decomposition.bricks_per_pe[pe]), max_iters};
  return generate_dense(setup).first;
}

struct StageTimings {
  double generation_s = 0, distribution_s = 0, compositing_s = 0, gather_s = 0;
};

struct PeMetrics {
  std::uint64_t sub_supersegments = 0;
  std::uint64_t exchange_sent_bytes = 0, exchange_received_bytes = 0;
  std::uint64_t gather_sent_bytes = 0;
  std::uint64_t overlaps_resolved = 0;
  StageTimings timings;
};

struct CompositeMetrics {
  std::size_t k = 0;
  std::uint32_t width = 0, height = 0, n_sup = 0;
  std::vector<PeMetrics> pes;
  StageTimings timings;  // slowest PE per stage

  std::uint64_t exchange_bytes() const {
    std::uint64_t total = 0;
    for (const auto& p : pes) total += p.exchange_sent_bytes;
    return total;
  }
  /// What the exchange would move if every PE sent full-resolution sub-VDIs: k*w*h*n_sup*24.
  std::uint64_t full_exchange_bound_bytes() const {
    return std::uint64_t(k) * width * height * n_sup * sizeof(Supersegment);
  }
};

struct CompositeResult {
  VdiFull vdi;
  VdiMeta meta;
  CompositeMetrics metrics;
};

namespace detail {

class StageClock {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

inline void fold_timings(CompositeMetrics& m) {
  for (const auto& p : m.pes) {
    m.timings.generation_s = std::max(m.timings.generation_s, p.timings.generation_s);
    m.timings.distribution_s = std::max(m.timings.distribution_s, p.timings.distribution_s);
    m.timings.compositing_s = std::max(m.timings.compositing_s, p.timings.compositing_s);
    m.timings.gather_s = std::max(m.timings.gather_s, p.timings.gather_s);
  }
}

/// Direct-send distribution of a dense sub-VDI: chunk per destination region, all-to-all.
inline std::vector<SubVdiChunk> distribute(PeContext& pe, const VdiDense& sub, const std::vector<ImageRegion>& regions,
                                           PeMetrics& m) {
  std::vector<Bytes> sends;
  sends.reserve(regions.size());
  for (const auto& region : regions) sends.push_back(encode_chunk(extract_chunk(sub, region, static_cast<std::uint32_t>(pe.rank()))));
  const auto before = pe.traffic();
  auto received = pe.all_to_allv(std::move(sends));
  m.exchange_sent_bytes = pe.traffic().sent - before.sent;
  m.exchange_received_bytes = pe.traffic().received - before.received;
  std::vector<SubVdiChunk> chunks;
  chunks.reserve(received.size());
  for (const auto& msg : received) chunks.push_back(decode_chunk(msg));
  return chunks;
}

inline std::vector<std::span<const Supersegment>> sources_for(const std::vector<SubVdiChunk>& chunks, std::size_t local) {
  std::vector<std::span<const Supersegment>> out;
  out.reserve(chunks.size());
  for (const auto& c : chunks) out.push_back(c.list(local));
  return out;
}

}  // namespace detail

/// Sort-last VDI generation: Phase 1 dense sub-VDIs on every PE, direct-send exchange,
/// per-list merge and recompositing on the owning PE, gather of full-layout lists at PE 0.
inline CompositeResult composite(Harness& harness, const DomainDecomposition& decomposition, const ScalarVolume& vol,
                                 const TransferFunction& tf, const Camera& cam, std::uint32_t n_sup, double step,
                                 int max_iters = kDefaultGammaIterations) {
  const std::size_t k = harness.size();
  if (decomposition.pe_count() != k)
    throw InvalidArgument("decomposition has " + std::to_string(decomposition.pe_count()) + " PEs, harness has " +
                          std::to_string(k));
  GenerationSetup probe{vol, tf, cam, n_sup, step, std::nullopt, max_iters};
  probe.validate();
  const auto regions = partition_image(cam.width, cam.height, k);

  CompositeResult result{VdiFull(cam.width, cam.height, n_sup), probe.meta(), {}};
  result.metrics.k = k;
  result.metrics.width = cam.width;
  result.metrics.height = cam.height;
  result.metrics.n_sup = n_sup;
  result.metrics.pes.resize(k);

  harness.run([&](PeContext& pe) {
    PeMetrics& m = result.metrics.pes[pe.rank()];
    detail::StageClock clock;
    const VdiDense sub = phase1_generate(pe.rank(), vol, tf, cam, decomposition, n_sup, step, max_iters);
    m.sub_supersegments = sub.payload.size();
    m.timings.generation_s = clock.lap();

    const auto chunks = detail::distribute(pe, sub, regions, m);
    m.timings.distribution_s = clock.lap();

    const ImageRegion own = regions[pe.rank()];
    std::vector<Supersegment> lists(std::size_t(own.size()) * n_sup);
    std::vector<std::uint64_t> overlaps(own.size(), 0);
    parallel_for(own.size(), [&](std::size_t local) {
      const auto sources = detail::sources_for(chunks, local);
      const auto merged = merge_streams(sources);
      overlaps[local] = merged.overlaps_resolved;
      const auto list = recomposite_list(merged.list, n_sup, step, max_iters);
      std::copy(list.begin(), list.end(), lists.begin() + static_cast<std::ptrdiff_t>(local * n_sup));
    });
    for (auto o : overlaps) m.overlaps_resolved += o;
    m.timings.compositing_s = clock.lap();

    const auto before = pe.traffic().sent;
    ByteWriter w;
    w.put(own.begin);
    w.put(own.end);
    w.put_bytes(std::as_bytes(std::span(lists)));
    const auto gathered = pe.gather(w.take(), 0);
    m.gather_sent_bytes = pe.traffic().sent - before;
    if (pe.rank() == 0) {
      for (const auto& msg : gathered) {
        ByteReader r(msg, "gathered lists");
        const auto begin = r.get<std::uint32_t>(), end = r.get<std::uint32_t>();
        const auto payload = r.take(std::size_t(end - begin) * n_sup * sizeof(Supersegment));
        std::memcpy(result.vdi.grid.data() + std::size_t(begin) * n_sup, payload.data(), payload.size());
      }
    }
    m.timings.gather_s = clock.lap();
  });
  detail::fold_timings(result.metrics);
  return result;
}

/// Plain-image limit case: one sub-supersegment per ray-domain interval holding the full
/// accumulation of that interval, ordered by depth and composited with `over` at the owner.
inline Image composite_image_limit_case(Harness& harness, const DomainDecomposition& decomposition,
                                        const ScalarVolume& vol, const TransferFunction& tf, const Camera& cam,
                                        double step) {
  const std::size_t k = harness.size();
  if (decomposition.pe_count() != k) throw InvalidArgument("decomposition and harness PE counts differ");
  if (!(step > 0)) throw InvalidArgument("step must be > 0");
  cam.validate();
  const auto regions = partition_image(cam.width, cam.height, k);
  Image image(cam.width, cam.height);

  harness.run([&](PeContext& pe) {
    const auto& bricks = decomposition.bricks_per_pe[pe.rank()];
    VdiDense sub{cam.width, cam.height, 1, std::vector<std::uint32_t>(std::size_t(cam.width) * cam.height), {}, {}};
    std::vector<std::vector<Supersegment>> per_list(sub.list_count());
    parallel_for(sub.list_count(), [&](std::size_t i) {
      const Ray ray = ray_for_pixel(cam, static_cast<std::uint32_t>(i % cam.width), static_cast<std::uint32_t>(i / cam.width));
      const auto intervals = intersect_domain(ray, vol.grid(), bricks);
      for (const Interval& iv : intervals) {
        const Interval one[] = {iv};
        const auto samples = sample_ray(vol, tf, cam, ray, step, one);
        if (samples.empty()) continue;
        Rgba acc;
        for (const Sample& s : samples) acc = over(acc, s.value);
        if (acc.a > 0) per_list[i].push_back(Supersegment::make(samples.front().t_front, samples.back().t_back, acc));
      }
      sub.counts[i] = static_cast<std::uint32_t>(per_list[i].size());
    });
    sub.offsets = exclusive_prefix_sum(sub.counts);
    for (auto& l : per_list) sub.payload.insert(sub.payload.end(), l.begin(), l.end());
    sub.n_sup = std::max<std::uint32_t>(1, *std::max_element(sub.counts.begin(), sub.counts.end()));

    PeMetrics unused;
    const auto chunks = detail::distribute(pe, sub, regions, unused);
    const ImageRegion own = regions[pe.rank()];
    std::vector<std::array<float, 4>> pixels(own.size());
    for (std::size_t local = 0; local < own.size(); ++local) {
      Rgba acc;
      for (const Supersegment& s : merge_streams(detail::sources_for(chunks, local)).list) acc = over(acc, s.rgba());
      pixels[local] = Image::to_pixel(acc);
    }
    ByteWriter w;
    w.put(own.begin);
    w.put_bytes(std::as_bytes(std::span(pixels)));
    const auto gathered = pe.gather(w.take(), 0);
    for (const auto& msg : gathered) {
      ByteReader r(msg, "gathered pixels");
      const auto begin = r.get<std::uint32_t>();
      const auto payload = r.take(r.remaining());
      std::memcpy(image.pixels.data() + begin, payload.data(), payload.size());
    }
  });
  return image;
}

}  // namespace vdi

#endif  // VDI_DISTRIBUTED_HPP_
