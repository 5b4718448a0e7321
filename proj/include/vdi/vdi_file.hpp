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

#ifndef VDI_VDI_FILE_HPP_
#define VDI_VDI_FILE_HPP_

// VDI container, all fields little-endian:
//
//   offset  size  field
//   0       4     magic "VDI1"
//   4       2     version (1)
//   6       1     representation: 0 = full, 1 = dense
//   7       1     flags: bit 0 = body is one LZ4 frame
//   8       4     width (u32)
//   12      4     height (u32)
//   16      4     n_sup (u32)
//   20      8     sampling step (f64)
//   28      96    camera: position, forward, up (3 x f64 each), vfov deg, near, far (f64)
//   124     8     transfer-function digest (u64)
//   132     8     volume digest (u64)
//   140     8     body length before compression (u64)
//   148     8     stored body length (u64)
//   156     ...   body
//   end-4   4     CRC-32 (zlib polynomial) of every preceding byte
//
// Body, full:  width*height*n_sup supersegments, list-major.
// Body, dense: width*height counts (u32), then the packed supersegments.
// Supersegment: t_front, t_back, r, g, b, a as f32 (24 bytes), color premultiplied.

#include <zlib.h>

#include <filesystem>
#include <fstream>
#include <memory>
#include <variant>

#include "lz4frame.h"
#include "vdi/common.hpp"
#include "vdi/vdi_core.hpp"

namespace vdi {

using AnyVdi = std::variant<VdiFull, VdiDense>;

inline constexpr std::uint16_t kVdiVersion = 1;
inline constexpr std::size_t kVdiHeaderBytes = 156;

class VdiFormatError : public Error {
 public:
  enum class Kind { kBadMagic, kBadVersion, kChecksum, kCorrupt, kIo };
  VdiFormatError(Kind kind, const std::string& what) : Error(what), kind(kind) {}
  Kind kind;
};

namespace detail {

inline std::uint32_t crc32_of(std::span<const std::byte> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in bounded chunks
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t off = 0; off < bytes.size(); off += kChunk) {
    const auto n = static_cast<uInt>(std::min(kChunk, bytes.size() - off));
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), n);
  }
  return static_cast<std::uint32_t>(crc);
}

inline std::vector<std::byte> lz4_compress(std::span<const std::byte> in) {
  LZ4F_preferences_t prefs{};
  prefs.frameInfo.contentSize = in.size();
  prefs.frameInfo.contentChecksumFlag = LZ4F_contentChecksumEnabled;
  std::vector<std::byte> out(LZ4F_compressFrameBound(in.size(), &prefs));
  const size_t n = LZ4F_compressFrame(out.data(), out.size(), in.data(), in.size(), &prefs);
  if (LZ4F_isError(n)) throw Error(std::string("LZ4 compression failed: ") + LZ4F_getErrorName(n));
  out.resize(n);
  return out;
}

inline std::vector<std::byte> lz4_decompress(std::span<const std::byte> in, std::size_t expected) {
  LZ4F_dctx* ctx = nullptr;
  if (LZ4F_isError(LZ4F_createDecompressionContext(&ctx, LZ4F_VERSION)))
    throw Error("cannot create LZ4 decompression context");
  std::unique_ptr<LZ4F_dctx, decltype(&LZ4F_freeDecompressionContext)> guard(ctx, LZ4F_freeDecompressionContext);
  std::vector<std::byte> out(expected);
  std::size_t in_pos = 0, out_pos = 0;
  size_t hint = 1;
  while (hint != 0) {
    size_t src = in.size() - in_pos, dst = out.size() - out_pos;
    if (src == 0) throw VdiFormatError(VdiFormatError::Kind::kCorrupt, "LZ4 frame ends early");
    hint = LZ4F_decompress(ctx, out.data() + out_pos, &dst, in.data() + in_pos, &src, nullptr);
    if (LZ4F_isError(hint))
      throw VdiFormatError(VdiFormatError::Kind::kCorrupt, std::string("LZ4 frame: ") + LZ4F_getErrorName(hint));
    in_pos += src;
    out_pos += dst;
    if (src == 0 && dst == 0 && hint != 0)
      throw VdiFormatError(VdiFormatError::Kind::kCorrupt, "LZ4 frame larger than declared body");
  }
  if (out_pos != expected || in_pos != in.size())
    throw VdiFormatError(VdiFormatError::Kind::kCorrupt, "LZ4 frame length disagrees with header");
  return out;
}

inline void put_supersegments(ByteWriter& w, std::span<const Supersegment> s) {
  w.put_bytes(std::as_bytes(s));
}

inline std::vector<Supersegment> get_supersegments(ByteReader& r, std::size_t n) {
  std::vector<Supersegment> out(n);
  const auto bytes = r.take(n * sizeof(Supersegment));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

}  // namespace detail

inline std::vector<std::byte> encode_vdi(const AnyVdi& vdi, const VdiMeta& meta, bool compress) {
  ByteWriter body;
  std::uint32_t w = 0, h = 0, n = 0;
  std::uint8_t repr = 0;
  if (const auto* full = std::get_if<VdiFull>(&vdi)) {
    w = full->width, h = full->height, n = full->n_sup;
    detail::put_supersegments(body, full->grid);
  } else {
    const auto& dense = std::get<VdiDense>(vdi);
    w = dense.width, h = dense.height, n = dense.n_sup, repr = 1;
    if (dense.counts.size() != dense.list_count()) throw CorruptVdiError("dense count array has wrong length");
    body.put_bytes(std::as_bytes(std::span(dense.counts)));
    detail::put_supersegments(body, dense.payload);
  }
  const std::vector<std::byte> raw_body = body.take();
  const std::vector<std::byte> stored = compress ? detail::lz4_compress(raw_body) : raw_body;

  ByteWriter out;
  out.put_bytes(std::as_bytes(std::span("VDI1", 4)));
  out.put(kVdiVersion);
  out.put(repr);
  out.put(static_cast<std::uint8_t>(compress ? 1 : 0));
  out.put(w);
  out.put(h);
  out.put(n);
  out.put(meta.step);
  const Camera& c = meta.camera;
  for (Vec3 v : {c.position, c.forward, c.up}) {
    out.put(v.x);
    out.put(v.y);
    out.put(v.z);
  }
  out.put(c.vfov_deg);
  out.put(c.near);
  out.put(c.far);
  out.put(meta.tf_digest);
  out.put(meta.volume_digest);
  out.put(static_cast<std::uint64_t>(raw_body.size()));
  out.put(static_cast<std::uint64_t>(stored.size()));
  out.put_bytes(stored);
  out.put(detail::crc32_of(out.bytes()));
  return out.take();
}

inline std::pair<AnyVdi, VdiMeta> decode_vdi(std::span<const std::byte> file) {
  using Kind = VdiFormatError::Kind;
  if (file.size() >= 4 && std::memcmp(file.data(), "VDI1", 4) != 0)
    throw VdiFormatError(Kind::kBadMagic, "not a VDI file (bad magic)");
  if (file.size() < kVdiHeaderBytes + 4)
    throw VdiFormatError(Kind::kChecksum, "VDI file truncated: " + std::to_string(file.size()) + " bytes");
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, file.data() + file.size() - 4, 4);
  const auto content = file.first(file.size() - 4);
  if (detail::crc32_of(content) != stored_crc) throw VdiFormatError(Kind::kChecksum, "VDI checksum mismatch");

  ByteReader r(content, "VDI header");
  r.take(4);
  if (const auto version = r.get<std::uint16_t>(); version != kVdiVersion)
    throw VdiFormatError(Kind::kBadVersion, "unsupported VDI version " + std::to_string(version));
  const auto repr = r.get<std::uint8_t>();
  const auto flags = r.get<std::uint8_t>();
  if (repr > 1 || (flags & ~1u) != 0) throw VdiFormatError(Kind::kCorrupt, "unknown representation or flags");
  VdiMeta meta;
  const auto w = r.get<std::uint32_t>(), h = r.get<std::uint32_t>(), n = r.get<std::uint32_t>();
  meta.step = r.get<double>();
  Camera& c = meta.camera;
  for (Vec3* v : {&c.position, &c.forward, &c.up}) {
    v->x = r.get<double>();
    v->y = r.get<double>();
    v->z = r.get<double>();
  }
  c.vfov_deg = r.get<double>();
  c.near = r.get<double>();
  c.far = r.get<double>();
  c.width = w;
  c.height = h;
  meta.n_sup = n;
  meta.tf_digest = r.get<std::uint64_t>();
  meta.volume_digest = r.get<std::uint64_t>();
  const auto body_len = r.get<std::uint64_t>();
  const auto stored_len = r.get<std::uint64_t>();
  if (stored_len != r.remaining()) throw VdiFormatError(Kind::kCorrupt, "stored body length disagrees with file size");
  const auto stored = r.take(stored_len);
  std::vector<std::byte> decompressed;
  std::span<const std::byte> body = stored;
  if (flags & 1u) {
    decompressed = detail::lz4_decompress(stored, body_len);
    body = decompressed;
  } else if (body_len != stored_len) {
    throw VdiFormatError(Kind::kCorrupt, "uncompressed body length mismatch");
  }

  const std::size_t lists = std::size_t(w) * h;
  ByteReader br(body, "VDI body");
  try {
    if (repr == 0) {
      VdiFull full(w, h, n);
      if (body.size() != full.byte_size()) throw VdiFormatError(Kind::kCorrupt, "full VDI body has wrong size");
      full.grid = detail::get_supersegments(br, full.grid.size());
      return {AnyVdi(std::move(full)), meta};
    }
    VdiDense dense{w, h, n, std::vector<std::uint32_t>(lists), {}, {}};
    const auto counts = br.take(lists * sizeof(std::uint32_t));
    std::memcpy(dense.counts.data(), counts.data(), counts.size());
    dense.offsets = exclusive_prefix_sum(dense.counts);
    const std::uint64_t total = lists ? dense.offsets.back() + dense.counts.back() : 0;
    if (br.remaining() != total * sizeof(Supersegment))
      throw VdiFormatError(Kind::kCorrupt, "dense VDI payload length disagrees with counts");
    dense.payload = detail::get_supersegments(br, total);
    return {AnyVdi(std::move(dense)), meta};
  } catch (const VdiFormatError&) {
    throw;
  } catch (const Error& e) {
    throw VdiFormatError(Kind::kCorrupt, e.what());
  }
}

inline void write_vdi(const AnyVdi& vdi, const VdiMeta& meta, const std::filesystem::path& path, bool compress) {
  const auto bytes = encode_vdi(vdi, meta, compress);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size())))
    throw VdiFormatError(VdiFormatError::Kind::kIo, "cannot write '" + path.string() + "'");
}

inline std::pair<AnyVdi, VdiMeta> read_vdi(const std::filesystem::path& path) {
  std::vector<std::byte> bytes;
  try {
    bytes = read_binary_file(path);
  } catch (const Error& e) {
    throw VdiFormatError(VdiFormatError::Kind::kIo, e.what());
  }
  return decode_vdi(bytes);
}

/// The full layout of either representation.
inline VdiFull as_full(const AnyVdi& vdi) {
  if (const auto* full = std::get_if<VdiFull>(&vdi)) return *full;
  return inflate(std::get<VdiDense>(vdi));
}

}  // namespace vdi

#endif  // VDI_VDI_FILE_HPP_
