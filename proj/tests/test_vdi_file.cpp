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

#include <filesystem>

#include "vdi/scenes.hpp"
#include "vdi/vdi_file.hpp"

namespace vdi {
namespace {

struct Fixture {
  VdiFull full;
  VdiMeta meta;
  Fixture() {
    const auto vol = scenes::random_blobs({24, 24, 24}, 11);
    std::tie(full, meta) = generate_full(vol, scenes::default_transfer_function(), scenes::default_camera(24, 18), 4, 1.0 / 48);
  }
};

class VdiFileTest : public ::testing::TestWithParam<std::tuple<bool, bool>> {};

TEST_P(VdiFileTest, RoundTripsBitExactly) {
  const auto [dense, compress] = GetParam();
  const Fixture f;
  const AnyVdi in = dense ? AnyVdi(densify(f.full)) : AnyVdi(f.full);
  const auto bytes = encode_vdi(in, f.meta, compress);
  EXPECT_EQ(std::memcmp(bytes.data(), "VDI1", 4), 0);
  const auto [out, meta] = decode_vdi(bytes);
  EXPECT_EQ(out, in);
  EXPECT_EQ(meta, f.meta);
  EXPECT_EQ(as_full(out), f.full);
}

INSTANTIATE_TEST_SUITE_P(Layouts, VdiFileTest,
                         ::testing::Combine(::testing::Bool(), ::testing::Bool()));

TEST(VdiFile, HeaderHasDocumentedSize) {
  const Fixture f;
  const auto bytes = encode_vdi(AnyVdi(f.full), f.meta, false);
  EXPECT_EQ(bytes.size(), kVdiHeaderBytes + f.full.byte_size() + 4);
  std::uint32_t w, n;
  std::memcpy(&w, bytes.data() + 8, 4);
  std::memcpy(&n, bytes.data() + 16, 4);
  EXPECT_EQ(w, 24u);
  EXPECT_EQ(n, 4u);
  const auto dense = densify(f.full);
  const auto dbytes = encode_vdi(AnyVdi(dense), f.meta, false);
  EXPECT_EQ(dbytes.size(), kVdiHeaderBytes + dense.byte_size() + 4);
}

TEST(VdiFile, CompressionShrinksSparseFullLayout) {
  const Fixture f;
  const auto raw = encode_vdi(AnyVdi(f.full), f.meta, false);
  const auto packed = encode_vdi(AnyVdi(f.full), f.meta, true);
  EXPECT_LT(packed.size(), raw.size());
}

TEST(VdiFile, TruncationIsChecksumError) {
  const Fixture f;
  auto bytes = encode_vdi(AnyVdi(densify(f.full)), f.meta, false);
  for (std::size_t keep : {bytes.size() - 1, bytes.size() / 2, std::size_t(100), std::size_t(8)}) {
    try {
      decode_vdi(std::span(bytes).first(keep));
      FAIL() << "decoded a file truncated to " << keep;
    } catch (const VdiFormatError& e) {
      EXPECT_EQ(e.kind, VdiFormatError::Kind::kChecksum);
    }
  }
}

TEST(VdiFile, FlippedPayloadBitIsChecksumError) {
  const Fixture f;
  auto bytes = encode_vdi(AnyVdi(f.full), f.meta, true);
  bytes[kVdiHeaderBytes + 3] ^= std::byte{0x10};
  try {
    decode_vdi(bytes);
    FAIL();
  } catch (const VdiFormatError& e) {
    EXPECT_EQ(e.kind, VdiFormatError::Kind::kChecksum);
  }
}

TEST(VdiFile, BadMagicAndVersionAreDistinguished) {
  const Fixture f;
  auto bytes = encode_vdi(AnyVdi(f.full), f.meta, false);
  auto wrong_magic = bytes;
  wrong_magic[0] = std::byte{'X'};
  try {
    decode_vdi(wrong_magic);
    FAIL();
  } catch (const VdiFormatError& e) {
    EXPECT_EQ(e.kind, VdiFormatError::Kind::kBadMagic);
  }
  // bump the version and reseal the checksum
  auto future = bytes;
  future[4] = std::byte{2};
  const std::uint32_t crc = detail::crc32_of(std::span(future).first(future.size() - 4));
  std::memcpy(future.data() + future.size() - 4, &crc, 4);
  try {
    decode_vdi(future);
    FAIL();
  } catch (const VdiFormatError& e) {
    EXPECT_EQ(e.kind, VdiFormatError::Kind::kBadVersion);
  }
}

TEST(VdiFile, WriteAndReadThroughDisk) {
  const Fixture f;
  const auto path = std::filesystem::temp_directory_path() / "vdi_file_test.vdi";
  write_vdi(AnyVdi(densify(f.full)), f.meta, path, true);
  const auto [vdi, meta] = read_vdi(path);
  EXPECT_EQ(as_full(vdi), f.full);
  EXPECT_EQ(meta, f.meta);
  std::filesystem::remove(path);
  try {
    read_vdi(path);
    FAIL();
  } catch (const VdiFormatError& e) {
    EXPECT_EQ(e.kind, VdiFormatError::Kind::kIo);
  }
}

TEST(VdiFile, EmptyVdiRoundTrips) {
  const VdiFull empty(3, 2, 5);
  VdiMeta meta;
  meta.camera = scenes::default_camera(3, 2);
  meta.n_sup = 5;
  for (bool compress : {false, true}) {
    const auto [out, m] = decode_vdi(encode_vdi(AnyVdi(densify(empty)), meta, compress));
    EXPECT_EQ(as_full(out), empty);
    EXPECT_TRUE(std::get<VdiDense>(out).payload.empty());
  }
}

}  // namespace
}  // namespace vdi
