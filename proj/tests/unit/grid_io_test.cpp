// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

#include "ppe/error.hpp"
#include "ppe/grid.hpp"
#include "ppe/io.hpp"
#include "support.hpp"

namespace ppe {
namespace {

// Written by an independent PNG encoder (zlib + hand-built chunks).
const Bytes kRgbTwoPixels = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48,
    0x44, 0x52, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00, 0x01, 0x08, 0x02, 0x00, 0x00,
    0x00, 0x7b, 0x40, 0xe8, 0xdd, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x44, 0x41, 0x54, 0x78,
    0x9c, 0x63, 0x60, 0x62, 0x64, 0x00, 0x42, 0x00, 0x00, 0x1c, 0x00, 0x06, 0x4b, 0xff,
    0x89, 0xe2, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};
const Bytes kGray = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48,
    0x44, 0x52, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x00, 0x00, 0x00,
    0x00, 0x3a, 0x7e, 0x9b, 0x55, 0x00, 0x00, 0x00, 0x0a, 0x49, 0x44, 0x41, 0x54, 0x78,
    0x9c, 0x63, 0x60, 0x07, 0x00, 0x00, 0x09, 0x00, 0x08, 0x20, 0x23, 0xc3, 0x8c, 0x00,
    0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};
const Bytes kRgba = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48,
    0x44, 0x52, 0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x06, 0x00, 0x00,
    0x00, 0x1f, 0x15, 0xc4, 0x89, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x44, 0x41, 0x54, 0x78,
    0x9c, 0x63, 0x60, 0x64, 0x62, 0x66, 0x01, 0x00, 0x00, 0x19, 0x00, 0x0b, 0xe7, 0x5a,
    0x46, 0xa4, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

TEST(IdMap, RejectsSizeMismatch) {
  EXPECT_THROW(IdMap(2, 2, {1, 2, 3}), ShapeError);
  EXPECT_THROW(IdMap(-1, 2, {}), ShapeError);
}

TEST(IdMap, RowMajorAccess) {
  const IdMap m(2, 3, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(m.at(0, 2), 3u);
  EXPECT_EQ(m.at(1, 0), 4u);
  EXPECT_EQ(IdMap::filled(2, 2, 9).at(1, 1), 9u);
}

TEST(Field, ChannelMajorIndexAndValidation) {
  const Field f(2, 1, 2, {1, 2, 3, 4});
  EXPECT_EQ(f.at(1, 0, 0), 3.0);
  EXPECT_EQ(f.plane_size(), 2u);
  EXPECT_THROW(Field(1, 1, 1, {std::numeric_limits<double>::quiet_NaN()}), DomainError);
  EXPECT_THROW(Field(1, 1, 1, {std::numeric_limits<double>::infinity()}), DomainError);
  EXPECT_THROW(Field(1, 2, 2, {1.0}), ShapeError);
}

TEST(WeightMask, RejectsOutOfRange) {
  EXPECT_THROW(WeightMask(1, 1, {1.5}), DomainError);
  EXPECT_THROW(WeightMask(1, 1, {-0.1}), DomainError);
  EXPECT_NO_THROW(WeightMask(1, 2, {0.0, 1.0}));
}

TEST(PanopticPng, DecodesIdsFromIndependentEncoder) {
  const IdMap m = read_panoptic_png(kRgbTwoPixels);
  ASSERT_EQ(m.height(), 1);
  ASSERT_EQ(m.width(), 2);
  EXPECT_EQ(m.at(0, 0), 258u);    // (2, 1, 0)
  EXPECT_EQ(m.at(0, 1), 65537u);  // (1, 0, 1)
}

TEST(PanopticPng, PixelIdBasics) {
  const IdMap m(1, 3, {0, 1, 258});
  const IdMap back = read_panoptic_png(write_panoptic_png(m));
  EXPECT_EQ(back, m);
}

TEST(PanopticPng, RejectsNonRgb) {
  EXPECT_THROW(read_panoptic_png(kGray), FormatError);
  EXPECT_THROW(read_panoptic_png(kRgba), FormatError);
  const Bytes garbage = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  EXPECT_THROW(read_panoptic_png(garbage), FormatError);
  Bytes truncated(kRgbTwoPixels.begin(), kRgbTwoPixels.begin() + 40);
  EXPECT_THROW(read_panoptic_png(truncated), FormatError);
}

TEST(PanopticPng, RejectsIdsBeyond24Bits) {
  EXPECT_THROW(write_panoptic_png(IdMap(1, 1, {1u << 24})), RangeError);
  EXPECT_NO_THROW(write_panoptic_png(IdMap(1, 1, {kMaxPngId})));
}

TEST(PanopticPng, RoundTripProperty) {
  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int h = rng.uniform_int(1, 17);
    const int w = rng.uniform_int(1, 17);
    const IdMap m = testing::random_id_map(rng, h, w, kMaxPngId);
    EXPECT_EQ(read_panoptic_png(write_panoptic_png(m)), m);
  }
}

TEST(PanopticPng, EncodingIsDeterministic) {
  Rng rng(5);
  const IdMap m = testing::random_id_map(rng, 9, 7, 1000);
  EXPECT_EQ(write_panoptic_png(m), write_panoptic_png(m));
}

TEST(FieldContainer, HeaderLayout) {
  const Bytes b = write_field(Field(2, 3, 4, std::vector<double>(24, 0.5)));
  ASSERT_EQ(b.size(), kFieldHeaderSize + 24 * 4);
  EXPECT_EQ(std::memcmp(b.data(), "PPEFIELD", 8), 0);
  EXPECT_EQ(b[8], 1);   // version
  EXPECT_EQ(b[12], 2);  // channels
  EXPECT_EQ(b[16], 3);  // height
  EXPECT_EQ(b[20], 4);  // width
  std::uint32_t bits = b[24] | (b[25] << 8) | (b[26] << 16) | (static_cast<std::uint32_t>(b[27]) << 24);
  EXPECT_EQ(std::bit_cast<float>(bits), 0.5f);
}

TEST(FieldContainer, SingleZeroRoundTrip) {
  const Field f(1, 1, 1, {0.0});
  EXPECT_EQ(read_field(write_field(f)), f);
}

TEST(FieldContainer, BitExactForFloat32Values) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    std::vector<double> v(static_cast<std::size_t>(rng.uniform_int(1, 40)));
    for (auto& x : v) {
      // Random finite float32 bit patterns, including subnormals.
      float f;
      do {
        f = std::bit_cast<float>(static_cast<std::uint32_t>(rng.next()));
      } while (!std::isfinite(f));
      x = f;
    }
    const Field field(1, 1, static_cast<int>(v.size()), v);
    const Field back = read_field(write_field(field));
    ASSERT_EQ(back.size(), field.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      EXPECT_EQ(std::bit_cast<std::uint32_t>(static_cast<float>(back[i])),
                std::bit_cast<std::uint32_t>(static_cast<float>(field[i])));
    }
  }
}

TEST(FieldContainer, RoundTripsThroughFloat32Rounding) {
  Rng rng(4);
  const Field f = testing::random_field(rng, 2, 2, 2);
  EXPECT_EQ(read_field(write_field(f)), round_to_float32(f));
}

TEST(FieldContainer, RejectsMalformedInput) {
  const Bytes good = write_field(Field(1, 1, 2, {1.0, 2.0}));
  Bytes bad_magic = good;
  bad_magic[0] = 'X';
  EXPECT_THROW(read_field(bad_magic), FormatError);
  Bytes bad_version = good;
  bad_version[8] = 2;
  EXPECT_THROW(read_field(bad_version), FormatError);
  EXPECT_THROW(read_field(Bytes(good.begin(), good.end() - 1)), FormatError);
  Bytes trailing = good;
  trailing.push_back(0);
  EXPECT_THROW(read_field(trailing), FormatError);
  EXPECT_THROW(read_field(Bytes(good.begin(), good.begin() + 10)), FormatError);
  Bytes huge = good;
  huge[12] = huge[13] = huge[14] = 0xff;
  huge[15] = 0x7f;
  EXPECT_THROW(read_field(huge), FormatError);
  Bytes nan = good;
  nan[24] = 0x00;
  nan[25] = 0x00;
  nan[26] = 0xc0;
  nan[27] = 0x7f;
  EXPECT_THROW(read_field(nan), FormatError);
}

TEST(FieldContainer, RejectsFloat32Overflow) {
  EXPECT_THROW(write_field(Field(1, 1, 1, {1e300})), RangeError);
}

TEST(Files, AtomicWriteAndRead) {
  const auto dir = std::filesystem::temp_directory_path() / "ppe_io_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "a.bin";
  write_file_atomic(path, std::string_view("hello"));
  EXPECT_EQ(read_file(path), (Bytes{'h', 'e', 'l', 'l', 'o'}));
  EXPECT_FALSE(std::filesystem::exists(dir / "a.bin.tmp"));
  EXPECT_THROW(read_file(dir / "missing.bin"), IoError);
  EXPECT_THROW(write_file_atomic(dir / "no" / "such" / "dir.bin", std::string_view("x")),
               IoError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace ppe
