// Copyright 2026 The panoptic-pe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "ppe/grid.hpp"

namespace ppe {

using Bytes = std::vector<std::uint8_t>;

/// Largest id representable in a panoptic PNG (24 bits of RGB).
inline constexpr std::uint32_t kMaxPngId = (1u << 24) - 1;

/// Decodes an 8-bit RGB PNG where id = R + 256 G + 65536 B.
/// Throws FormatError for anything other than 8-bit RGB without alpha.
IdMap read_panoptic_png(std::span<const std::uint8_t> png);

/// Encodes ids as an 8-bit RGB PNG. Throws RangeError for ids > kMaxPngId.
/// Output is a pure function of the map (no timestamps or text chunks).
Bytes write_panoptic_png(const IdMap& map);

// Field container, all integers little-endian:
//   [0, 8)   magic "PPEFIELD"
//   [8, 12)  uint32 version (kFieldVersion)
//   [12, 16) uint32 channels
//   [16, 20) uint32 height
//   [20, 24) uint32 width
//   [24, ..) float32 values, channel-major then row-major
inline constexpr std::string_view kFieldMagic = "PPEFIELD";
inline constexpr std::uint32_t kFieldVersion = 1;
inline constexpr std::size_t kFieldHeaderSize = 24;

/// Throws FormatError on a bad magic, unknown version, truncated or
/// oversized payload, or non-finite values.
Field read_field(std::span<const std::uint8_t> bytes);

/// Stores values rounded to float32. Throws RangeError when a value
/// overflows float32.
Bytes write_field(const Field& field);

/// Field backed by float32-rounded values, i.e. what a write/read cycle yields.
Field round_to_float32(const Field& field);

Bytes read_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view text);

}  // namespace ppe
