// Copyright 2026 The gs4d Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "gs4d/deform_field.hpp"
#include "gs4d/lowrank.hpp"

namespace gs4d {

// Byte layout is documented in docs/format.md.

inline constexpr char kStreamMagic[4] = {'G', 'S', '4', 'D'};
inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::size_t kHeaderBytes = 32;
inline constexpr std::size_t kConfigBlockBytes = 56;
inline constexpr std::size_t kFactorRecordHeaderBytes = 16;

enum class PayloadKind : std::uint8_t { Base = 0, Delta = 1 };
enum class Precision : std::uint8_t { F32 = 0, F16 = 1 };

struct FrameRange {
  std::uint32_t start = 0;
  std::uint32_t count = 1;
};

struct ChunkHeader {
  std::uint16_t version = kFormatVersion;
  PayloadKind kind = PayloadKind::Base;
  Precision precision = Precision::F32;
  std::uint32_t chunk_index = 0;
  FrameRange frames;
  std::uint64_t payload_bytes = 0;
  std::uint32_t checksum = 0;
};

struct ChunkPayload {
  ChunkHeader header;
  std::optional<ModelState> base;     // Base chunks
  std::vector<LowRankFactor> factors; // Delta chunks
};

using Bytes = std::vector<std::uint8_t>;

/// Full model: Gaussians, planes and decoder. Always chunk 0, always f32.
Bytes encode_base_chunk(const ModelState& state, FrameRange frames);

/// Plane-channel factors only. Throws Protocol for chunk_index 0 and
/// Parameter for values not representable in the chosen precision.
Bytes encode_delta_chunk(std::span<const LowRankFactor> factors, std::uint32_t chunk_index,
                         FrameRange frames, Precision precision = Precision::F32);

/// Decodes the first chunk in `bytes`; `consumed` receives its total length.
ChunkPayload decode_chunk(std::span<const std::uint8_t> bytes, std::size_t* consumed = nullptr);

/// Splits a concatenated stream into its chunks.
std::vector<ChunkPayload> decode_stream(std::span<const std::uint8_t> bytes);

/// Adds every factor of a delta chunk onto its target plane channel.
ModelState apply_delta(const ModelState& previous, const ChunkPayload& delta);

/// Base state with deltas 1..k applied in order. Throws Gap if a chunk in
/// 0..k is missing or out of order.
ModelState reconstruct_state(std::span<const std::uint8_t> stream, int k);
ModelState reconstruct_state(std::span<const ChunkPayload> chunks, int k);

/// Closed-form payload sizes.
std::size_t base_payload_size(const ModelConfig& config, std::size_t gaussian_count);
std::size_t factor_record_size(std::size_t rows, std::size_t cols, std::size_t rank,
                               Precision precision);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

struct ChunkBytes {
  std::uint32_t chunk_index = 0;
  PayloadKind kind = PayloadKind::Base;
  std::uint32_t frame_count = 1;
  std::uint64_t bytes = 0;          // header + payload
  std::uint64_t payload_bytes = 0;
  std::uint64_t factor_bytes = 0;   // delta payload minus record headers
  double bytes_per_frame = 0.0;
};

struct BandwidthReport {
  std::vector<ChunkBytes> chunks;
  std::uint64_t total_bytes = 0;
  std::uint64_t base_bytes = 0;
  std::uint64_t delta_total_bytes = 0;
  /// Raw f32 size of every plane channel; what a delta chunk would cost
  /// without low-rank factors. Needs a base chunk to know R and F.
  std::optional<std::uint64_t> full_plane_bytes;
  std::optional<double> mean_delta_chunk_bytes;
  /// mean delta chunk bytes (wire) / full_plane_bytes.
  std::optional<double> delta_to_full_ratio;
  /// Same, counting factor values only (no chunk or record headers).
  std::optional<double> factor_to_full_ratio;
  /// 1 - delta_to_full_ratio.
  std::optional<double> reduction_ratio;
  std::optional<double> reduction_ratio_ex_overhead;
};

BandwidthReport bandwidth_report(std::span<const std::uint8_t> stream);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace gs4d
