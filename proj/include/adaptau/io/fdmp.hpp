#pragma once

// FDMP feature dumps.
//
// Header (33 bytes, little-endian, no padding):
//   0  char[4] "FDMP"
//   4  u16     version (1)
//   6  u16     flags: bit0 labels present, bit1 coords present
//   8  u64     n records
//  16  u32     d (feature dimension)
//  20  u32     C (classes)
//  24  u32     grid height (0 if not a grid)
//  28  u32     grid width  (0 if not a grid)
//  32  u8      domain (0 = LI, 1 = HI)
// Payload: n*d f32 features, n*C f32 probabilities, then n u16 labels and
// n*2 u32 (row, col) coordinates when flagged. The file length must match the
// header exactly.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "adaptau/core.hpp"
#include "adaptau/error.hpp"
#include "adaptau/ingest.hpp"
#include "adaptau/io/binary.hpp"

namespace adaptau::io {

inline constexpr char kFdmpMagic[4] = {'F', 'D', 'M', 'P'};
inline constexpr std::uint16_t kFdmpVersion = 1;
inline constexpr std::size_t kFdmpHeaderSize = 33;
inline constexpr std::uint16_t kFlagLabels = 1u << 0;
inline constexpr std::uint16_t kFlagCoords = 1u << 1;

struct FdmpData {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  Domain domain = Domain::LI;
  bool has_labels = false;
  bool has_coords = false;
  std::vector<FeatureRecord> records;

  bool is_grid() const noexcept { return height > 0 && width > 0; }

  std::vector<std::uint16_t> labels() const {
    detail::require(has_labels, "labels absent: FDMP file was written without labels",
                    ErrorCode::missing_field);
    std::vector<std::uint16_t> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(*r.label);
    return out;
  }

  /// Grid view; coordinates are inferred from row-major order when absent.
  FeatureGrid grid() const {
    detail::require(is_grid(), "FDMP file does not describe a grid");
    return FeatureGrid::from_records(height, width, domain, records);
  }

  static FdmpData from_records(std::vector<FeatureRecord> records, Domain domain) {
    FdmpData out;
    out.domain = domain;
    out.has_labels = !records.empty() && records.front().label.has_value();
    out.has_coords = !records.empty() && records.front().coord.has_value();
    out.records = std::move(records);
    return out;
  }

  static FdmpData from_grid(const FeatureGrid& g) {
    FdmpData out = from_records(g.records, g.domain);
    out.height = g.height;
    out.width = g.width;
    return out;
  }
};

inline std::vector<unsigned char> encode_fdmp(const FdmpData& data) {
  const auto [d, c] = validate_records(data.records);
  const std::uint64_t n = data.records.size();
  detail::require((data.height == 0) == (data.width == 0),
                  "grid height and width must both be zero or both be positive");
  if (data.is_grid()) {
    detail::require(n == static_cast<std::uint64_t>(data.height) * data.width,
                    "record count does not match grid shape");
  }
  for (const auto& r : data.records) {
    detail::require(r.label.has_value() == data.has_labels,
                    data.has_labels ? "labels flagged but a record is unlabelled"
                                    : "a record carries a label but labels are not flagged");
    detail::require(r.coord.has_value() == data.has_coords,
                    data.has_coords ? "coords flagged but a record has no coordinate"
                                    : "a record carries a coordinate but coords are not flagged");
    detail::require(r.domain == data.domain, "record domain differs from file domain");
  }
  ByteWriter w;
  w.bytes().reserve(kFdmpHeaderSize + n * (d + c) * 4 + n * 10);
  w.put_bytes(std::string_view(kFdmpMagic, 4));
  w.put<std::uint16_t>(kFdmpVersion);
  w.put<std::uint16_t>(static_cast<std::uint16_t>((data.has_labels ? kFlagLabels : 0) |
                                                  (data.has_coords ? kFlagCoords : 0)));
  w.put<std::uint64_t>(n);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(d));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c));
  w.put<std::uint32_t>(data.height);
  w.put<std::uint32_t>(data.width);
  w.put<std::uint8_t>(static_cast<std::uint8_t>(data.domain));
  for (const auto& r : data.records) w.put_all<float>(r.features);
  for (const auto& r : data.records) w.put_all<float>(r.probs.values());
  if (data.has_labels) {
    for (const auto& r : data.records) w.put<std::uint16_t>(*r.label);
  }
  if (data.has_coords) {
    for (const auto& r : data.records) {
      w.put<std::uint32_t>(r.coord->row);
      w.put<std::uint32_t>(r.coord->col);
    }
  }
  return std::move(w.bytes());
}

/// Parses a complete FDMP image. Magic and version are checked first; the
/// payload length is checked against the header before any record is built.
inline FdmpData decode_fdmp(std::span<const unsigned char> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4) throw Error(ErrorCode::truncated, "FDMP input shorter than its magic");
  if (r.get_bytes(4, "magic") != std::string_view(kFdmpMagic, 4)) {
    throw Error(ErrorCode::bad_magic, "not an FDMP file (bad magic)");
  }
  const auto version = r.get<std::uint16_t>("version");
  if (version != kFdmpVersion) {
    throw Error(ErrorCode::version_mismatch,
                "unsupported FDMP version " + std::to_string(version) + " (expected 1)");
  }
  const auto flags = r.get<std::uint16_t>("flags");
  detail::require((flags & ~(kFlagLabels | kFlagCoords)) == 0, "unknown FDMP flag bits set");
  const auto n = r.get<std::uint64_t>("n");
  const auto d = r.get<std::uint32_t>("d");
  const auto c = r.get<std::uint32_t>("C");
  const auto height = r.get<std::uint32_t>("height");
  const auto width = r.get<std::uint32_t>("width");
  const auto domain = r.get<std::uint8_t>("domain");
  detail::require(domain <= 1, "FDMP domain byte must be 0 or 1");
  detail::require(d >= 1, "FDMP feature dimension must be positive");
  detail::require(c >= 2, "FDMP class count must be at least 2");
  detail::require(n >= 1, "FDMP file holds no records");
  detail::require((height == 0) == (width == 0), "FDMP grid shape is half specified");
  if (height > 0) {
    detail::require(n == static_cast<std::uint64_t>(height) * width,
                    "FDMP record count does not match grid shape");
  }

  const bool has_labels = flags & kFlagLabels;
  const bool has_coords = flags & kFlagCoords;
  std::uint64_t payload = checked_mul(checked_mul(n, std::uint64_t{d} + c, "payload"), 4, "payload");
  if (has_labels) payload += checked_mul(n, 2, "labels");
  if (has_coords) payload += checked_mul(n, 8, "coords");
  if (r.remaining() < payload) {
    throw Error(ErrorCode::truncated, "FDMP payload truncated: header promises " +
                                          std::to_string(payload) + " bytes, file has " +
                                          std::to_string(r.remaining()));
  }
  detail::require(r.remaining() == payload,
                  "FDMP file has " + std::to_string(r.remaining() - payload) + " trailing bytes");

  std::vector<float> features(n * d), probs(n * c);
  r.get_all<float>(features, "features");
  r.get_all<float>(probs, "probabilities");
  std::vector<std::uint16_t> labels;
  if (has_labels) {
    labels.resize(n);
    r.get_all<std::uint16_t>(labels, "labels");
  }
  std::vector<std::uint32_t> coords;
  if (has_coords) {
    coords.resize(n * 2);
    r.get_all<std::uint32_t>(coords, "coords");
  }

  FdmpData out;
  out.height = height;
  out.width = width;
  out.domain = static_cast<Domain>(domain);
  out.has_labels = has_labels;
  out.has_coords = has_coords;
  out.records.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    FeatureRecord rec{
        std::vector<float>(features.begin() + static_cast<std::ptrdiff_t>(i * d),
                           features.begin() + static_cast<std::ptrdiff_t>((i + 1) * d)),
        ProbabilityVector(std::vector<float>(probs.begin() + static_cast<std::ptrdiff_t>(i * c),
                                             probs.begin() + static_cast<std::ptrdiff_t>((i + 1) * c))),
        std::nullopt, std::nullopt, out.domain};
    if (has_labels) {
      detail::require(labels[i] < c, "FDMP label out of range at record " + std::to_string(i));
      rec.label = labels[i];
    }
    if (has_coords) rec.coord = GridCoord{coords[2 * i], coords[2 * i + 1]};
    out.records.push_back(std::move(rec));
  }
  return out;
}

inline void write_fdmp(const FdmpData& data, const std::filesystem::path& path) {
  write_file(path, encode_fdmp(data));
}

inline FdmpData read_fdmp(const std::filesystem::path& path) {
  try {
    return decode_fdmp(read_file(path));
  } catch (const Error& e) {
    std::string msg = e.what();
    msg.erase(0, msg.find(": ") + 2);
    throw Error(e.code(), path.string() + ": " + msg);
  }
}

}  // namespace adaptau::io
