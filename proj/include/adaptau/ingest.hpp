#pragma once

// Dense feature maps: block-mean downscaling and LI/HI pairing by location.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adaptau/core.hpp"
#include "adaptau/dynamic.hpp"
#include "adaptau/error.hpp"

namespace adaptau {

/// Row-major grid of records; record i sits at (i / width, i % width).
struct FeatureGrid {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  Domain domain = Domain::LI;
  std::vector<FeatureRecord> records;

  /// Validates shape and coordinates; missing coordinates are filled in.
  static FeatureGrid from_records(std::uint32_t height, std::uint32_t width, Domain domain,
                                  std::vector<FeatureRecord> records) {
    detail::require(height > 0 && width > 0, "grid dimensions must be positive");
    detail::require(records.size() == static_cast<std::size_t>(height) * width,
                    "grid holds " + std::to_string(records.size()) + " records, expected " +
                        std::to_string(static_cast<std::size_t>(height) * width));
    for (std::size_t i = 0; i < records.size(); ++i) {
      const GridCoord expected{static_cast<std::uint32_t>(i / width),
                               static_cast<std::uint32_t>(i % width)};
      auto& r = records[i];
      if (!r.coord) r.coord = expected;
      detail::require(*r.coord == expected, "grid records are not in row-major coordinate order");
      r.domain = domain;
    }
    validate_records(records);
    return FeatureGrid{height, width, domain, std::move(records)};
  }

  const FeatureRecord& at(std::uint32_t row, std::uint32_t col) const {
    return records[static_cast<std::size_t>(row) * width + col];
  }
};

namespace detail {

/// Mean record over [row0, row0 + rows) x [col0, col0 + cols).
inline FeatureRecord block_mean(const FeatureGrid& g, std::uint32_t row0, std::uint32_t col0,
                                std::uint32_t rows, std::uint32_t cols, GridCoord coord) {
  const FeatureRecord& first = g.at(row0, col0);
  std::vector<double> feat(first.dim(), 0.0), prob(first.num_classes(), 0.0);
  std::map<std::uint16_t, std::size_t> votes;
  bool all_labelled = true;
  for (std::uint32_t r = row0; r < row0 + rows; ++r) {
    for (std::uint32_t c = col0; c < col0 + cols; ++c) {
      const auto& rec = g.at(r, c);
      for (std::size_t j = 0; j < feat.size(); ++j) feat[j] += rec.features[j];
      for (std::size_t j = 0; j < prob.size(); ++j) prob[j] += rec.probs[j];
      if (rec.label) ++votes[*rec.label];
      else all_labelled = false;
    }
  }
  const double count = static_cast<double>(rows) * cols;
  std::vector<float> f(feat.size()), p(prob.size());
  for (std::size_t j = 0; j < feat.size(); ++j) f[j] = static_cast<float>(feat[j] / count);
  double mass = 0.0;
  for (std::size_t j = 0; j < prob.size(); ++j) {
    p[j] = static_cast<float>(prob[j] / count);
    mass += p[j];
  }
  std::optional<ProbabilityVector> pv;
  if (std::abs(mass - 1.0) <= 0.1 * kSimplexTolerance) pv.emplace(std::move(p));
  else pv = ProbabilityVector::normalized(std::span<const float>(p));

  std::optional<std::uint16_t> label;
  if (all_labelled) {
    std::size_t best = 0;
    for (const auto& [l, n] : votes) {
      if (n > best) {
        best = n;
        label = l;
      }
    }
  }
  return FeatureRecord{std::move(f), std::move(*pv), label, coord, g.domain};
}

}  // namespace detail

/// Each output cell is the block mean of a factor x factor input block;
/// trailing rows/columns that do not fill a whole block are dropped.
inline FeatureGrid downscale_grid(const FeatureGrid& grid, int factor) {
  detail::require(factor > 0, "downscale factor must be positive");
  if (factor == 1) return grid;
  const auto f = static_cast<std::uint32_t>(factor);
  const std::uint32_t h = grid.height / f;
  const std::uint32_t w = grid.width / f;
  detail::require(h > 0 && w > 0, "downscale factor exceeds grid dimensions");
  std::vector<FeatureRecord> out;
  out.reserve(static_cast<std::size_t>(h) * w);
  for (std::uint32_t r = 0; r < h; ++r) {
    for (std::uint32_t c = 0; c < w; ++c) {
      out.push_back(detail::block_mean(grid, r * f, c * f, f, f, GridCoord{r, c}));
    }
  }
  return FeatureGrid{h, w, grid.domain, std::move(out)};
}

/// Pairs each LI cell with the mean of the scale x scale HI block covering it.
inline std::vector<RecordPair> pair_grids(const FeatureGrid& li, const FeatureGrid& hi, int scale) {
  detail::require(scale > 0, "pairing scale must be positive");
  detail::require(li.domain == Domain::LI && hi.domain == Domain::HI,
                  "pair_grids expects an LI grid and an HI grid");
  const auto s = static_cast<std::uint32_t>(scale);
  detail::require(hi.height == li.height * s && hi.width == li.width * s,
                  "HI grid " + std::to_string(hi.height) + "x" + std::to_string(hi.width) +
                      " is not " + std::to_string(scale) + "x the LI grid " +
                      std::to_string(li.height) + "x" + std::to_string(li.width));
  std::vector<RecordPair> pairs;
  pairs.reserve(li.records.size());
  for (std::uint32_t r = 0; r < li.height; ++r) {
    for (std::uint32_t c = 0; c < li.width; ++c) {
      pairs.push_back({li.at(r, c), detail::block_mean(hi, r * s, c * s, s, s, GridCoord{r, c})});
    }
  }
  return pairs;
}

/// For every cell of a full-resolution grid, the index of the downscaled cell
/// that covers it; truncated edge cells map to the nearest block.
inline std::vector<std::size_t> upsample_index(std::uint32_t full_height, std::uint32_t full_width,
                                               int factor) {
  detail::require(factor > 0, "factor must be positive");
  const auto f = static_cast<std::uint32_t>(factor);
  const std::uint32_t h = full_height / f;
  const std::uint32_t w = full_width / f;
  detail::require(h > 0 && w > 0, "factor exceeds grid dimensions");
  std::vector<std::size_t> map;
  map.reserve(static_cast<std::size_t>(full_height) * full_width);
  for (std::uint32_t r = 0; r < full_height; ++r) {
    for (std::uint32_t c = 0; c < full_width; ++c) {
      const std::uint32_t br = std::min(r / f, h - 1);
      const std::uint32_t bc = std::min(c / f, w - 1);
      map.push_back(static_cast<std::size_t>(br) * w + bc);
    }
  }
  return map;
}

}  // namespace adaptau
