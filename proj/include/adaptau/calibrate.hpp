#pragma once

// Calibration subset selection and threshold calibration for one domain.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "adaptau/core.hpp"
#include "adaptau/error.hpp"

namespace adaptau {

/// (class, group) pair; group abstracts the acquisition unit (e.g. a core).
struct Stratum {
  std::uint16_t label = 0;
  int group = 0;
  friend auto operator<=>(const Stratum&, const Stratum&) = default;
};

struct CalibrationSet {
  std::vector<std::size_t> indices;  // ascending positions in the source list
  std::vector<FeatureRecord> records;
  std::vector<Stratum> strata;
};

/// Proportional allocation of `target` draws over strata of the given sizes by
/// largest remainder (ties to the earlier stratum), then topped up so that
/// every non-empty stratum receives at least one draw.
inline std::vector<std::size_t> allocate_largest_remainder(std::span<const std::size_t> sizes,
                                                           std::size_t target) {
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  detail::require(total > 0, "cannot allocate over empty strata");
  detail::require(target <= total, "target exceeds population");
  std::vector<std::size_t> alloc(sizes.size());
  std::vector<std::pair<std::uint64_t, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    const std::uint64_t scaled = static_cast<std::uint64_t>(target) * sizes[s];
    alloc[s] = static_cast<std::size_t>(scaled / total);
    assigned += alloc[s];
    remainders.emplace_back(scaled % total, s);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < target; ++i, ++assigned) ++alloc[remainders[i].second];

  for (std::size_t s = 0; s < sizes.size(); ++s) {
    if (sizes[s] == 0 || alloc[s] > 0) continue;
    std::size_t donor = sizes.size();
    for (std::size_t t = 0; t < sizes.size(); ++t) {
      if (alloc[t] > 1 && (donor == sizes.size() || alloc[t] > alloc[donor])) donor = t;
    }
    detail::require(donor != sizes.size(), "target too small to represent every stratum");
    --alloc[donor];
    alloc[s] = 1;
  }
  return alloc;
}

/// Stratified draw without replacement. `groups` may be empty (single group).
inline std::vector<std::size_t> stratified_indices(std::span<const std::uint16_t> labels,
                                                   std::span<const int> groups,
                                                   std::size_t target_size, std::uint64_t seed) {
  detail::require(!labels.empty(), "calibration source is empty");
  detail::require(groups.empty() || groups.size() == labels.size(),
                  "one group id per record required");
  detail::require(target_size >= 1, "target size must be positive");
  detail::require(target_size <= labels.size(), "target size exceeds number of records");

  std::map<Stratum, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    members[Stratum{labels[i], groups.empty() ? 0 : groups[i]}].push_back(i);
  }
  detail::require(target_size >= members.size(),
                  "target size smaller than the number of strata");
  std::vector<std::size_t> sizes;
  for (const auto& [key, idx] : members) sizes.push_back(idx.size());
  const auto alloc = allocate_largest_remainder(sizes, target_size);

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  chosen.reserve(target_size);
  std::size_t s = 0;
  for (auto& [key, idx] : members) {
    std::shuffle(idx.begin(), idx.end(), rng);
    chosen.insert(chosen.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(alloc[s++]));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

inline CalibrationSet sample_calibration_set(std::span<const FeatureRecord> records,
                                             std::size_t target_size, std::uint64_t seed,
                                             std::span<const int> groups = {}) {
  detail::require(!records.empty(), "calibration source is empty");
  std::vector<std::uint16_t> labels;
  labels.reserve(records.size());
  for (const auto& r : records) {
    detail::require(r.label.has_value(), "stratified sampling needs labelled records",
                    ErrorCode::missing_field);
    labels.push_back(*r.label);
  }
  CalibrationSet out;
  out.indices = stratified_indices(labels, groups, target_size, seed);
  for (auto i : out.indices) {
    out.records.push_back(records[i]);
    out.strata.push_back(Stratum{labels[i], groups.empty() ? 0 : groups[i]});
  }
  return out;
}

/// The ceil(tpr * n)-th order statistic (1-based) of the calibration scores.
inline double calibrate_tau_eu(std::span<const double> eu_scores, double tpr) {
  detail::require(!eu_scores.empty(), "no EU scores to calibrate on");
  detail::require(tpr > 0.0 && tpr < 1.0, "tpr must lie in (0, 1)");
  for (double s : eu_scores) detail::require(std::isfinite(s), "EU scores must be finite");
  const std::size_t n = eu_scores.size();
  auto rank = static_cast<std::size_t>(std::ceil(tpr * static_cast<double>(n) - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, n);
  std::vector<double> sorted(eu_scores.begin(), eu_scores.end());
  auto kth = sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1);
  std::nth_element(sorted.begin(), kth, sorted.end());
  return *kth;
}

struct AuCalibrationSample {
  double eu = 0.0;
  double entropy = 0.0;
  bool accurate = false;
};

struct TauAuResult {
  double tau_au = 0.0;
  /// Number of records that are both accurate and classified C at tau_au.
  std::size_t objective = 0;
};

/// Exact sweep over candidate thresholds (distinct low-EU entropies plus ln C)
/// maximizing the count of accurate records classified C. Ties resolve to the
/// smallest candidate.
inline TauAuResult calibrate_tau_au(std::span<const AuCalibrationSample> samples, double tau_eu,
                                    std::size_t num_classes) {
  detail::require(num_classes >= 2, "need C >= 2");
  const double ln_c = std::log(static_cast<double>(num_classes));
  std::vector<std::pair<double, bool>> low;
  for (const auto& s : samples) {
    detail::require(std::isfinite(s.eu) && std::isfinite(s.entropy),
                    "calibration scores must be finite");
    if (s.eu < tau_eu) low.emplace_back(std::min(s.entropy, ln_c), s.accurate);
  }
  detail::require(!low.empty(), "no low-EU records in the calibration set",
                  ErrorCode::unusable_calibration);
  std::sort(low.begin(), low.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<double> candidates;
  for (const auto& [h, acc] : low) {
    if (candidates.empty() || candidates.back() != h) candidates.push_back(h);
  }
  if (candidates.back() != ln_c) candidates.push_back(ln_c);

  TauAuResult best{candidates.front(), 0};
  bool first = true;
  std::size_t pos = 0;
  std::size_t accurate_below = 0;
  for (double c : candidates) {
    while (pos < low.size() && low[pos].first < c) accurate_below += low[pos++].second ? 1 : 0;
    if (first || accurate_below > best.objective) best = {c, accurate_below};
    first = false;
  }
  return best;
}

}  // namespace adaptau
