#pragma once

// Dynamic C/UAR/UAI/UE taxonomy over the LI -> HI transition: the oracle
// form that needs paired HI data, and the blind surrogate that decides UAR vs
// UAI from LI latent distances to calibration prototypes alone.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adaptau/core.hpp"
#include "adaptau/distance.hpp"
#include "adaptau/error.hpp"

namespace adaptau {

enum class DynamicTag : std::uint8_t { C = 0, UAR = 1, UAI = 2, UE = 3 };
enum class LabelSource : std::uint8_t { oracle = 0, surrogate = 1 };

inline const char* to_string(DynamicTag t) {
  switch (t) {
    case DynamicTag::C: return "C";
    case DynamicTag::UAR: return "UAR";
    case DynamicTag::UAI: return "UAI";
    case DynamicTag::UE: return "UE";
  }
  return "?";
}

inline const char* to_string(LabelSource s) {
  return s == LabelSource::oracle ? "oracle" : "surrogate";
}

inline DynamicTag parse_dynamic_tag(std::string_view s) {
  if (s == "C") return DynamicTag::C;
  if (s == "UAR") return DynamicTag::UAR;
  if (s == "UAI") return DynamicTag::UAI;
  if (s == "UE") return DynamicTag::UE;
  throw Error(ErrorCode::validation, "unknown dynamic tag '" + std::string(s) + "'");
}

inline LabelSource parse_label_source(std::string_view s) {
  if (s == "oracle") return LabelSource::oracle;
  if (s == "surrogate") return LabelSource::surrogate;
  throw Error(ErrorCode::validation, "unknown label source '" + std::string(s) + "'");
}

struct DynamicLabel {
  DynamicTag tag = DynamicTag::C;
  LabelSource source = LabelSource::oracle;
  /// LI distance to the UAR / UAI prototypes; set by the surrogate on UA samples.
  std::optional<double> d_uar;
  std::optional<double> d_uai;
};

inline DynamicTag classify_dynamic_oracle(StaticTag li, StaticTag hi) {
  switch (li) {
    case StaticTag::C: return DynamicTag::C;
    case StaticTag::UE: return DynamicTag::UE;
    case StaticTag::UA: return hi == StaticTag::C ? DynamicTag::UAR : DynamicTag::UAI;
  }
  return DynamicTag::UE;
}

inline DynamicLabel classify_dynamic_oracle(const StaticLabel& li, const StaticLabel& hi) {
  return {classify_dynamic_oracle(li.tag, hi.tag), LabelSource::oracle, std::nullopt, std::nullopt};
}

struct RecordPair {
  FeatureRecord li;
  FeatureRecord hi;
};

struct ResolvabilityOptions {
  DistanceOptions distance;
  /// Number of principal components applied before the prototype banks; 0 disables.
  std::size_t pca_dims = 0;
};

/// Prototype banks for D_v^UAR and D_v^UAI, fitted on LI features only.
struct ResolvabilityBanks {
  DistanceModel bank_uar;
  DistanceModel bank_uai;
  std::optional<PcaProjector> projector;

  Backend backend() const noexcept { return bank_uar.backend(); }

  /// (d(z; D_v^UAR), d(z; D_v^UAI)).
  std::pair<double, double> distances(std::span<const float> z) const {
    Eigen::VectorXd v = to_vector(z);
    if (projector) v = projector->project(v);
    return {bank_uar.score(v), bank_uai.score(v)};
  }
};

/// Fits both banks from already-partitioned LI feature rows (projected if a
/// projector is supplied). Mahalanobis: one centroid per partition with the
/// covariance pooled over both. KNN: each partition stored with k clamped to
/// its size.
inline ResolvabilityBanks fit_resolvability_banks(const RowMatrix& uar_li, const RowMatrix& uai_li,
                                                  const DistanceOptions& opts,
                                                  std::optional<PcaProjector> projector = {}) {
  detail::require(uar_li.rows() >= 2 && uai_li.rows() >= 2,
                  "UAR and UAI calibration partitions need at least 2 members each (got " +
                      std::to_string(uar_li.rows()) + " UAR, " + std::to_string(uai_li.rows()) +
                      " UAI)",
                  ErrorCode::degenerate_taxonomy);
  detail::require(uar_li.cols() == uai_li.cols(), "partition dimensions differ");
  RowMatrix uar = projector ? projector->project_rows(uar_li) : uar_li;
  RowMatrix uai = projector ? projector->project_rows(uai_li) : uai_li;

  if (opts.backend == Backend::knn) {
    const auto k_uar = std::min<std::size_t>(opts.k, static_cast<std::size_t>(uar.rows()));
    const auto k_uai = std::min<std::size_t>(opts.k, static_cast<std::size_t>(uai.rows()));
    return {DistanceModel(NeighborBank(std::move(uar), k_uar, opts.unit_norm)),
            DistanceModel(NeighborBank(std::move(uai), k_uai, opts.unit_norm)),
            std::move(projector)};
  }
  RowMatrix stacked(uar.rows() + uai.rows(), uar.cols());
  stacked << uar, uai;
  std::vector<int> groups(static_cast<std::size_t>(stacked.rows()), 1);
  std::fill(groups.begin(), groups.begin() + uar.rows(), 0);
  const GaussianBank joint = fit_gaussian_bank(stacked, groups, opts.shrinkage);
  return {DistanceModel(joint.subset(0)), DistanceModel(joint.subset(1)), std::move(projector)};
}

/// Runs the static taxonomy in both domains, the oracle, and fits one bank per
/// resolvability partition of the LI features.
inline ResolvabilityBanks build_resolvability_banks(std::span<const RecordPair> calib_pairs,
                                                    const DistanceModel& li_eu,
                                                    const DistanceModel& hi_eu,
                                                    const Thresholds& li_th,
                                                    const Thresholds& hi_th,
                                                    const ResolvabilityOptions& opts) {
  detail::require(!calib_pairs.empty(), "no calibration pairs");
  detail::require(li_th.domain() == Domain::LI && hi_th.domain() == Domain::HI,
                  "thresholds passed for the wrong domains");
  std::vector<FeatureRecord> li_records;
  li_records.reserve(calib_pairs.size());
  std::vector<std::size_t> uar_rows, uai_rows;
  for (std::size_t i = 0; i < calib_pairs.size(); ++i) {
    const auto& p = calib_pairs[i];
    detail::require(p.li.domain == Domain::LI && p.hi.domain == Domain::HI,
                    "calibration pair domains are not (LI, HI)");
    const StaticLabel li = classify_static(li_eu.score(p.li.features), p.li.probs, li_th);
    li_records.push_back(p.li);
    if (li.tag != StaticTag::UA) continue;
    const StaticLabel hi = classify_static(hi_eu.score(p.hi.features), p.hi.probs, hi_th);
    (classify_dynamic_oracle(li.tag, hi.tag) == DynamicTag::UAR ? uar_rows : uai_rows).push_back(i);
  }
  const RowMatrix all_li = feature_matrix(li_records);
  auto gather = [&](const std::vector<std::size_t>& rows) {
    RowMatrix m(static_cast<Eigen::Index>(rows.size()), all_li.cols());
    for (std::size_t r = 0; r < rows.size(); ++r) {
      m.row(static_cast<Eigen::Index>(r)) = all_li.row(static_cast<Eigen::Index>(rows[r]));
    }
    return m;
  };
  std::optional<PcaProjector> projector;
  if (opts.pca_dims > 0) projector = fit_pca(all_li, opts.pca_dims);
  return fit_resolvability_banks(gather(uar_rows), gather(uai_rows), opts.distance,
                                 std::move(projector));
}

/// C and UE pass through; UA becomes UAR iff strictly closer to the UAR
/// prototypes (ties go to UAI).
inline DynamicLabel classify_dynamic_surrogate(const FeatureRecord& li_record,
                                               const StaticLabel& li_label,
                                               const ResolvabilityBanks& banks) {
  detail::require(li_record.domain == Domain::LI, "surrogate expects an LI-domain record");
  DynamicLabel out;
  out.source = LabelSource::surrogate;
  if (li_label.tag == StaticTag::C) {
    out.tag = DynamicTag::C;
    return out;
  }
  if (li_label.tag == StaticTag::UE) {
    out.tag = DynamicTag::UE;
    return out;
  }
  const auto [d_uar, d_uai] = banks.distances(li_record.features);
  out.tag = d_uar < d_uai ? DynamicTag::UAR : DynamicTag::UAI;
  out.d_uar = d_uar;
  out.d_uai = d_uai;
  return out;
}

struct AgreementReport {
  double f1_uar = std::numeric_limits<double>::quiet_NaN();
  double f1_uai = std::numeric_limits<double>::quiet_NaN();
  /// Mean over the tags that occur in either list; NaN when neither does.
  double mean_f1 = std::numeric_limits<double>::quiet_NaN();
  std::size_t evaluated = 0;
};

/// One-vs-rest F1 for UAR and UAI over samples whose oracle tag is UAR or UAI.
inline AgreementReport surrogate_agreement(std::span<const DynamicTag> oracle,
                                           std::span<const DynamicTag> surrogate) {
  detail::require(oracle.size() == surrogate.size(), "label lists differ in length");
  AgreementReport rep;
  std::size_t tp[2] = {0, 0}, fp[2] = {0, 0}, fn[2] = {0, 0};
  const DynamicTag tags[2] = {DynamicTag::UAR, DynamicTag::UAI};
  for (std::size_t i = 0; i < oracle.size(); ++i) {
    if (oracle[i] != DynamicTag::UAR && oracle[i] != DynamicTag::UAI) continue;
    ++rep.evaluated;
    for (int t = 0; t < 2; ++t) {
      const bool truth = oracle[i] == tags[t];
      const bool pred = surrogate[i] == tags[t];
      if (truth && pred) ++tp[t];
      else if (pred) ++fp[t];
      else if (truth) ++fn[t];
    }
  }
  double f1[2];
  double sum = 0.0;
  int used = 0;
  for (int t = 0; t < 2; ++t) {
    const std::size_t denom = 2 * tp[t] + fp[t] + fn[t];
    f1[t] = denom == 0 ? std::numeric_limits<double>::quiet_NaN()
                       : 2.0 * static_cast<double>(tp[t]) / static_cast<double>(denom);
    if (denom != 0) {
      sum += f1[t];
      ++used;
    }
  }
  rep.f1_uar = f1[0];
  rep.f1_uai = f1[1];
  if (used > 0) rep.mean_f1 = sum / used;
  return rep;
}

}  // namespace adaptau
