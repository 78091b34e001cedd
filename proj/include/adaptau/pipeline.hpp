#pragma once

// End-to-end composition: per-domain EU banks and thresholds fitted on a
// stratified calibration subset, the resolvability surrogate, query policies
// and evaluation of the fused predictions.

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

#include "adaptau/adaptive.hpp"
#include "adaptau/calibrate.hpp"
#include "adaptau/core.hpp"
#include "adaptau/distance.hpp"
#include "adaptau/dynamic.hpp"
#include "adaptau/metrics.hpp"
#include "adaptau/parallel.hpp"

namespace adaptau {

enum class TauAuSource { calibration, training };

inline TauAuSource parse_tau_au_source(std::string_view s) {
  if (s == "calibration") return TauAuSource::calibration;
  if (s == "training") return TauAuSource::training;
  throw Error(ErrorCode::validation, "unknown tau_au source '" + std::string(s) + "'");
}

inline const char* to_string(TauAuSource s) {
  return s == TauAuSource::training ? "training" : "calibration";
}

struct FitOptions {
  DistanceOptions distance;
  double tpr = 0.95;
  std::size_t calib_size = 6000;
  std::uint64_t seed = 0;
  std::size_t pca_dims = 0;
  TauAuSource tau_au_source = TauAuSource::calibration;
};

struct DomainModel {
  DistanceModel eu_bank;
  Thresholds thresholds;

  double eu(const FeatureRecord& r) const { return eu_bank.score(r.features); }
  StaticLabel classify(const FeatureRecord& r) const {
    return classify_static(eu(r), r.probs, thresholds);
  }
};

struct FittedModel {
  DomainModel li;
  DomainModel hi;
  ResolvabilityBanks resolvability;
  std::vector<std::size_t> calibration_indices;
};

namespace detail {

inline RowMatrix rows_of(std::span<const RecordPair> pairs, std::span<const std::size_t> idx,
                         Domain domain) {
  std::vector<FeatureRecord> picked;
  picked.reserve(idx.size());
  for (auto i : idx) picked.push_back(domain == Domain::LI ? pairs[i].li : pairs[i].hi);
  return feature_matrix(picked);
}

inline DomainModel fit_domain(std::span<const RecordPair> pairs, std::span<const std::size_t> calib,
                              std::span<const int> labels, Domain domain, const FitOptions& opts) {
  const RowMatrix x = rows_of(pairs, calib, domain);
  std::vector<int> calib_labels;
  for (auto i : calib) calib_labels.push_back(labels[i]);
  DistanceModel bank = fit_distance_model(x, calib_labels, opts.distance);

  auto record = [&](std::size_t i) -> const FeatureRecord& {
    return domain == Domain::LI ? pairs[i].li : pairs[i].hi;
  };
  std::vector<double> calib_eu;
  calib_eu.reserve(calib.size());
  for (auto i : calib) calib_eu.push_back(bank.score(record(i).features));
  const double tau_eu = calibrate_tau_eu(calib_eu, opts.tpr);

  std::vector<AuCalibrationSample> au;
  auto add = [&](std::size_t i, double eu) {
    const auto& r = record(i);
    au.push_back({eu, entropy(r.probs), r.predicted() == static_cast<std::size_t>(labels[i])});
  };
  if (opts.tau_au_source == TauAuSource::calibration) {
    for (std::size_t j = 0; j < calib.size(); ++j) add(calib[j], calib_eu[j]);
  } else {
    for (std::size_t i = 0; i < pairs.size(); ++i) add(i, bank.score(record(i).features));
  }
  const std::size_t classes = record(0).num_classes();
  const double tau_au = calibrate_tau_au(au, tau_eu, classes).tau_au;
  return DomainModel{std::move(bank), Thresholds(tau_eu, tau_au, domain, classes)};
}

}  // namespace detail

struct StaticModels {
  DomainModel li;
  DomainModel hi;
  std::vector<std::size_t> calibration_indices;
};

/// Fits both domains' EU banks and thresholds on a stratified calibration
/// draw from labelled training pairs.
inline StaticModels fit_static_models(std::span<const RecordPair> training, const FitOptions& opts,
                                      std::span<const int> groups = {}) {
  detail::require(!training.empty(), "no training pairs");
  std::vector<std::uint16_t> labels16;
  std::vector<int> labels;
  std::vector<FeatureRecord> li_only, hi_only;
  for (const auto& p : training) {
    detail::require(p.li.label.has_value(), "training pairs must be labelled",
                    ErrorCode::missing_field);
    detail::require(p.li.domain == Domain::LI && p.hi.domain == Domain::HI,
                    "training pair domains are not (LI, HI)");
    labels16.push_back(*p.li.label);
    labels.push_back(*p.li.label);
    li_only.push_back(p.li);
    hi_only.push_back(p.hi);
  }
  const std::size_t c_li = validate_records(li_only).second;
  const std::size_t c_hi = validate_records(hi_only).second;
  detail::require(c_li == c_hi, "LI and HI class counts differ");

  const std::size_t target = std::min(opts.calib_size, training.size());
  auto calib = stratified_indices(labels16, groups, target, opts.seed);
  DomainModel li = detail::fit_domain(training, calib, labels, Domain::LI, opts);
  DomainModel hi = detail::fit_domain(training, calib, labels, Domain::HI, opts);
  return StaticModels{std::move(li), std::move(hi), std::move(calib)};
}

/// Static models plus the resolvability banks, fitted on the same draw.
inline FittedModel fit_model(std::span<const RecordPair> training, const FitOptions& opts,
                             std::span<const int> groups = {}) {
  StaticModels st = fit_static_models(training, opts, groups);
  std::vector<RecordPair> calib_pairs;
  calib_pairs.reserve(st.calibration_indices.size());
  for (auto i : st.calibration_indices) calib_pairs.push_back(training[i]);
  ResolvabilityBanks banks = build_resolvability_banks(
      calib_pairs, st.li.eu_bank, st.hi.eu_bank, st.li.thresholds, st.hi.thresholds,
      ResolvabilityOptions{opts.distance, opts.pca_dims});
  return FittedModel{std::move(st.li), std::move(st.hi), std::move(banks),
                     std::move(st.calibration_indices)};
}

inline std::vector<RecordPair> zip_pairs(std::span<const FeatureRecord> li,
                                         std::span<const FeatureRecord> hi) {
  detail::require(li.size() == hi.size(), "LI and HI record counts differ");
  std::vector<RecordPair> out;
  out.reserve(li.size());
  for (std::size_t i = 0; i < li.size(); ++i) out.push_back({li[i], hi[i]});
  return out;
}

/// Scores records in parallel batches; `workers` = 0 uses every hardware thread.
inline std::vector<StaticLabel> classify_all(std::span<const FeatureRecord> records,
                                             const DomainModel& model, std::size_t workers = 0) {
  std::vector<StaticLabel> out(records.size());
  parallel_for(records.size(), [&](std::size_t i) { out[i] = model.classify(records[i]); }, workers);
  return out;
}

/// LI static label, surrogate dynamic label and entropy for every LI record.
inline std::vector<SampleAssessment> assess(std::span<const FeatureRecord> li_records,
                                            const FittedModel& model, std::size_t workers = 0) {
  std::vector<SampleAssessment> out(li_records.size());
  parallel_for(
      li_records.size(),
      [&](std::size_t i) {
        const auto& r = li_records[i];
        const StaticLabel st = model.li.classify(r);
        out[i] = {st, classify_dynamic_surrogate(r, st, model.resolvability), entropy(r.probs)};
      },
      workers);
  return out;
}

inline std::vector<DynamicTag> oracle_tags(std::span<const StaticLabel> li,
                                           std::span<const StaticLabel> hi) {
  detail::require(li.size() == hi.size(), "LI and HI label counts differ");
  std::vector<DynamicTag> out;
  out.reserve(li.size());
  for (std::size_t i = 0; i < li.size(); ++i) out.push_back(classify_dynamic_oracle(li[i].tag, hi[i].tag));
  return out;
}

enum class QueryPolicy { finegrained, random, maxau };

inline QueryPolicy parse_policy(std::string_view s) {
  if (s == "finegrained") return QueryPolicy::finegrained;
  if (s == "random") return QueryPolicy::random;
  if (s == "maxau") return QueryPolicy::maxau;
  throw Error(ErrorCode::validation, "unknown policy '" + std::string(s) + "'");
}

inline const char* to_string(QueryPolicy p) {
  switch (p) {
    case QueryPolicy::finegrained: return "finegrained";
    case QueryPolicy::random: return "random";
    case QueryPolicy::maxau: return "maxau";
  }
  return "?";
}

inline QueryPlan make_plan(QueryPolicy policy, std::span<const SampleAssessment> samples,
                           const CostModel& cost, std::optional<double> budget,
                           std::uint64_t seed = 0, RandomPool pool = RandomPool::all) {
  switch (policy) {
    case QueryPolicy::finegrained: return select_queries(samples, cost, budget);
    case QueryPolicy::random: return baseline_random(samples, cost, budget, seed, pool);
    case QueryPolicy::maxau: return baseline_max_au(samples, cost, budget);
  }
  return select_queries(samples, cost, budget);
}

struct PlanMetrics {
  double macro_f1 = 0.0;
  double ece = 0.0;
  double p_accurate_certain = 0.0;
  std::vector<double> per_class_f1;
};

/// Certainty of each fused sample: its static tag in the domain it was
/// finally predicted from is C.
inline std::vector<bool> fused_certainty(std::span<const Domain> provenance,
                                         std::span<const StaticLabel> li_static,
                                         std::span<const StaticLabel> hi_static) {
  detail::require(provenance.size() == li_static.size() && li_static.size() == hi_static.size(),
                  "input lengths differ");
  std::vector<bool> certain(provenance.size());
  for (std::size_t i = 0; i < provenance.size(); ++i) {
    const auto& st = provenance[i] == Domain::HI ? hi_static[i] : li_static[i];
    certain[i] = st.tag == StaticTag::C;
  }
  return certain;
}

inline PlanMetrics score_predictions(std::span<const ProbabilityVector> probs,
                                     std::span<const std::size_t> truth,
                                     const std::vector<bool>& certain, std::size_t n_bins) {
  detail::require(!probs.empty(), "no predictions to score");
  std::vector<std::size_t> pred;
  pred.reserve(probs.size());
  for (const auto& p : probs) pred.push_back(p.argmax());
  const auto f1 = macro_f1(pred, truth, probs.front().size());
  PlanMetrics m;
  m.macro_f1 = f1.macro;
  m.per_class_f1 = f1.per_class;
  m.ece = ece(probs, truth, n_bins);
  m.p_accurate_certain = p_accurate_certain(pred, truth, certain);
  return m;
}

inline std::vector<std::size_t> labels_of(std::span<const FeatureRecord> records) {
  std::vector<std::size_t> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    detail::require(r.label.has_value(), "evaluation needs labelled records",
                    ErrorCode::missing_field);
    out.push_back(*r.label);
  }
  return out;
}

/// Fuses LI/HI predictions under `plan` and scores the result.
inline PlanMetrics evaluate_plan(std::span<const FeatureRecord> li, std::span<const FeatureRecord> hi,
                                 std::span<const StaticLabel> li_static,
                                 std::span<const StaticLabel> hi_static, const QueryPlan& plan,
                                 std::size_t n_bins = kDefaultEceBins) {
  detail::require(li.size() == hi.size(), "LI and HI record counts differ");
  std::vector<ProbabilityVector> li_p, hi_p;
  for (const auto& r : li) li_p.push_back(r.probs);
  for (const auto& r : hi) hi_p.push_back(r.probs);
  const auto fused = fuse_predictions(li_p, hi_p, plan);
  const auto certain = fused_certainty(fused.provenance, li_static, hi_static);
  return score_predictions(fused.probs, labels_of(li), certain, n_bins);
}

/// Kendall tau between EU and raw entropy, and AUCC, for one domain.
struct StaticQuality {
  double kendall_tau = std::numeric_limits<double>::quiet_NaN();
  double aucc = std::numeric_limits<double>::quiet_NaN();
};

inline StaticQuality static_quality(std::span<const FeatureRecord> records, const DomainModel& model,
                                    std::span<const double> coverage_grid,
                                    std::size_t n_bins = kDefaultEceBins) {
  std::vector<double> eu, h;
  std::vector<ProbabilityVector> probs;
  for (const auto& r : records) {
    eu.push_back(model.eu(r));
    h.push_back(entropy(r.probs));
    probs.push_back(r.probs);
  }
  StaticQuality q;
  q.kendall_tau = kendall_tau(eu, h);
  q.aucc = aucc(probs, labels_of(records), eu, coverage_grid, n_bins);
  return q;
}

struct SweepSpec {
  QueryPolicy policy = QueryPolicy::finegrained;
  CostModel cost;
  std::vector<double> budgets;
  /// Budget for the point metrics; defaults to the cost of the unconstrained
  /// fine-grained plan.
  std::optional<double> point_budget;
  std::uint64_t seed = 0;
  RandomPool pool = RandomPool::all;
  std::size_t n_bins = kDefaultEceBins;
  std::vector<double> coverage_grid = default_coverage_grid();
};

/// Budget sweep over a paired test set: point metrics, metric-vs-budget curves
/// and their span-normalized integrals, plus static uncertainty quality
/// averaged over both domains.
inline EvalReport run_sweep(std::span<const FeatureRecord> li, std::span<const FeatureRecord> hi,
                            const FittedModel& model, const SweepSpec& spec) {
  const auto samples = assess(li, model);
  const auto li_static = classify_all(li, model.li);
  const auto hi_static = classify_all(hi, model.hi);

  EvalReport rep;
  const double point_budget = spec.point_budget.value_or(
      select_queries(samples, spec.cost, std::nullopt).realized_cost);
  const auto point = evaluate_plan(
      li, hi, li_static, hi_static,
      make_plan(spec.policy, samples, spec.cost, point_budget, spec.seed, spec.pool), spec.n_bins);
  rep.macro_f1 = point.macro_f1;
  rep.ece = point.ece;
  rep.p_accurate_certain = point.p_accurate_certain;
  rep.per_class_f1 = point.per_class_f1;

  for (double b : spec.budgets) {
    const auto m = evaluate_plan(li, hi, li_static, hi_static,
                                 make_plan(spec.policy, samples, spec.cost, b, spec.seed, spec.pool),
                                 spec.n_bins);
    rep.f1_curve.emplace_back(b, m.macro_f1);
    rep.ece_curve.emplace_back(b, m.ece);
    rep.pac_curve.emplace_back(b, m.p_accurate_certain);
  }
  if (rep.f1_curve.size() >= 2) {
    rep.int_f1 = budget_auc(rep.f1_curve);
    rep.int_ece = budget_auc(rep.ece_curve);
    rep.int_pac = budget_auc(rep.pac_curve);
  }
  const auto q_li = static_quality(li, model.li, spec.coverage_grid, spec.n_bins);
  const auto q_hi = static_quality(hi, model.hi, spec.coverage_grid, spec.n_bins);
  rep.kendall_tau = 0.5 * (q_li.kendall_tau + q_hi.kendall_tau);
  rep.aucc = 0.5 * (q_li.aucc + q_hi.aucc);
  return rep;
}

}  // namespace adaptau
