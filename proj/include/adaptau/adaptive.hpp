#pragma once

// Budgeted HI query selection and LI/HI prediction fusion.
//
// Costs are normalized per full pass: imaging everything at LI costs t_li,
// and re-imaging a fraction rho of the samples at HI adds rho * t_hi, so the
// realized adaptive cost is T_A = t_li + rho * t_hi. A budget bounds T_A.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adaptau/core.hpp"
#include "adaptau/dynamic.hpp"
#include "adaptau/error.hpp"

namespace adaptau {

struct CostModel {
  double t_li = 1.0;
  double t_hi = 250.0;

  void validate() const {
    detail::require(std::isfinite(t_li) && t_li > 0.0, "t_li must be positive");
    detail::require(std::isfinite(t_hi) && t_hi > 0.0, "t_hi must be positive");
    detail::require(t_hi >= t_li, "t_hi must be at least t_li");
  }

  /// T_A for `queried` HI acquisitions out of `n_total` samples.
  double realized(std::size_t queried, std::size_t n_total) const {
    if (n_total == 0) return t_li;
    return t_li + static_cast<double>(queried) * t_hi / static_cast<double>(n_total);
  }

  /// Largest query count whose realized cost stays within `budget`.
  std::size_t max_queries(double budget, std::size_t n_total) const {
    if (budget < t_li || n_total == 0) return 0;
    const double headroom = (budget - t_li) * static_cast<double>(n_total) / t_hi;
    auto count = static_cast<std::size_t>(
        std::min(std::floor(headroom + 1e-9), static_cast<double>(n_total)));
    while (count > 0 && realized(count, n_total) > budget) --count;
    return count;
  }
};

enum class PlanStatus : std::uint8_t {
  ok = 0,
  /// The budget does not even cover the LI pass; nothing was selected.
  budget_below_li_cost = 1,
};

struct QueryPlan {
  std::vector<std::size_t> selected;
  /// Ranking key of each selected sample, ascending.
  std::vector<double> ranking_scores;
  double realized_cost = 0.0;
  std::optional<double> budget;
  std::size_t n_total = 0;
  PlanStatus status = PlanStatus::ok;

  double query_fraction() const {
    return n_total == 0 ? 0.0 : static_cast<double>(selected.size()) / static_cast<double>(n_total);
  }
};

/// Everything the query policies need to know about one LI sample.
struct SampleAssessment {
  StaticLabel li_static;
  DynamicLabel dynamic;
  /// LI predictive entropy, defined even where the static AU is n/a.
  double entropy = 0.0;
};

namespace detail {

struct Ranked {
  std::size_t index;
  double key;
};

inline QueryPlan take_prefix(std::vector<Ranked> ranked, std::size_t n_total,
                             const CostModel& cost, std::optional<double> budget) {
  cost.validate();
  if (budget) {
    require(std::isfinite(*budget), "budget must be finite");
    require(*budget >= 0.0, "budget must be non-negative");
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.key < b.key; });
  QueryPlan plan;
  plan.n_total = n_total;
  plan.budget = budget;
  std::size_t take = ranked.size();
  if (budget) {
    take = std::min(take, cost.max_queries(*budget, n_total));
    if (*budget < cost.t_li) plan.status = PlanStatus::budget_below_li_cost;
  }
  for (std::size_t i = 0; i < take; ++i) {
    plan.selected.push_back(ranked[i].index);
    plan.ranking_scores.push_back(ranked[i].key);
  }
  plan.realized_cost = cost.realized(plan.selected.size(), n_total);
  return plan;
}

}  // namespace detail

/// Surrogate-UAR samples by ascending d(z; D_v^UAR), truncated to the budget.
inline QueryPlan select_queries(std::span<const SampleAssessment> samples, const CostModel& cost,
                                std::optional<double> budget) {
  std::vector<detail::Ranked> ranked;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& dyn = samples[i].dynamic;
    if (dyn.tag != DynamicTag::UAR) continue;
    detail::require(dyn.d_uar.has_value() && std::isfinite(*dyn.d_uar),
                    "UAR sample " + std::to_string(i) + " has no finite ranking score");
    ranked.push_back({i, *dyn.d_uar});
  }
  return detail::take_prefix(std::move(ranked), samples.size(), cost, budget);
}

/// Static-UA samples by descending LI entropy. Ranking keys are negated
/// entropies so that they ascend.
inline QueryPlan baseline_max_au(std::span<const SampleAssessment> samples, const CostModel& cost,
                                 std::optional<double> budget) {
  std::vector<detail::Ranked> ranked;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].li_static.tag != StaticTag::UA) continue;
    ranked.push_back({i, -samples[i].entropy});
  }
  return detail::take_prefix(std::move(ranked), samples.size(), cost, budget);
}

enum class RandomPool { all, ua };

inline RandomPool parse_random_pool(std::string_view s) {
  if (s == "all") return RandomPool::all;
  if (s == "ua") return RandomPool::ua;
  throw Error(ErrorCode::validation, "unknown random pool '" + std::string(s) + "'");
}

inline const char* to_string(RandomPool p) { return p == RandomPool::ua ? "ua" : "all"; }

/// Uniform draw without replacement; ranking keys are draw positions.
inline QueryPlan baseline_random(std::span<const SampleAssessment> samples, const CostModel& cost,
                                 std::optional<double> budget, std::uint64_t seed,
                                 RandomPool pool = RandomPool::all) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (pool == RandomPool::all || samples[i].li_static.tag == StaticTag::UA) eligible.push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(eligible.begin(), eligible.end(), rng);
  std::vector<detail::Ranked> ranked;
  for (std::size_t pos = 0; pos < eligible.size(); ++pos) {
    ranked.push_back({eligible[pos], static_cast<double>(pos)});
  }
  return detail::take_prefix(std::move(ranked), samples.size(), cost, budget);
}

struct FusedPredictions {
  std::vector<ProbabilityVector> probs;
  std::vector<Domain> provenance;
};

/// HI prediction on selected samples, LI prediction elsewhere.
inline FusedPredictions fuse_predictions(std::span<const ProbabilityVector> li_probs,
                                         std::span<const std::optional<ProbabilityVector>> hi_probs,
                                         const QueryPlan& plan) {
  detail::require(hi_probs.size() == li_probs.size(), "LI and HI prediction counts differ");
  FusedPredictions out;
  out.probs.assign(li_probs.begin(), li_probs.end());
  out.provenance.assign(li_probs.size(), Domain::LI);
  for (auto idx : plan.selected) {
    detail::require(idx < li_probs.size(), "plan index " + std::to_string(idx) + " out of range");
    detail::require(out.provenance[idx] == Domain::LI,
                    "plan selects index " + std::to_string(idx) + " twice");
    detail::require(hi_probs[idx].has_value(),
                    "no HI prediction for selected index " + std::to_string(idx),
                    ErrorCode::missing_field);
    detail::require(hi_probs[idx]->size() == li_probs[idx].size(),
                    "LI and HI class counts differ");
    out.probs[idx] = *hi_probs[idx];
    out.provenance[idx] = Domain::HI;
  }
  return out;
}

inline FusedPredictions fuse_predictions(std::span<const ProbabilityVector> li_probs,
                                         std::span<const ProbabilityVector> hi_probs,
                                         const QueryPlan& plan) {
  std::vector<std::optional<ProbabilityVector>> wrapped(hi_probs.begin(), hi_probs.end());
  return fuse_predictions(li_probs, wrapped, plan);
}

}  // namespace adaptau
