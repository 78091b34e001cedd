#pragma once

// Evaluation metrics: macro F1, expected calibration error, P(accurate,
// certain), Kendall tau-b, area under the calibration-coverage curve, and the
// span-normalized trapezoid used for budget sweeps.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "adaptau/core.hpp"
#include "adaptau/error.hpp"

namespace adaptau {

struct F1Result {
  double macro = 0.0;
  /// One entry per class; classes neither present nor predicted hold 0 and
  /// are left out of the macro average.
  std::vector<double> per_class;
  std::vector<bool> counted;
};

inline F1Result macro_f1(std::span<const std::size_t> predicted, std::span<const std::size_t> truth,
                         std::size_t num_classes) {
  detail::require(predicted.size() == truth.size(), "prediction and label counts differ");
  detail::require(num_classes >= 1, "need at least one class");
  std::vector<std::size_t> tp(num_classes), fp(num_classes), fn(num_classes);
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    detail::require(predicted[i] < num_classes && truth[i] < num_classes, "label out of range");
    if (predicted[i] == truth[i]) {
      ++tp[truth[i]];
    } else {
      ++fp[predicted[i]];
      ++fn[truth[i]];
    }
  }
  F1Result r;
  r.per_class.assign(num_classes, 0.0);
  r.counted.assign(num_classes, false);
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::size_t denom = 2 * tp[c] + fp[c] + fn[c];
    if (denom == 0) continue;
    r.per_class[c] = 2.0 * static_cast<double>(tp[c]) / static_cast<double>(denom);
    r.counted[c] = true;
    sum += r.per_class[c];
    ++used;
  }
  r.macro = used == 0 ? 0.0 : sum / static_cast<double>(used);
  return r;
}

inline constexpr std::size_t kDefaultEceBins = 15;

/// Equal-width, right-closed bins over max-probability confidence; bin b
/// covers (b/B, (b+1)/B], with zero confidence folded into the first bin.
inline double ece(std::span<const ProbabilityVector> probs, std::span<const std::size_t> truth,
                  std::size_t n_bins = kDefaultEceBins) {
  detail::require(!probs.empty(), "ECE of an empty set");
  detail::require(probs.size() == truth.size(), "prediction and label counts differ");
  detail::require(n_bins >= 1, "need at least one bin");
  std::vector<double> conf_sum(n_bins, 0.0), acc_sum(n_bins, 0.0);
  std::vector<std::size_t> count(n_bins, 0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const double conf = probs[i].max();
    auto bin = static_cast<std::ptrdiff_t>(std::ceil(conf * static_cast<double>(n_bins))) - 1;
    bin = std::clamp<std::ptrdiff_t>(bin, 0, static_cast<std::ptrdiff_t>(n_bins) - 1);
    const auto b = static_cast<std::size_t>(bin);
    conf_sum[b] += conf;
    acc_sum[b] += probs[i].argmax() == truth[i] ? 1.0 : 0.0;
    ++count[b];
  }
  double total = 0.0;
  for (std::size_t b = 0; b < n_bins; ++b) {
    if (count[b] == 0) continue;
    total += std::abs(acc_sum[b] - conf_sum[b]);
  }
  return total / static_cast<double>(probs.size());
}

/// Fraction of all samples that are simultaneously accurate and certain.
inline double p_accurate_certain(std::span<const std::size_t> predicted,
                                 std::span<const std::size_t> truth,
                                 const std::vector<bool>& certain) {
  detail::require(predicted.size() == truth.size() && truth.size() == certain.size(),
                  "input lengths differ");
  detail::require(!predicted.empty(), "P(a,c) of an empty set");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    if (certain[i] && predicted[i] == truth[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(predicted.size());
}

namespace detail {

/// Merge sort that counts inversions (pairs out of order, strict).
inline std::uint64_t sort_count_swaps(std::vector<double>& v, std::vector<double>& buf,
                                      std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::uint64_t swaps = sort_count_swaps(v, buf, lo, mid) + sort_count_swaps(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += mid - i;
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

template <typename It, typename Eq>
std::uint64_t tied_pairs(It first, It last, Eq eq) {
  std::uint64_t total = 0;
  while (first != last) {
    It run = first;
    std::uint64_t len = 0;
    while (run != last && eq(*run, *first)) {
      ++run;
      ++len;
    }
    total += len * (len - 1) / 2;
    first = run;
  }
  return total;
}

}  // namespace detail

/// Kendall tau-b in O(n log n) (Knight's algorithm).
inline double kendall_tau(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size(), "input lengths differ");
  detail::require(x.size() >= 2, "Kendall tau needs at least 2 samples");
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });
  std::vector<std::pair<double, double>> xy(n);
  for (std::size_t i = 0; i < n; ++i) xy[i] = {x[order[i]], y[order[i]]};

  const std::uint64_t total = static_cast<std::uint64_t>(n) * (n - 1) / 2;
  const std::uint64_t tied_x =
      detail::tied_pairs(xy.begin(), xy.end(), [](const auto& a, const auto& b) { return a.first == b.first; });
  const std::uint64_t tied_xy =
      detail::tied_pairs(xy.begin(), xy.end(), [](const auto& a, const auto& b) { return a == b; });

  std::vector<double> ys(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) ys[i] = xy[i].second;
  const std::uint64_t swaps = detail::sort_count_swaps(ys, buf, 0, n);
  const std::uint64_t tied_y =
      detail::tied_pairs(ys.begin(), ys.end(), [](double a, double b) { return a == b; });

  detail::require(tied_x < total && tied_y < total,
                  "Kendall tau undefined: one input is constant");
  // concordant - discordant = total - tied_x - tied_y + tied_xy - 2 * swaps
  const double numer = static_cast<double>(total) - static_cast<double>(tied_x) -
                       static_cast<double>(tied_y) + static_cast<double>(tied_xy) -
                       2.0 * static_cast<double>(swaps);
  // one sqrt of the product, so untied perfect agreement gives exactly +-1
  const double denom =
      std::sqrt(static_cast<double>(total - tied_x) * static_cast<double>(total - tied_y));
  return std::clamp(numer / denom, -1.0, 1.0);
}

/// Trapezoid integral over strictly increasing x, divided by the x span.
inline double budget_auc(std::span<const std::pair<double, double>> curve) {
  detail::require(curve.size() >= 2, "budget AUC needs at least 2 points");
  double area = 0.0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    const double dx = curve[i].first - curve[i - 1].first;
    detail::require(dx > 0.0, "curve abscissae must be strictly increasing");
    area += 0.5 * dx * (curve[i].second + curve[i - 1].second);
  }
  return area / (curve.back().first - curve.front().first);
}

/// {0.05, 0.10, ..., 0.95, 1.0}.
inline std::vector<double> default_coverage_grid() {
  std::vector<double> grid;
  for (int i = 1; i <= 19; ++i) grid.push_back(0.05 * i);
  grid.push_back(1.0);
  return grid;
}

struct CoverageCurve {
  std::vector<std::pair<double, double>> points;  // (coverage, ECE of retained set)
  double aucc = 0.0;
};

/// Retains the floor(c * n) lowest-EU samples at each coverage c (extended to
/// include every sample tied with the last retained EU) and integrates ECE
/// over coverage. Grid points that retain nothing are skipped.
inline CoverageCurve calibration_coverage(std::span<const ProbabilityVector> probs,
                                          std::span<const std::size_t> truth,
                                          std::span<const double> eu,
                                          std::span<const double> coverage_grid,
                                          std::size_t n_bins = kDefaultEceBins) {
  detail::require(probs.size() == truth.size() && truth.size() == eu.size(),
                  "input lengths differ");
  detail::require(!probs.empty(), "AUCC of an empty set");
  detail::require(!coverage_grid.empty(), "empty coverage grid");
  const std::size_t n = probs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return eu[a] < eu[b]; });

  std::vector<double> grid(coverage_grid.begin(), coverage_grid.end());
  for (double c : grid) detail::require(c > 0.0 && c <= 1.0, "coverage values must lie in (0, 1]");
  std::sort(grid.begin(), grid.end());

  CoverageCurve curve;
  for (double c : grid) {
    auto keep = static_cast<std::size_t>(std::floor(c * static_cast<double>(n) + 1e-9));
    if (keep == 0) continue;
    while (keep < n && eu[order[keep]] == eu[order[keep - 1]]) ++keep;
    std::vector<ProbabilityVector> p;
    std::vector<std::size_t> t;
    p.reserve(keep);
    t.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
      p.push_back(probs[order[i]]);
      t.push_back(truth[order[i]]);
    }
    curve.points.emplace_back(c, ece(p, t, n_bins));
  }
  detail::require(!curve.points.empty(), "every coverage level retained zero samples");
  curve.aucc = curve.points.size() == 1 ? curve.points.front().second : budget_auc(curve.points);
  return curve;
}

inline double aucc(std::span<const ProbabilityVector> probs, std::span<const std::size_t> truth,
                   std::span<const double> eu, std::span<const double> coverage_grid,
                   std::size_t n_bins = kDefaultEceBins) {
  return calibration_coverage(probs, truth, eu, coverage_grid, n_bins).aucc;
}

/// Metric bundle reported per evaluation. Absent values are NaN.
struct EvalReport {
  double macro_f1 = std::numeric_limits<double>::quiet_NaN();
  double ece = std::numeric_limits<double>::quiet_NaN();
  double p_accurate_certain = std::numeric_limits<double>::quiet_NaN();
  double kendall_tau = std::numeric_limits<double>::quiet_NaN();
  double aucc = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> per_class_f1;
  std::vector<std::pair<double, double>> f1_curve, ece_curve, pac_curve;
  double int_f1 = std::numeric_limits<double>::quiet_NaN();
  double int_ece = std::numeric_limits<double>::quiet_NaN();
  double int_pac = std::numeric_limits<double>::quiet_NaN();
};

}  // namespace adaptau
