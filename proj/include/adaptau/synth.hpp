#pragma once

// Synthetic paired LI/HI feature dumps with planted C/UAR/UAI/UE categories.
//
// Geometry, per domain of dimension d and class separation s (noise sigma = 1):
//   axes 0..C-1      class centroids mu_c = (s / sqrt 2) e_c, pairwise distance s
//   axis C           UAR offset (LI only)
//   axis C+1         UAI offset (LI only)
//   axes C+2..d-1    free subspace used for UE displacement (LI only)
// Probabilities are softmax(-||z - mu_k||^2). Ambiguous placements sit on the
// segment between the true centroid and a confuser centroid, nudged so that the
// confuser wins by a small logit margin: the sample is uncertain and its argmax
// is wrong. C placements are always confidently correct.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "adaptau/core.hpp"
#include "adaptau/dynamic.hpp"
#include "adaptau/error.hpp"

namespace adaptau {

struct SynthConfig {
  std::size_t n_samples = 20000;
  std::size_t num_classes = 6;
  std::size_t d_hi = 64;
  std::size_t d_li = 16;
  double sep_hi = 8.0;
  double sep_li = 8.0;
  double frac_uar = 0.2;
  double frac_uai = 0.1;
  double frac_ue = 0.1;
  /// Jitter (sigma units) of ambiguous placements inside the centroid span.
  double noise_li = 0.02;
  /// Distance of UE placements from every cluster centre; at least 6 sigma.
  double ue_shift = 8.0;
  std::uint64_t seed = 0;

  double frac_c() const { return 1.0 - frac_uar - frac_uai - frac_ue; }

  void validate() const {
    detail::require(n_samples >= 1, "n_samples must be positive");
    detail::require(num_classes >= 2, "need at least 2 classes");
    detail::require(d_li >= 1 && d_hi >= 1, "dimensions must be positive");
    detail::require(d_li <= d_hi, "d_li must not exceed d_hi");
    for (double f : {frac_uar, frac_uai, frac_ue}) {
      detail::require(f >= 0.0 && f <= 1.0, "category fractions must lie in [0, 1]");
    }
    detail::require(frac_c() >= -1e-9, "category fractions exceed 1");
    detail::require(sep_li > 0.0 && sep_hi > 0.0, "separations must be positive");
    detail::require(noise_li >= 0.0, "noise_li must be non-negative");
    detail::require(d_li >= num_classes + 3,
                    "infeasible geometry: d_li must be at least C + 3 for the UAR/UAI/UE axes");
    detail::require(d_hi >= num_classes + 2,
                    "infeasible geometry: d_hi must be at least C + 2");
    detail::require(ue_shift >= 6.0, "infeasible geometry: UE displacement must be >= 6 sigma");
  }
};

struct SyntheticDataset {
  std::vector<FeatureRecord> li;
  std::vector<FeatureRecord> hi;
  std::vector<DynamicTag> planted;
};

namespace detail {

class SynthDomain {
 public:
  SynthDomain(std::size_t dim, std::size_t classes, double sep)
      : dim_(dim), classes_(classes), sep_(sep), scale_(sep / std::sqrt(2.0)) {}

  std::vector<double> centroid(std::size_t c) const {
    std::vector<double> v(dim_, 0.0);
    v[c] = scale_;
    return v;
  }

  std::vector<double> logits(const std::vector<float>& z) const {
    std::vector<double> out(classes_);
    for (std::size_t k = 0; k < classes_; ++k) {
      double sq = 0.0;
      for (std::size_t j = 0; j < dim_; ++j) {
        const double diff = static_cast<double>(z[j]) - (j == k ? scale_ : 0.0);
        sq += diff * diff;
      }
      out[k] = -sq;
    }
    return out;
  }

  ProbabilityVector probs(const std::vector<float>& z) const {
    auto l = logits(z);
    const double top = *std::max_element(l.begin(), l.end());
    for (double& v : l) v = std::exp(v - top);
    return ProbabilityVector::normalized(std::span<const double>(l));
  }

  /// Cluster sample around mu_label with a correct argmax and entropy at most
  /// `max_entropy`: redrawn up to a bound, then pushed outward along the label
  /// axis (needed when clusters overlap).
  std::vector<float> clean(std::size_t label, std::mt19937_64& rng, double max_entropy) const {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<float> z(dim_);
    auto confident = [&] {
      const auto p = probs(z);
      return p.argmax() == label && entropy(p) <= max_entropy;
    };
    for (int attempt = 0; attempt < 32; ++attempt) {
      for (std::size_t j = 0; j < dim_; ++j) {
        z[j] = static_cast<float>((j == label ? scale_ : 0.0) + gauss(rng));
      }
      if (confident()) return z;
    }
    while (!confident()) z[label] += 0.25f;
    return z;
  }

  /// Point between mu_truth and mu_confuser where the confuser's logit exceeds
  /// the truth's by `margin`, plus an optional offset along `offset_axis`.
  std::vector<float> ambiguous(std::size_t truth, std::size_t confuser, double margin,
                               double span_noise, std::size_t offset_axis, double offset,
                               std::mt19937_64& rng) const {
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::vector<double> z(dim_);
    for (std::size_t j = 0; j < dim_; ++j) {
      const double base = (j == truth || j == confuser) ? 0.5 * scale_ : 0.0;
      const double sigma = j < classes_ ? span_noise : 1.0;
      z[j] = base + sigma * gauss(rng);
    }
    if (offset_axis < dim_) z[offset_axis] += offset;
    // logit(confuser) - logit(truth) = 2 z . (mu_confuser - mu_truth)
    const double current = 2.0 * scale_ * (z[confuser] - z[truth]);
    const double step = (margin - current) / (2.0 * sep_ * sep_);
    z[confuser] += step * scale_;
    z[truth] -= step * scale_;
    return std::vector<float>(z.begin(), z.end());
  }

  std::size_t dim() const { return dim_; }
  double sep() const { return sep_; }

 private:
  std::size_t dim_;
  std::size_t classes_;
  double sep_;
  double scale_;
};

inline constexpr double kCleanMaxEntropy = 0.05;

}  // namespace detail

/// Deterministic given cfg.seed.
inline SyntheticDataset generate_paired_dataset(const SynthConfig& cfg) {
  cfg.validate();
  const std::size_t n = cfg.n_samples;
  const std::size_t c = cfg.num_classes;
  std::mt19937_64 rng(cfg.seed);

  const auto count = [n](double f) { return static_cast<std::size_t>(std::llround(f * static_cast<double>(n))); };
  const std::size_t n_uar = count(cfg.frac_uar);
  const std::size_t n_uai = std::min(n - std::min(n, n_uar), count(cfg.frac_uai));
  const std::size_t n_ue = std::min(n - n_uar - n_uai, count(cfg.frac_ue));
  std::vector<DynamicTag> planted(n, DynamicTag::C);
  std::fill_n(planted.begin(), n_uar, DynamicTag::UAR);
  std::fill_n(planted.begin() + static_cast<std::ptrdiff_t>(n_uar), n_uai, DynamicTag::UAI);
  std::fill_n(planted.begin() + static_cast<std::ptrdiff_t>(n_uar + n_uai), n_ue, DynamicTag::UE);
  std::shuffle(planted.begin(), planted.end(), rng);

  const detail::SynthDomain li(cfg.d_li, c, cfg.sep_li);
  const detail::SynthDomain hi(cfg.d_hi, c, cfg.sep_hi);
  const std::size_t uar_axis = c;
  const std::size_t uai_axis = c + 1;
  const std::size_t free_begin = c + 2;
  const std::size_t none = static_cast<std::size_t>(-1);

  std::uniform_int_distribution<std::size_t> pick_class(0, c - 1);
  std::uniform_int_distribution<std::size_t> pick_other(0, c - 2);
  std::uniform_real_distribution<double> uar_margin(0.2, 1.0);
  std::uniform_real_distribution<double> uai_margin(0.05, 0.4);
  std::normal_distribution<double> gauss(0.0, 1.0);

  SyntheticDataset out;
  out.li.reserve(n);
  out.hi.reserve(n);
  out.planted = planted;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t label = pick_class(rng);
    std::size_t confuser = pick_other(rng);
    if (confuser >= label) ++confuser;

    std::vector<float> z_li, z_hi;
    switch (planted[i]) {
      case DynamicTag::C:
        z_li = li.clean(label, rng, detail::kCleanMaxEntropy);
        z_hi = hi.clean(label, rng, detail::kCleanMaxEntropy);
        break;
      case DynamicTag::UAR:
        z_li = li.ambiguous(label, confuser, uar_margin(rng), cfg.noise_li, uar_axis,
                            0.5 * li.sep(), rng);
        z_hi = hi.clean(label, rng, detail::kCleanMaxEntropy);
        break;
      case DynamicTag::UAI:
        z_li = li.ambiguous(label, confuser, uai_margin(rng), cfg.noise_li, uai_axis,
                            0.5 * li.sep(), rng);
        z_hi = hi.ambiguous(label, confuser, uai_margin(rng), cfg.noise_li, none, 0.0, rng);
        break;
      case DynamicTag::UE: {
        z_li = li.clean(label, rng, detail::kCleanMaxEntropy);
        std::vector<double> dir(cfg.d_li - free_begin);
        double norm = 0.0;
        while (norm < 1e-6) {
          norm = 0.0;
          for (double& v : dir) {
            v = gauss(rng);
            norm += v * v;
          }
          norm = std::sqrt(norm);
        }
        for (std::size_t j = 0; j < dir.size(); ++j) {
          z_li[free_begin + j] += static_cast<float>(cfg.ue_shift * dir[j] / norm);
        }
        z_hi = hi.clean(label, rng, detail::kCleanMaxEntropy);
        break;
      }
    }
    const auto y = static_cast<std::uint16_t>(label);
    auto p_li = li.probs(z_li);
    auto p_hi = hi.probs(z_hi);
    out.li.push_back(FeatureRecord{std::move(z_li), std::move(p_li), y, std::nullopt, Domain::LI});
    out.hi.push_back(FeatureRecord{std::move(z_hi), std::move(p_hi), y, std::nullopt, Domain::HI});
  }
  return out;
}

}  // namespace adaptau
