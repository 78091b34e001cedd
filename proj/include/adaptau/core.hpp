#pragma once

// Domain types shared by every stage, predictive-entropy scoring and the
// static C/UA/UE taxonomy.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adaptau/error.hpp"

namespace adaptau {

/// Acquisition domain: low-information (fast) or high-information (slow).
enum class Domain : std::uint8_t { LI = 0, HI = 1 };

inline const char* to_string(Domain d) { return d == Domain::LI ? "LI" : "HI"; }

inline constexpr double kSimplexTolerance = 1e-6;

/// A categorical distribution over C >= 2 classes, stored in single precision
/// so that it round-trips through feature dumps bit-exactly.
class ProbabilityVector {
 public:
  /// Validates without modifying the values.
  explicit ProbabilityVector(std::vector<float> values) : values_(std::move(values)) {
    validate(values_);
  }

  /// Ingestion path: rescales to unit mass. Fails on negative, non-finite or
  /// all-zero input.
  static ProbabilityVector normalized(std::span<const double> raw) {
    detail::require(raw.size() >= 2, "probability vector needs at least 2 classes");
    double total = 0.0;
    for (double v : raw) {
      detail::require(std::isfinite(v) && v >= 0.0,
                      "probability entries must be finite and non-negative");
      total += v;
    }
    detail::require(total > 0.0, "probability vector has zero mass");
    std::vector<float> out(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) out[i] = static_cast<float>(raw[i] / total);
    return ProbabilityVector(std::move(out));
  }

  static ProbabilityVector normalized(std::span<const float> raw) {
    std::vector<double> wide(raw.begin(), raw.end());
    return normalized(std::span<const double>(wide));
  }

  static ProbabilityVector one_hot(std::size_t num_classes, std::size_t hot) {
    detail::require(hot < num_classes, "one-hot index out of range");
    std::vector<float> v(num_classes, 0.0f);
    v[hot] = 1.0f;
    return ProbabilityVector(std::move(v));
  }

  static ProbabilityVector uniform(std::size_t num_classes) {
    detail::require(num_classes >= 2, "probability vector needs at least 2 classes");
    std::vector<double> v(num_classes, 1.0);
    return normalized(std::span<const double>(v));
  }

  /// Throws a validation error unless `values` lies on the simplex.
  static void validate(std::span<const float> values) {
    detail::require(values.size() >= 2, "probability vector needs at least 2 classes");
    double total = 0.0;
    for (float v : values) {
      detail::require(std::isfinite(v) && v >= 0.0f && v <= 1.0f + kSimplexTolerance,
                      "probability entries must lie in [0, 1]");
      total += v;
    }
    detail::require(std::abs(total - 1.0) <= kSimplexTolerance,
                    "probabilities do not sum to 1 (sum=" + std::to_string(total) + ")");
  }

  std::size_t size() const noexcept { return values_.size(); }
  float operator[](std::size_t i) const { return values_[i]; }
  std::span<const float> values() const noexcept { return values_; }

  /// Index of the largest entry; ties resolve to the lowest index.
  std::size_t argmax() const {
    return static_cast<std::size_t>(std::max_element(values_.begin(), values_.end()) -
                                    values_.begin());
  }
  float max() const { return *std::max_element(values_.begin(), values_.end()); }

  friend bool operator==(const ProbabilityVector&, const ProbabilityVector&) = default;

 private:
  std::vector<float> values_;
};

struct GridCoord {
  std::uint32_t row = 0;
  std::uint32_t col = 0;
  friend bool operator==(const GridCoord&, const GridCoord&) = default;
};

/// One sample: latent vector z = f(x), softmax output, and optional
/// supervision / placement.
struct FeatureRecord {
  std::vector<float> features;
  ProbabilityVector probs;
  std::optional<std::uint16_t> label;
  std::optional<GridCoord> coord;
  Domain domain = Domain::LI;

  std::size_t dim() const noexcept { return features.size(); }
  std::size_t num_classes() const noexcept { return probs.size(); }
  std::size_t predicted() const { return probs.argmax(); }

  friend bool operator==(const FeatureRecord&, const FeatureRecord&) = default;
};

/// Checks that every record has the same feature dimension and class count and
/// that labels are in range. Returns (d, C).
inline std::pair<std::size_t, std::size_t> validate_records(std::span<const FeatureRecord> records) {
  detail::require(!records.empty(), "record list is empty");
  const std::size_t d = records.front().dim();
  const std::size_t c = records.front().num_classes();
  detail::require(d > 0, "feature dimension must be positive");
  for (const auto& r : records) {
    detail::require(r.dim() == d, "inconsistent feature dimension within dataset");
    detail::require(r.num_classes() == c, "inconsistent class count within dataset");
    if (r.label) detail::require(*r.label < c, "label out of range");
  }
  return {d, c};
}

/// Shannon entropy in nats with 0 ln 0 = 0.
inline double entropy(const ProbabilityVector& p) {
  double h = 0.0;
  for (float v : p.values()) {
    if (v > 0.0f) h -= static_cast<double>(v) * std::log(static_cast<double>(v));
  }
  return std::max(0.0, h);
}

inline double entropy(std::span<const float> p) {
  ProbabilityVector::validate(p);
  double h = 0.0;
  for (float v : p) {
    if (v > 0.0f) h -= static_cast<double>(v) * std::log(static_cast<double>(v));
  }
  return std::max(0.0, h);
}

enum class StaticTag : std::uint8_t { C = 0, UA = 1, UE = 2 };

inline const char* to_string(StaticTag t) {
  switch (t) {
    case StaticTag::C: return "C";
    case StaticTag::UA: return "UA";
    case StaticTag::UE: return "UE";
  }
  return "?";
}

inline StaticTag parse_static_tag(std::string_view s) {
  if (s == "C") return StaticTag::C;
  if (s == "UA") return StaticTag::UA;
  if (s == "UE") return StaticTag::UE;
  throw Error(ErrorCode::validation, "unknown static tag '" + std::string(s) + "'");
}

struct StaticLabel {
  StaticTag tag = StaticTag::C;
  double eu_score = 0.0;
  /// Entropy; only defined for low-EU samples.
  std::optional<double> au_score;
};

/// Category boundaries for one domain.
class Thresholds {
 public:
  Thresholds(double tau_eu, double tau_au, Domain domain, std::size_t num_classes)
      : tau_eu_(tau_eu), tau_au_(tau_au), domain_(domain), num_classes_(num_classes) {
    detail::require(num_classes >= 2, "thresholds need C >= 2");
    detail::require(std::isfinite(tau_eu) && tau_eu > 0.0, "tau_eu must be finite and positive");
    detail::require(std::isfinite(tau_au) && tau_au >= 0.0,
                    "tau_au must be finite and non-negative");
    detail::require(tau_au <= std::log(static_cast<double>(num_classes)) + 1e-12,
                    "tau_au exceeds ln C");
  }

  double tau_eu() const noexcept { return tau_eu_; }
  double tau_au() const noexcept { return tau_au_; }
  Domain domain() const noexcept { return domain_; }
  std::size_t num_classes() const noexcept { return num_classes_; }

 private:
  double tau_eu_;
  double tau_au_;
  Domain domain_;
  std::size_t num_classes_;
};

/// UE iff eu >= tau_eu; otherwise UA iff entropy >= tau_au; otherwise C.
inline StaticLabel classify_static(double eu, const ProbabilityVector& p, const Thresholds& th) {
  detail::require(std::isfinite(eu) && eu >= 0.0, "EU score must be finite and non-negative");
  detail::require(p.size() == th.num_classes(), "probability vector does not match threshold C");
  if (eu >= th.tau_eu()) return {StaticTag::UE, eu, std::nullopt};
  const double h = entropy(p);
  return {h >= th.tau_au() ? StaticTag::UA : StaticTag::C, eu, h};
}

}  // namespace adaptau
