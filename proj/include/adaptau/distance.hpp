#pragma once

// Latent-space distance backends d(z; D_v): Mahalanobis distance to the
// nearest class centroid under a shared covariance, exact k-th nearest
// neighbour distance, and a PCA projection that can be placed in front of
// either.

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "adaptau/core.hpp"
#include "adaptau/error.hpp"

namespace adaptau {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Stacks record features into an n x d matrix.
inline RowMatrix feature_matrix(std::span<const FeatureRecord> records) {
  const auto [d, c] = validate_records(records);
  (void)c;
  RowMatrix x(static_cast<Eigen::Index>(records.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = records[i].features[j];
    }
  }
  return x;
}

inline Eigen::VectorXd to_vector(std::span<const float> z) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(z.size()));
  for (std::size_t i = 0; i < z.size(); ++i) v(static_cast<Eigen::Index>(i)) = z[i];
  return v;
}

struct MahalanobisResult {
  double score = 0.0;
  int nearest_group = 0;
};

/// Class-conditional Gaussians with one shared covariance. Scoring whitens
/// with the Cholesky factor of the inverse covariance, so each query costs one
/// triangular product plus one Euclidean distance per centroid.
class GaussianBank {
 public:
  /// Builds from means and a covariance matrix; rejects non-SPD covariances.
  static GaussianBank from_covariance(std::vector<int> group_ids, Eigen::MatrixXd means,
                                      const Eigen::MatrixXd& covariance) {
    check_shapes(group_ids, means, covariance);
    Eigen::LLT<Eigen::MatrixXd> llt(covariance);
    detail::require(llt.info() == Eigen::Success && is_symmetric(covariance),
                    "covariance is not symmetric positive definite", ErrorCode::numerical);
    const auto d = covariance.rows();
    Eigen::MatrixXd inverse = llt.solve(Eigen::MatrixXd::Identity(d, d));
    inverse = 0.5 * (inverse + inverse.transpose()).eval();
    return from_inverse(std::move(group_ids), std::move(means), std::move(inverse));
  }

  /// Builds from a precomputed inverse covariance (deserialization path).
  static GaussianBank from_inverse(std::vector<int> group_ids, Eigen::MatrixXd means,
                                   Eigen::MatrixXd cov_inv) {
    check_shapes(group_ids, means, cov_inv);
    detail::require(is_symmetric(cov_inv), "inverse covariance is not symmetric",
                    ErrorCode::numerical);
    Eigen::LLT<Eigen::MatrixXd> llt(cov_inv);
    detail::require(llt.info() == Eigen::Success, "inverse covariance is not positive definite",
                    ErrorCode::numerical);
    GaussianBank bank;
    bank.group_ids_ = std::move(group_ids);
    bank.means_ = std::move(means);
    bank.cov_inv_ = std::move(cov_inv);
    bank.factor_ = llt.matrixL();
    bank.white_means_ = bank.means_ * bank.factor_;
    return bank;
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(means_.cols()); }
  std::size_t num_groups() const noexcept { return group_ids_.size(); }
  const std::vector<int>& group_ids() const noexcept { return group_ids_; }
  const Eigen::MatrixXd& means() const noexcept { return means_; }
  const Eigen::MatrixXd& cov_inv() const noexcept { return cov_inv_; }

  /// Single-centroid bank for group `index` sharing this bank's covariance.
  GaussianBank subset(std::size_t index) const {
    detail::require(index < num_groups(), "group index out of range");
    const auto row = static_cast<Eigen::Index>(index);
    return from_inverse({group_ids_[index]}, means_.row(row), cov_inv_);
  }

  MahalanobisResult score(const Eigen::VectorXd& z) const {
    detail::require(static_cast<std::size_t>(z.size()) == dim(),
                    "query dimension " + std::to_string(z.size()) + " does not match bank dimension " +
                        std::to_string(dim()));
    const Eigen::RowVectorXd w = z.transpose() * factor_;
    MahalanobisResult best{std::numeric_limits<double>::infinity(), group_ids_.front()};
    for (Eigen::Index g = 0; g < white_means_.rows(); ++g) {
      const double sq = (w - white_means_.row(g)).squaredNorm();
      if (sq < best.score) best = {sq, group_ids_[static_cast<std::size_t>(g)]};
    }
    best.score = std::sqrt(best.score);
    return best;
  }

  MahalanobisResult score(std::span<const float> z) const { return score(to_vector(z)); }

  /// Scores every row of a row-major n x d float matrix.
  std::vector<double> score_rows(std::span<const float> rows) const {
    const auto d = static_cast<Eigen::Index>(dim());
    detail::require(rows.size() % static_cast<std::size_t>(d) == 0,
                    "row buffer is not a multiple of the bank dimension");
    const auto n = static_cast<Eigen::Index>(rows.size() / static_cast<std::size_t>(d));
    std::vector<double> out(static_cast<std::size_t>(n));
    constexpr Eigen::Index kBlock = 2048;
    using FloatRows = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    for (Eigen::Index start = 0; start < n; start += kBlock) {
      const Eigen::Index len = std::min(kBlock, n - start);
      Eigen::Map<const FloatRows> block(rows.data() + start * d, len, d);
      const RowMatrix white = block.cast<double>() * factor_;
      for (Eigen::Index i = 0; i < len; ++i) {
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index g = 0; g < white_means_.rows(); ++g) {
          best = std::min(best, (white.row(i) - white_means_.row(g)).squaredNorm());
        }
        out[static_cast<std::size_t>(start + i)] = std::sqrt(best);
      }
    }
    return out;
  }

 private:
  GaussianBank() = default;

  static bool is_symmetric(const Eigen::MatrixXd& m) {
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-8 * scale;
  }

  static void check_shapes(const std::vector<int>& ids, const Eigen::MatrixXd& means,
                           const Eigen::MatrixXd& square) {
    detail::require(!ids.empty(), "bank needs at least one group");
    detail::require(static_cast<std::size_t>(means.rows()) == ids.size(),
                    "one mean per group required");
    detail::require(means.cols() > 0, "bank dimension must be positive");
    detail::require(square.rows() == means.cols() && square.cols() == means.cols(),
                    "covariance shape does not match mean dimension");
  }

  std::vector<int> group_ids_;
  Eigen::MatrixXd means_;
  Eigen::MatrixXd cov_inv_;
  Eigen::MatrixXd factor_;  // lower Cholesky factor L of cov_inv, cov_inv = L L^T
  Eigen::MatrixXd white_means_;
};

/// Per-group means and pooled class-centred covariance, regularized as
/// cov + shrinkage * (trace(cov) / d) * I. A zero-trace covariance uses a
/// unit scale so that point-mass groups still yield an SPD matrix.
inline GaussianBank fit_gaussian_bank(const RowMatrix& x, std::span<const int> grouping,
                                      double shrinkage) {
  detail::require(x.rows() > 0 && x.cols() > 0, "no samples to fit");
  detail::require(static_cast<std::size_t>(x.rows()) == grouping.size(),
                  "one group id per sample required");
  detail::require(shrinkage >= 0.0 && shrinkage < 1.0, "shrinkage must lie in [0, 1)");
  const Eigen::Index d = x.cols();

  std::map<int, std::vector<Eigen::Index>> members;
  for (std::size_t i = 0; i < grouping.size(); ++i) {
    members[grouping[i]].push_back(static_cast<Eigen::Index>(i));
  }
  std::vector<int> ids;
  Eigen::MatrixXd means(static_cast<Eigen::Index>(members.size()), d);
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(d, d);
  Eigen::Index g = 0;
  for (const auto& [id, rows] : members) {
    detail::require(rows.size() >= 2, "group " + std::to_string(id) + " has fewer than 2 members");
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(d);
    for (auto r : rows) mean += x.row(r);
    mean /= static_cast<double>(rows.size());
    for (auto r : rows) {
      const Eigen::RowVectorXd c = x.row(r) - mean;
      scatter.noalias() += c.transpose() * c;
    }
    ids.push_back(id);
    means.row(g++) = mean;
  }
  Eigen::MatrixXd cov = scatter / static_cast<double>(x.rows());
  const double trace = cov.trace();
  const double scale = trace > 0.0 ? trace / static_cast<double>(d) : 1.0;
  cov.diagonal().array() += shrinkage * scale;
  return GaussianBank::from_covariance(std::move(ids), std::move(means), cov);
}

inline GaussianBank fit_gaussian_bank(std::span<const FeatureRecord> records,
                                      std::span<const int> grouping, double shrinkage) {
  return fit_gaussian_bank(feature_matrix(records), grouping, shrinkage);
}

/// Exact k-th nearest neighbour distance over a stored point set.
class NeighborBank {
 public:
  NeighborBank(RowMatrix points, std::size_t k, bool unit_norm = false)
      : points_(std::move(points)), k_(k), unit_norm_(unit_norm) {
    detail::require(points_.rows() >= 1, "neighbor bank needs at least one point");
    detail::require(points_.cols() >= 1, "neighbor bank dimension must be positive");
    detail::require(k_ >= 1, "k must be positive");
    detail::require(k_ <= static_cast<std::size_t>(points_.rows()),
                    "k=" + std::to_string(k_) + " exceeds bank size " +
                        std::to_string(points_.rows()));
    if (unit_norm_) normalize_rows(points_);
  }

  /// Rebuilds a bank from stored points that were already normalized.
  static NeighborBank restore(RowMatrix stored_points, std::size_t k, bool unit_norm) {
    NeighborBank bank(std::move(stored_points), k, false);
    bank.unit_norm_ = unit_norm;
    return bank;
  }

  std::size_t dim() const noexcept { return static_cast<std::size_t>(points_.cols()); }
  std::size_t size() const noexcept { return static_cast<std::size_t>(points_.rows()); }
  std::size_t k() const noexcept { return k_; }
  bool unit_norm() const noexcept { return unit_norm_; }
  const RowMatrix& points() const noexcept { return points_; }

  double score(Eigen::VectorXd z) const {
    detail::require(static_cast<std::size_t>(z.size()) == dim(),
                    "query dimension does not match bank dimension");
    if (unit_norm_) {
      const double norm = z.norm();
      if (norm > 0.0) z /= norm;
    }
    std::vector<double> sq(size());
    for (Eigen::Index i = 0; i < points_.rows(); ++i) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < points_.cols(); ++j) {
        const double diff = z(j) - points_(i, j);
        acc += diff * diff;
      }
      sq[static_cast<std::size_t>(i)] = acc;
    }
    auto kth = sq.begin() + static_cast<std::ptrdiff_t>(k_ - 1);
    std::nth_element(sq.begin(), kth, sq.end());
    return std::sqrt(*kth);
  }

  double score(std::span<const float> z) const { return score(to_vector(z)); }

 private:
  static void normalize_rows(RowMatrix& m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      const double norm = m.row(i).norm();
      if (norm > 0.0) m.row(i) /= norm;
    }
  }

  RowMatrix points_;
  std::size_t k_;
  bool unit_norm_;
};

inline double knn_score(std::span<const float> z, const NeighborBank& bank) {
  return bank.score(z);
}

inline MahalanobisResult mahalanobis_score(std::span<const float> z, const GaussianBank& bank) {
  return bank.score(z);
}

/// Orthonormal projection onto the top principal components.
class PcaProjector {
 public:
  PcaProjector(Eigen::VectorXd mean, Eigen::MatrixXd components)
      : mean_(std::move(mean)), components_(std::move(components)) {
    detail::require(components_.rows() >= 1, "projector needs at least one component");
    detail::require(components_.cols() == mean_.size(), "component width must match mean");
    const Eigen::MatrixXd gram = components_ * components_.transpose();
    const auto m = components_.rows();
    detail::require((gram - Eigen::MatrixXd::Identity(m, m)).cwiseAbs().maxCoeff() <= 1e-6,
                    "projector rows are not orthonormal", ErrorCode::numerical);
  }

  std::size_t input_dim() const noexcept { return static_cast<std::size_t>(mean_.size()); }
  std::size_t output_dim() const noexcept { return static_cast<std::size_t>(components_.rows()); }
  const Eigen::VectorXd& mean() const noexcept { return mean_; }
  const Eigen::MatrixXd& components() const noexcept { return components_; }

  Eigen::VectorXd project(const Eigen::VectorXd& z) const {
    detail::require(static_cast<std::size_t>(z.size()) == input_dim(),
                    "projector input dimension mismatch");
    return components_ * (z - mean_);
  }
  Eigen::VectorXd project(std::span<const float> z) const { return project(to_vector(z)); }

  RowMatrix project_rows(const RowMatrix& x) const {
    detail::require(static_cast<std::size_t>(x.cols()) == input_dim(),
                    "projector input dimension mismatch");
    return (x.rowwise() - mean_.transpose()) * components_.transpose();
  }

 private:
  Eigen::VectorXd mean_;
  Eigen::MatrixXd components_;
};

/// Top-m eigenvectors of the sample covariance, by descending eigenvalue. Each
/// component's largest-magnitude entry is made positive.
inline PcaProjector fit_pca(const RowMatrix& x, std::size_t m) {
  detail::require(x.rows() >= 2, "PCA needs at least 2 samples");
  detail::require(m >= 1, "PCA needs at least one component");
  detail::require(m <= static_cast<std::size_t>(x.cols()),
                  "requested " + std::to_string(m) + " components from dimension " +
                      std::to_string(x.cols()));
  const Eigen::VectorXd mean = x.colwise().mean().transpose();
  const RowMatrix centered = x.rowwise() - mean.transpose();
  const Eigen::MatrixXd cov =
      (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  detail::require(solver.info() == Eigen::Success, "eigendecomposition failed",
                  ErrorCode::numerical);
  const auto d = cov.rows();
  Eigen::MatrixXd components(static_cast<Eigen::Index>(m), d);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(m); ++i) {
    Eigen::VectorXd v = solver.eigenvectors().col(d - 1 - i);
    Eigen::Index pivot = 0;
    v.cwiseAbs().maxCoeff(&pivot);
    if (v(pivot) < 0.0) v = -v;
    components.row(i) = v.transpose();
  }
  return PcaProjector(mean, components);
}

inline PcaProjector fit_pca(std::span<const FeatureRecord> records, std::size_t m) {
  return fit_pca(feature_matrix(records), m);
}

enum class Backend { mahalanobis, knn };

inline const char* to_string(Backend b) { return b == Backend::knn ? "knn" : "mahalanobis"; }

inline Backend parse_backend(std::string_view s) {
  if (s == "mahalanobis" || s == "md") return Backend::mahalanobis;
  if (s == "knn") return Backend::knn;
  throw Error(ErrorCode::validation, "unknown backend '" + std::string(s) + "'");
}

struct DistanceOptions {
  Backend backend = Backend::mahalanobis;
  double shrinkage = 1e-3;
  std::size_t k = 100;
  bool unit_norm = false;
};

/// Either distance backend behind one scoring call.
class DistanceModel {
 public:
  explicit DistanceModel(GaussianBank bank) : impl_(std::move(bank)) {}
  explicit DistanceModel(NeighborBank bank) : impl_(std::move(bank)) {}

  Backend backend() const noexcept {
    return std::holds_alternative<NeighborBank>(impl_) ? Backend::knn : Backend::mahalanobis;
  }
  std::size_t dim() const {
    return std::visit([](const auto& b) { return b.dim(); }, impl_);
  }
  double score(const Eigen::VectorXd& z) const {
    if (const auto* g = std::get_if<GaussianBank>(&impl_)) return g->score(z).score;
    return std::get<NeighborBank>(impl_).score(z);
  }
  double score(std::span<const float> z) const { return score(to_vector(z)); }

  const GaussianBank* gaussian() const noexcept { return std::get_if<GaussianBank>(&impl_); }
  const NeighborBank* neighbors() const noexcept { return std::get_if<NeighborBank>(&impl_); }

 private:
  std::variant<GaussianBank, NeighborBank> impl_;
};

/// EU bank over a calibration subset: class-conditional Gaussians grouped by
/// `grouping`, or a neighbour store of every row.
inline DistanceModel fit_distance_model(const RowMatrix& x, std::span<const int> grouping,
                                        const DistanceOptions& opts) {
  if (opts.backend == Backend::knn) return DistanceModel(NeighborBank(x, opts.k, opts.unit_norm));
  return DistanceModel(fit_gaussian_bank(x, grouping, opts.shrinkage));
}

}  // namespace adaptau
