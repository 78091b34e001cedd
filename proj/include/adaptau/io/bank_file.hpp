#pragma once

// FDBK model files: a fitted pipeline model (both domains' EU banks and
// thresholds, the resolvability banks and the calibration draw), encoded with
// the same little-endian conventions as FDMP.
//
//   char[4] "FDBK", u16 version, u16 reserved (0)
//   domain LI:  distance model, f64 tau_eu, f64 tau_au, u32 C
//   domain HI:  distance model, f64 tau_eu, f64 tau_au, u32 C
//   u8 has_projector [u32 m, u32 d, f64 mean[d], f64 components[m*d]]
//   distance model (UAR), distance model (UAI)
//   u64 count, u64 calibration indices[count]
//
// distance model:
//   u8 backend (0 = Mahalanobis, 1 = kNN)
//   Mahalanobis: u32 d, u32 groups, i32 ids[groups], f64 means[groups*d],
//                f64 inverse covariance[d*d]
//   kNN:         u32 d, u64 n, u64 k, u8 unit_norm, f64 points[n*d]
// Matrices are row-major.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "adaptau/distance.hpp"
#include "adaptau/io/binary.hpp"
#include "adaptau/pipeline.hpp"

namespace adaptau::io {

inline constexpr char kFdbkMagic[4] = {'F', 'D', 'B', 'K'};
inline constexpr std::uint16_t kFdbkVersion = 1;

namespace bank_codec {

inline void put_matrix(ByteWriter& w, const Eigen::MatrixXd& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) w.put<double>(m(i, j));
  }
}

inline Eigen::MatrixXd get_matrix(ByteReader& r, std::uint64_t rows, std::uint64_t cols,
                                  const char* what) {
  r.need(checked_mul(checked_mul(rows, cols, what), 8, what), what);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = r.get<double>(what);
  }
  return m;
}

inline void put_model(ByteWriter& w, const DistanceModel& model) {
  if (const auto* g = model.gaussian()) {
    w.put<std::uint8_t>(0);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(g->dim()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(g->num_groups()));
    for (int id : g->group_ids()) w.put<std::int32_t>(id);
    put_matrix(w, g->means());
    put_matrix(w, g->cov_inv());
    return;
  }
  const auto* nb = model.neighbors();
  w.put<std::uint8_t>(1);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(nb->dim()));
  w.put<std::uint64_t>(nb->size());
  w.put<std::uint64_t>(nb->k());
  w.put<std::uint8_t>(nb->unit_norm() ? 1 : 0);
  put_matrix(w, nb->points());
}

inline DistanceModel get_model(ByteReader& r) {
  const auto backend = r.get<std::uint8_t>("backend");
  if (backend == 0) {
    const auto d = r.get<std::uint32_t>("bank dimension");
    const auto groups = r.get<std::uint32_t>("group count");
    adaptau::detail::require(d >= 1 && groups >= 1, "empty Gaussian bank in model file");
    r.need(checked_mul(groups, 4, "group ids"), "group ids");
    std::vector<int> ids(groups);
    for (auto& id : ids) id = r.get<std::int32_t>("group id");
    Eigen::MatrixXd means = get_matrix(r, groups, d, "means");
    Eigen::MatrixXd cov_inv = get_matrix(r, d, d, "inverse covariance");
    return DistanceModel(GaussianBank::from_inverse(std::move(ids), std::move(means), std::move(cov_inv)));
  }
  adaptau::detail::require(backend == 1, "unknown backend byte in model file");
  const auto d = r.get<std::uint32_t>("bank dimension");
  const auto n = r.get<std::uint64_t>("point count");
  const auto k = r.get<std::uint64_t>("k");
  const auto unit = r.get<std::uint8_t>("unit_norm");
  Eigen::MatrixXd pts = get_matrix(r, n, d, "points");
  return DistanceModel(NeighborBank::restore(RowMatrix(pts), k, unit != 0));
}

inline void put_domain(ByteWriter& w, const DomainModel& m) {
  put_model(w, m.eu_bank);
  w.put<double>(m.thresholds.tau_eu());
  w.put<double>(m.thresholds.tau_au());
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.thresholds.num_classes()));
}

inline DomainModel get_domain(ByteReader& r, Domain domain) {
  DistanceModel bank = get_model(r);
  const double tau_eu = r.get<double>("tau_eu");
  const double tau_au = r.get<double>("tau_au");
  const auto c = r.get<std::uint32_t>("class count");
  return DomainModel{std::move(bank), Thresholds(tau_eu, tau_au, domain, c)};
}

}  // namespace bank_codec

inline std::vector<unsigned char> encode_model(const FittedModel& model) {
  ByteWriter w;
  w.put_bytes(std::string_view(kFdbkMagic, 4));
  w.put<std::uint16_t>(kFdbkVersion);
  w.put<std::uint16_t>(0);
  bank_codec::put_domain(w, model.li);
  bank_codec::put_domain(w, model.hi);
  const auto& proj = model.resolvability.projector;
  w.put<std::uint8_t>(proj ? 1 : 0);
  if (proj) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(proj->output_dim()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(proj->input_dim()));
    for (Eigen::Index j = 0; j < proj->mean().size(); ++j) w.put<double>(proj->mean()(j));
    bank_codec::put_matrix(w, proj->components());
  }
  bank_codec::put_model(w, model.resolvability.bank_uar);
  bank_codec::put_model(w, model.resolvability.bank_uai);
  w.put<std::uint64_t>(model.calibration_indices.size());
  for (auto i : model.calibration_indices) w.put<std::uint64_t>(i);
  return std::move(w.bytes());
}

inline FittedModel decode_model(std::span<const unsigned char> bytes) {
  ByteReader r(bytes);
  if (bytes.size() < 4) throw Error(ErrorCode::truncated, "model input shorter than its magic");
  if (r.get_bytes(4, "magic") != std::string_view(kFdbkMagic, 4)) {
    throw Error(ErrorCode::bad_magic, "not an FDBK model file (bad magic)");
  }
  const auto version = r.get<std::uint16_t>("version");
  if (version != kFdbkVersion) {
    throw Error(ErrorCode::version_mismatch,
                "unsupported FDBK version " + std::to_string(version) + " (expected 1)");
  }
  r.get<std::uint16_t>("reserved");
  DomainModel li = bank_codec::get_domain(r, Domain::LI);
  DomainModel hi = bank_codec::get_domain(r, Domain::HI);
  std::optional<PcaProjector> projector;
  if (r.get<std::uint8_t>("projector flag") != 0) {
    const auto m = r.get<std::uint32_t>("projector rank");
    const auto d = r.get<std::uint32_t>("projector input dimension");
    Eigen::MatrixXd mean = bank_codec::get_matrix(r, d, 1, "projector mean");
    Eigen::MatrixXd comps = bank_codec::get_matrix(r, m, d, "projector components");
    projector.emplace(Eigen::VectorXd(mean.col(0)), std::move(comps));
  }
  DistanceModel uar = bank_codec::get_model(r);
  DistanceModel uai = bank_codec::get_model(r);
  const auto count = r.get<std::uint64_t>("calibration count");
  r.need(checked_mul(count, 8, "calibration indices"), "calibration indices");
  std::vector<std::size_t> calib(count);
  for (auto& i : calib) i = r.get<std::uint64_t>("calibration index");
  adaptau::detail::require(r.remaining() == 0, "model file has trailing bytes");
  return FittedModel{std::move(li), std::move(hi),
                     ResolvabilityBanks{std::move(uar), std::move(uai), std::move(projector)},
                     std::move(calib)};
}

inline void write_model(const FittedModel& model, const std::filesystem::path& path) {
  write_file(path, encode_model(model));
}

inline FittedModel read_model(const std::filesystem::path& path) {
  return decode_model(read_file(path));
}

}  // namespace adaptau::io
