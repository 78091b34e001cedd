#pragma once

// Plain-text key=value configuration. Blank lines and '#' comments are
// ignored; unknown and repeated keys are errors.
//
// Run keys (defaults in parentheses):
//   backend (mahalanobis)   mahalanobis | md | knn
//   k (100)                 neighbour rank for the kNN backend
//   shrinkage (0.001)       covariance ridge, fraction of mean variance
//   knn_unit_norm (false)   L2-normalize features before kNN
//   tpr (0.95)              in-distribution true-positive rate for tau_EU
//   calib_size (6000)       stratified calibration draw size
//   seed (0)
//   pca_dims (0)            projection before resolvability banks; 0 = off
//   tau_au_source (calibration)  calibration | training
//   n_bins (15)             ECE bins
//   coverage (0.05,...,0.95,1)   AUCC coverage grid, comma separated
//   t_li (1), t_hi (250)    per-pass acquisition costs
//   budget (none)           T_A bound; none = unconstrained
//   random_pool (all)       all | ua
//
// Synthetic-data keys: n_samples, num_classes, d_hi, d_li, sep_hi, sep_li,
// frac_uar, frac_uai, frac_ue, noise_li, ue_shift, seed.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "adaptau/adaptive.hpp"
#include "adaptau/metrics.hpp"
#include "adaptau/pipeline.hpp"
#include "adaptau/synth.hpp"

namespace adaptau::io {

struct RunConfig {
  FitOptions fit;
  std::size_t n_bins = kDefaultEceBins;
  std::vector<double> coverage = default_coverage_grid();
  CostModel cost;
  std::optional<double> budget;
  RandomPool random_pool = RandomPool::all;
};

struct KeyValue {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline std::vector<KeyValue> parse_key_values(std::string_view text) {
  std::vector<KeyValue> out;
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    detail::require(eq != std::string_view::npos,
                    "config line " + std::to_string(line_no) + ": expected key=value");
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    detail::require(!key.empty(), "config line " + std::to_string(line_no) + ": empty key");
    detail::require(seen.insert(key).second,
                    "config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    out.push_back({key, value, line_no});
  }
  return out;
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename T>
T parse_number(std::string_view s, std::string_view what) {
  T value{};
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, value);
  detail::require(ec == std::errc() && ptr == end && !s.empty(),
                  "invalid value '" + std::string(s) + "' for " + std::string(what));
  return value;
}

inline bool parse_bool(std::string_view s, std::string_view what) {
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw Error(ErrorCode::validation, "invalid boolean '" + std::string(s) + "' for " + std::string(what));
}

inline std::vector<double> parse_double_list(std::string_view s, std::string_view what) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    const auto end = std::min(s.find(',', pos), s.size());
    out.push_back(parse_number<double>(trim(s.substr(pos, end - pos)), what));
    pos = end + 1;
  }
  return out;
}

namespace config_detail {

using Setter = std::function<void(std::string_view)>;

inline void apply(const std::vector<KeyValue>& kvs, const std::map<std::string, Setter>& setters) {
  for (const auto& kv : kvs) {
    const auto it = setters.find(kv.key);
    detail::require(it != setters.end(), "config line " + std::to_string(kv.line) +
                                             ": unknown key '" + kv.key + "'");
    it->second(kv.value);
  }
}

}  // namespace config_detail

inline RunConfig parse_run_config(std::string_view text) {
  RunConfig c;
  auto& f = c.fit;
  const std::map<std::string, config_detail::Setter> setters = {
      {"backend", [&](std::string_view v) { f.distance.backend = parse_backend(v); }},
      {"k", [&](std::string_view v) { f.distance.k = parse_number<std::size_t>(v, "k"); }},
      {"shrinkage", [&](std::string_view v) { f.distance.shrinkage = parse_number<double>(v, "shrinkage"); }},
      {"knn_unit_norm", [&](std::string_view v) { f.distance.unit_norm = parse_bool(v, "knn_unit_norm"); }},
      {"tpr", [&](std::string_view v) { f.tpr = parse_number<double>(v, "tpr"); }},
      {"calib_size", [&](std::string_view v) { f.calib_size = parse_number<std::size_t>(v, "calib_size"); }},
      {"seed", [&](std::string_view v) { f.seed = parse_number<std::uint64_t>(v, "seed"); }},
      {"pca_dims", [&](std::string_view v) { f.pca_dims = parse_number<std::size_t>(v, "pca_dims"); }},
      {"tau_au_source", [&](std::string_view v) { f.tau_au_source = parse_tau_au_source(v); }},
      {"n_bins", [&](std::string_view v) { c.n_bins = parse_number<std::size_t>(v, "n_bins"); }},
      {"coverage", [&](std::string_view v) { c.coverage = parse_double_list(v, "coverage"); }},
      {"t_li", [&](std::string_view v) { c.cost.t_li = parse_number<double>(v, "t_li"); }},
      {"t_hi", [&](std::string_view v) { c.cost.t_hi = parse_number<double>(v, "t_hi"); }},
      {"budget",
       [&](std::string_view v) {
         if (v == "none") c.budget.reset();
         else c.budget = parse_number<double>(v, "budget");
       }},
      {"random_pool", [&](std::string_view v) { c.random_pool = parse_random_pool(v); }},
  };
  config_detail::apply(parse_key_values(text), setters);
  detail::require(f.tpr > 0.0 && f.tpr < 1.0, "tpr must lie in (0, 1)");
  detail::require(f.distance.k >= 1, "k must be positive");
  detail::require(f.distance.shrinkage >= 0.0 && f.distance.shrinkage < 1.0,
                  "shrinkage must lie in [0, 1)");
  detail::require(f.calib_size >= 1, "calib_size must be positive");
  detail::require(c.n_bins >= 1, "n_bins must be positive");
  for (double v : c.coverage) detail::require(v > 0.0 && v <= 1.0, "coverage values must lie in (0, 1]");
  c.cost.validate();
  return c;
}

inline RunConfig read_run_config(const std::filesystem::path& path) {
  return parse_run_config(read_text(path));
}

inline SynthConfig parse_synth_config(std::string_view text) {
  SynthConfig s;
  const std::map<std::string, config_detail::Setter> setters = {
      {"n_samples", [&](std::string_view v) { s.n_samples = parse_number<std::size_t>(v, "n_samples"); }},
      {"num_classes", [&](std::string_view v) { s.num_classes = parse_number<std::size_t>(v, "num_classes"); }},
      {"d_hi", [&](std::string_view v) { s.d_hi = parse_number<std::size_t>(v, "d_hi"); }},
      {"d_li", [&](std::string_view v) { s.d_li = parse_number<std::size_t>(v, "d_li"); }},
      {"sep_hi", [&](std::string_view v) { s.sep_hi = parse_number<double>(v, "sep_hi"); }},
      {"sep_li", [&](std::string_view v) { s.sep_li = parse_number<double>(v, "sep_li"); }},
      {"frac_uar", [&](std::string_view v) { s.frac_uar = parse_number<double>(v, "frac_uar"); }},
      {"frac_uai", [&](std::string_view v) { s.frac_uai = parse_number<double>(v, "frac_uai"); }},
      {"frac_ue", [&](std::string_view v) { s.frac_ue = parse_number<double>(v, "frac_ue"); }},
      {"noise_li", [&](std::string_view v) { s.noise_li = parse_number<double>(v, "noise_li"); }},
      {"ue_shift", [&](std::string_view v) { s.ue_shift = parse_number<double>(v, "ue_shift"); }},
      {"seed", [&](std::string_view v) { s.seed = parse_number<std::uint64_t>(v, "seed"); }},
  };
  config_detail::apply(parse_key_values(text), setters);
  s.validate();
  return s;
}

inline SynthConfig read_synth_config(const std::filesystem::path& path) {
  return parse_synth_config(read_text(path));
}

}  // namespace adaptau::io
