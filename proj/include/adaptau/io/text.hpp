#pragma once

// Whitespace-separated text sidecars: truth labels, per-sample tags, query
// plans, fused-prediction provenance and thresholds. Lines starting with '#'
// are headers or comments; absent values are written as "na".

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "adaptau/adaptive.hpp"
#include "adaptau/core.hpp"
#include "adaptau/dynamic.hpp"
#include "adaptau/io/config.hpp"
#include "adaptau/pipeline.hpp"

namespace adaptau::io {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "na";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : "na";
}

inline std::optional<double> parse_optional(const std::string& s, std::string_view what) {
  if (s == "na") return std::nullopt;
  return parse_number<double>(s, what);
}

namespace text_detail {

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot open '" + path.string() + "' for writing");
  return out;
}

inline void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw Error(ErrorCode::io, "failed writing '" + path.string() + "'");
}

/// Non-comment lines split on whitespace, each with its line number.
inline std::vector<std::pair<std::size_t, std::vector<std::string>>> rows(
    const std::string& text, std::vector<std::string>* comments = nullptr) {
  std::vector<std::pair<std::size_t, std::vector<std::string>>> out;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    const auto t = trim(line);
    if (t.empty()) continue;
    if (t.front() == '#') {
      if (comments) comments->emplace_back(trim(t.substr(1)));
      continue;
    }
    std::istringstream fields{std::string(t)};
    std::vector<std::string> cols;
    for (std::string f; fields >> f;) cols.push_back(f);
    out.emplace_back(n, std::move(cols));
  }
  return out;
}

inline void expect_columns(const std::vector<std::string>& cols, std::size_t n, std::size_t line,
                           const char* file_kind) {
  detail::require(cols.size() == n, std::string(file_kind) + " line " + std::to_string(line) +
                                        ": expected " + std::to_string(n) + " columns, got " +
                                        std::to_string(cols.size()));
}

inline void expect_index(const std::string& s, std::size_t expected, std::size_t line,
                         const char* file_kind) {
  detail::require(parse_number<std::size_t>(s, "index") == expected,
                  std::string(file_kind) + " line " + std::to_string(line) +
                      ": indices must be consecutive from 0");
}

/// Values of "# key=value" header comments.
inline std::map<std::string, std::string> header_fields(const std::vector<std::string>& comments) {
  std::map<std::string, std::string> out;
  for (const auto& c : comments) {
    std::istringstream in(c);
    for (std::string tok; in >> tok;) {
      const auto eq = tok.find('=');
      if (eq != std::string::npos) out[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
  }
  return out;
}

}  // namespace text_detail

// ---- truth: index label [planted]

struct TruthTable {
  std::vector<std::uint16_t> labels;
  std::optional<std::vector<DynamicTag>> planted;
};

inline void write_truth(const TruthTable& t, const std::filesystem::path& path) {
  detail::require(!t.planted || t.planted->size() == t.labels.size(), "planted tags do not match labels");
  auto out = text_detail::open_out(path);
  out << (t.planted ? "# index label planted\n" : "# index label\n");
  for (std::size_t i = 0; i < t.labels.size(); ++i) {
    out << i << ' ' << t.labels[i];
    if (t.planted) out << ' ' << to_string((*t.planted)[i]);
    out << '\n';
  }
  text_detail::finish(out, path);
}

inline TruthTable parse_truth(const std::string& text) {
  TruthTable t;
  const auto rows = text_detail::rows(text);
  detail::require(!rows.empty(), "truth file holds no rows");
  const bool planted = rows.front().second.size() == 3;
  if (planted) t.planted.emplace();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& [line, cols] = rows[i];
    text_detail::expect_columns(cols, planted ? 3 : 2, line, "truth");
    text_detail::expect_index(cols[0], i, line, "truth");
    t.labels.push_back(parse_number<std::uint16_t>(cols[1], "label"));
    if (planted) t.planted->push_back(parse_dynamic_tag(cols[2]));
  }
  return t;
}

inline TruthTable read_truth(const std::filesystem::path& path) { return parse_truth(read_text(path)); }

// ---- tags: index static dynamic source eu au d_uar d_uai entropy

inline void write_tags(const std::vector<SampleAssessment>& tags, const std::filesystem::path& path) {
  auto out = text_detail::open_out(path);
  out << "# index static dynamic source eu au d_uar d_uai entropy\n";
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto& s = tags[i];
    out << i << ' ' << to_string(s.li_static.tag) << ' ' << to_string(s.dynamic.tag) << ' '
        << to_string(s.dynamic.source) << ' ' << format_double(s.li_static.eu_score) << ' '
        << format_optional(s.li_static.au_score) << ' ' << format_optional(s.dynamic.d_uar) << ' '
        << format_optional(s.dynamic.d_uai) << ' ' << format_double(s.entropy) << '\n';
  }
  text_detail::finish(out, path);
}

inline std::vector<SampleAssessment> parse_tags(const std::string& text) {
  std::vector<SampleAssessment> out;
  const auto rows = text_detail::rows(text);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& [line, c] = rows[i];
    text_detail::expect_columns(c, 9, line, "tags");
    text_detail::expect_index(c[0], i, line, "tags");
    SampleAssessment s;
    s.li_static.tag = parse_static_tag(c[1]);
    s.dynamic.tag = parse_dynamic_tag(c[2]);
    s.dynamic.source = parse_label_source(c[3]);
    s.li_static.eu_score = parse_number<double>(c[4], "eu");
    s.li_static.au_score = parse_optional(c[5], "au");
    s.dynamic.d_uar = parse_optional(c[6], "d_uar");
    s.dynamic.d_uai = parse_optional(c[7], "d_uai");
    s.entropy = parse_number<double>(c[8], "entropy");
    out.push_back(s);
  }
  return out;
}

inline std::vector<SampleAssessment> read_tags(const std::filesystem::path& path) {
  return parse_tags(read_text(path));
}

// ---- plan: header fields, then index score per selected sample

struct PlanFile {
  std::string policy;
  QueryPlan plan;
};

inline void write_plan(const PlanFile& p, const std::filesystem::path& path) {
  auto out = text_detail::open_out(path);
  out << "# policy=" << p.policy << " budget=" << format_optional(p.plan.budget)
      << " realized_cost=" << format_double(p.plan.realized_cost) << " n_total=" << p.plan.n_total
      << " selected=" << p.plan.selected.size() << " status="
      << (p.plan.status == PlanStatus::ok ? "ok" : "budget_below_li_cost") << '\n';
  out << "# index score\n";
  for (std::size_t i = 0; i < p.plan.selected.size(); ++i) {
    out << p.plan.selected[i] << ' ' << format_double(p.plan.ranking_scores[i]) << '\n';
  }
  text_detail::finish(out, path);
}

inline PlanFile parse_plan(const std::string& text) {
  std::vector<std::string> comments;
  const auto rows = text_detail::rows(text, &comments);
  const auto h = text_detail::header_fields(comments);
  for (const char* key : {"policy", "budget", "realized_cost", "n_total", "status"}) {
    detail::require(h.count(key) == 1, std::string("plan header lacks '") + key + "'",
                    ErrorCode::missing_field);
  }
  PlanFile p;
  p.policy = h.at("policy");
  p.plan.budget = parse_optional(h.at("budget"), "budget");
  p.plan.realized_cost = parse_number<double>(h.at("realized_cost"), "realized_cost");
  p.plan.n_total = parse_number<std::size_t>(h.at("n_total"), "n_total");
  const auto& status = h.at("status");
  detail::require(status == "ok" || status == "budget_below_li_cost", "unknown plan status");
  p.plan.status = status == "ok" ? PlanStatus::ok : PlanStatus::budget_below_li_cost;
  for (const auto& [line, c] : rows) {
    text_detail::expect_columns(c, 2, line, "plan");
    const auto idx = parse_number<std::size_t>(c[0], "index");
    detail::require(idx < p.plan.n_total, "plan line " + std::to_string(line) + ": index out of range");
    p.plan.selected.push_back(idx);
    p.plan.ranking_scores.push_back(parse_number<double>(c[1], "score"));
  }
  return p;
}

inline PlanFile read_plan(const std::filesystem::path& path) { return parse_plan(read_text(path)); }

// ---- provenance: index domain static eu (the static tag and EU score of the
// domain each fused prediction came from)

struct ProvenanceRow {
  Domain domain = Domain::LI;
  StaticTag tag = StaticTag::C;
  double eu = 0.0;
};

inline void write_provenance(const std::vector<ProvenanceRow>& rows, const std::filesystem::path& path) {
  auto out = text_detail::open_out(path);
  out << "# index domain static eu\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out << i << ' ' << to_string(rows[i].domain) << ' ' << to_string(rows[i].tag) << ' '
        << format_double(rows[i].eu) << '\n';
  }
  text_detail::finish(out, path);
}

inline std::vector<ProvenanceRow> parse_provenance(const std::string& text) {
  std::vector<ProvenanceRow> out;
  const auto rows = text_detail::rows(text);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& [line, c] = rows[i];
    text_detail::expect_columns(c, 4, line, "provenance");
    text_detail::expect_index(c[0], i, line, "provenance");
    detail::require(c[1] == "LI" || c[1] == "HI", "provenance line " + std::to_string(line) + ": bad domain");
    out.push_back({c[1] == "LI" ? Domain::LI : Domain::HI, parse_static_tag(c[2]),
                   parse_number<double>(c[3], "eu")});
  }
  return out;
}

inline std::vector<ProvenanceRow> read_provenance(const std::filesystem::path& path) {
  return parse_provenance(read_text(path));
}

// ---- thresholds: key=value

inline void write_thresholds(const FittedModel& m, const std::filesystem::path& path) {
  auto out = text_detail::open_out(path);
  out << "backend=" << to_string(m.li.eu_bank.backend()) << '\n'
      << "num_classes=" << m.li.thresholds.num_classes() << '\n'
      << "li.tau_eu=" << format_double(m.li.thresholds.tau_eu()) << '\n'
      << "li.tau_au=" << format_double(m.li.thresholds.tau_au()) << '\n'
      << "hi.tau_eu=" << format_double(m.hi.thresholds.tau_eu()) << '\n'
      << "hi.tau_au=" << format_double(m.hi.thresholds.tau_au()) << '\n'
      << "calibration_size=" << m.calibration_indices.size() << '\n';
  text_detail::finish(out, path);
}

}  // namespace adaptau::io
