// adaptau command line: synth, fit, taxonomy, query, fuse, eval, sweep, downscale.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "adaptau/adaptau.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace adaptau;
using nlohmann::ordered_json;

namespace {

io::RunConfig load_config(const std::string& path) {
  return path.empty() ? io::parse_run_config("") : io::read_run_config(path);
}

/// Record pairs from two dumps: elementwise when the counts match, otherwise
/// by grid location when HI is an integer multiple of LI.
std::vector<RecordPair> pair_inputs(const io::FdmpData& li, const io::FdmpData& hi) {
  detail::require(li.domain == Domain::LI, "--li file is not an LI dump");
  detail::require(hi.domain == Domain::HI, "--hi file is not an HI dump");
  if (li.records.size() == hi.records.size()) return zip_pairs(li.records, hi.records);
  detail::require(li.is_grid() && hi.is_grid(),
                  "LI and HI record counts differ and the dumps are not grids");
  detail::require(hi.height % li.height == 0 && hi.height / li.height == hi.width / li.width &&
                      hi.width % li.width == 0,
                  "HI grid is not an integer multiple of the LI grid");
  return pair_grids(li.grid(), hi.grid(), static_cast<int>(hi.height / li.height));
}

std::vector<FeatureRecord> hi_side(const std::vector<RecordPair>& pairs) {
  std::vector<FeatureRecord> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.hi);
  return out;
}

std::vector<FeatureRecord> li_side(const std::vector<RecordPair>& pairs) {
  std::vector<FeatureRecord> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(p.li);
  return out;
}

/// Overwrites record labels with a truth table of matching length.
void apply_truth(std::vector<FeatureRecord>& records, const io::TruthTable& truth) {
  detail::require(truth.labels.size() == records.size(),
                  "truth file has " + std::to_string(truth.labels.size()) + " rows for " +
                      std::to_string(records.size()) + " records");
  for (std::size_t i = 0; i < records.size(); ++i) records[i].label = truth.labels[i];
}

std::vector<double> parse_budgets(const std::string& spec) {
  std::vector<double> out;
  if (spec.find(':') != std::string::npos) {
    std::string fields = spec;
    std::replace(fields.begin(), fields.end(), ':', ',');
    const auto parts = io::parse_double_list(fields, "--budgets");
    detail::require(parts.size() == 3, "--budgets range must be start:stop:step");
    const double start = parts[0], stop = parts[1], step = parts[2];
    detail::require(step > 0.0 && stop >= start, "--budgets range must have step > 0 and stop >= start");
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9));
    for (std::size_t i = 0; i <= count; ++i) out.push_back(start + static_cast<double>(i) * step);
  } else {
    out = io::parse_double_list(spec, "--budgets");
  }
  for (double b : out) detail::require(std::isfinite(b) && b >= 0.0, "budgets must be finite and non-negative");
  return out;
}

ordered_json number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json curve_json(const std::vector<std::pair<double, double>>& c) {
  ordered_json arr = ordered_json::array();
  for (const auto& [x, y] : c) arr.push_back({number(x), number(y)});
  return arr;
}

void write_json(const ordered_json& j, const std::string& path) {
  const std::string text = j.dump(2) + "\n";
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error(ErrorCode::io, "write to '" + path + "' failed");
}

// ---- subcommands

struct SynthArgs {
  std::string config, out_dir = ".";
  bool no_ue = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n;
};

void run_synth(const SynthArgs& a) {
  SynthConfig cfg = a.config.empty() ? SynthConfig{} : io::read_synth_config(a.config);
  if (a.no_ue) cfg.frac_ue = 0.0;
  if (a.seed) cfg.seed = *a.seed;
  if (a.n) cfg.n_samples = *a.n;
  const auto data = generate_paired_dataset(cfg);
  fs::create_directories(a.out_dir);
  const fs::path dir(a.out_dir);
  io::write_fdmp(io::FdmpData::from_records(data.li, Domain::LI), dir / "li.fdmp");
  io::write_fdmp(io::FdmpData::from_records(data.hi, Domain::HI), dir / "hi.fdmp");
  io::TruthTable truth;
  for (const auto& r : data.li) truth.labels.push_back(*r.label);
  truth.planted = data.planted;
  io::write_truth(truth, dir / "truth.txt");
  std::cerr << "synth: " << data.li.size() << " paired samples written to " << dir.string() << "\n";
}

struct FitArgs {
  std::string li, hi, config, out_dir = ".", truth;
  std::optional<std::size_t> calib_size;
};

void run_fit(const FitArgs& a) {
  auto cfg = load_config(a.config);
  if (a.calib_size) cfg.fit.calib_size = *a.calib_size;
  auto pairs = pair_inputs(io::read_fdmp(a.li), io::read_fdmp(a.hi));
  if (!a.truth.empty()) {
    const auto truth = io::read_truth(a.truth);
    detail::require(truth.labels.size() == pairs.size(), "truth file does not match the number of pairs");
    for (std::size_t i = 0; i < pairs.size(); ++i) pairs[i].li.label = pairs[i].hi.label = truth.labels[i];
  }
  const auto model = fit_model(pairs, cfg.fit);
  fs::create_directories(a.out_dir);
  io::write_model(model, fs::path(a.out_dir) / "banks.bin");
  io::write_thresholds(model, fs::path(a.out_dir) / "thresholds.txt");
  std::cerr << "fit: calibrated on " << model.calibration_indices.size() << " pairs; LI tau_eu="
            << model.li.thresholds.tau_eu() << " tau_au=" << model.li.thresholds.tau_au()
            << ", HI tau_eu=" << model.hi.thresholds.tau_eu() << " tau_au=" << model.hi.thresholds.tau_au()
            << "\n";
}

struct TaxonomyArgs {
  std::string in, banks, hi, out = "tags.txt";
  bool oracle = false;
  std::size_t workers = 0;
};

void run_taxonomy(const TaxonomyArgs& a) {
  const auto model = io::read_model(a.banks);
  const auto li = io::read_fdmp(a.in);
  detail::require(li.domain == Domain::LI, "--in must be an LI dump");
  auto samples = assess(li.records, model, a.workers);
  if (a.oracle) {
    detail::require(!a.hi.empty(), "--oracle needs --hi", ErrorCode::missing_field);
    const auto hi = hi_side(pair_inputs(li, io::read_fdmp(a.hi)));
    const auto hi_labels = classify_all(hi, model.hi, a.workers);
    for (std::size_t i = 0; i < samples.size(); ++i) {
      auto& dyn = samples[i].dynamic;
      dyn.tag = classify_dynamic_oracle(samples[i].li_static.tag, hi_labels[i].tag);
      dyn.source = LabelSource::oracle;
    }
  }
  io::write_tags(samples, a.out);
  std::size_t counts[4] = {0, 0, 0, 0};
  for (const auto& s : samples) ++counts[static_cast<int>(s.dynamic.tag)];
  std::cerr << "taxonomy (" << (a.oracle ? "oracle" : "surrogate") << "): C=" << counts[0] << " UAR=" << counts[1]
            << " UAI=" << counts[2] << " UE=" << counts[3] << "\n";
}

struct QueryArgs {
  std::string tags, config, policy = "finegrained", out = "plan.txt", budget, random_pool;
  std::optional<std::uint64_t> seed;
};

void run_query(const QueryArgs& a) {
  const auto cfg = load_config(a.config);
  std::optional<double> budget = cfg.budget;
  if (!a.budget.empty()) {
    budget = a.budget == "none" ? std::nullopt : std::optional<double>(io::parse_number<double>(a.budget, "--budget"));
  }
  const auto policy = parse_policy(a.policy);
  const auto samples = io::read_tags(a.tags);
  const auto pool = a.random_pool.empty() ? cfg.random_pool : parse_random_pool(a.random_pool);
  const auto plan = make_plan(policy, samples, cfg.cost, budget, a.seed.value_or(cfg.fit.seed), pool);
  io::write_plan({to_string(policy), plan}, a.out);
  if (plan.status == PlanStatus::budget_below_li_cost) {
    std::cerr << "warning: budget " << *budget << " is below the LI cost " << cfg.cost.t_li
              << "; no HI queries planned\n";
  } else if (plan.selected.empty()) {
    std::cerr << "warning: budget admits no HI queries; plan is empty\n";
  }
  std::cerr << "query: " << plan.selected.size() << " of " << plan.n_total << " samples selected, T_A="
            << plan.realized_cost << "\n";
}

struct FuseArgs {
  std::string plan, li, hi, banks, out = "fused.fdmp";
};

void run_fuse(const FuseArgs& a) {
  const auto plan_file = io::read_plan(a.plan);
  const auto li = io::read_fdmp(a.li);
  const auto pairs = pair_inputs(li, io::read_fdmp(a.hi));
  detail::require(plan_file.plan.n_total == pairs.size(), "plan was made for " +
                                                              std::to_string(plan_file.plan.n_total) +
                                                              " samples, inputs hold " + std::to_string(pairs.size()));
  std::vector<ProbabilityVector> li_p, hi_p;
  for (const auto& p : pairs) {
    li_p.push_back(p.li.probs);
    hi_p.push_back(p.hi.probs);
  }
  const auto fused = fuse_predictions(li_p, hi_p, plan_file.plan);
  // Fused dump keeps the LI features and grid so it stays aligned with the LI input.
  io::FdmpData out = li;
  for (std::size_t i = 0; i < out.records.size(); ++i) out.records[i].probs = fused.probs[i];
  io::write_fdmp(out, a.out);
  if (!a.banks.empty()) {
    const auto model = io::read_model(a.banks);
    std::vector<io::ProvenanceRow> prov;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const bool from_hi = fused.provenance[i] == Domain::HI;
      const auto st = from_hi ? model.hi.classify(pairs[i].hi) : model.li.classify(pairs[i].li);
      prov.push_back({fused.provenance[i], st.tag, st.eu_score});
    }
    io::write_provenance(prov, a.out + ".prov");
  }
  std::cerr << "fuse: " << plan_file.plan.selected.size() << " of " << pairs.size()
            << " predictions taken from HI\n";
}

struct EvalArgs {
  std::string pred, truth, prov, config, banks, li, hi, out;
};

void run_eval(const EvalArgs& a) {
  const auto cfg = load_config(a.config);
  const auto pred = io::read_fdmp(a.pred);
  const auto truth = io::read_truth(a.truth);
  detail::require(truth.labels.size() == pred.records.size(), "truth and prediction counts differ");
  std::vector<ProbabilityVector> probs;
  std::vector<std::size_t> labels(truth.labels.begin(), truth.labels.end());
  for (const auto& r : pred.records) probs.push_back(r.probs);

  const std::string prov_path = a.prov.empty() ? a.pred + ".prov" : a.prov;
  std::vector<bool> certain;
  if (fs::exists(prov_path)) {
    const auto prov = io::read_provenance(prov_path);
    detail::require(prov.size() == probs.size(), "provenance and prediction counts differ");
    for (const auto& p : prov) certain.push_back(p.tag == StaticTag::C);
  } else if (!a.prov.empty()) {
    throw Error(ErrorCode::io, "cannot open '" + a.prov + "'");
  }

  EvalReport rep;
  std::vector<std::size_t> predicted;
  for (const auto& p : probs) predicted.push_back(p.argmax());
  const auto f1 = macro_f1(predicted, labels, probs.front().size());
  rep.macro_f1 = f1.macro;
  rep.per_class_f1 = f1.per_class;
  rep.ece = ece(probs, labels, cfg.n_bins);
  if (!certain.empty()) rep.p_accurate_certain = p_accurate_certain(predicted, labels, certain);

  if (!a.banks.empty()) {
    detail::require(!a.li.empty() && !a.hi.empty(), "--banks needs --li and --hi for tau and aucc",
                    ErrorCode::missing_field);
    const auto model = io::read_model(a.banks);
    const auto pairs = pair_inputs(io::read_fdmp(a.li), io::read_fdmp(a.hi));
    auto li = li_side(pairs), hi = hi_side(pairs);
    apply_truth(li, truth);
    apply_truth(hi, truth);
    const auto q_li = static_quality(li, model.li, cfg.coverage, cfg.n_bins);
    const auto q_hi = static_quality(hi, model.hi, cfg.coverage, cfg.n_bins);
    rep.kendall_tau = 0.5 * (q_li.kendall_tau + q_hi.kendall_tau);
    rep.aucc = 0.5 * (q_li.aucc + q_hi.aucc);
  }

  ordered_json j;
  j["f1"] = number(rep.macro_f1);
  j["ece"] = number(rep.ece);
  j["pac"] = number(rep.p_accurate_certain);
  j["tau"] = number(rep.kendall_tau);
  j["aucc"] = number(rep.aucc);
  j["int_f1"] = number(rep.int_f1);
  j["int_ece"] = number(rep.int_ece);
  j["int_pac"] = number(rep.int_pac);
  j["per_class_f1"] = ordered_json::array();
  for (double v : rep.per_class_f1) j["per_class_f1"].push_back(number(v));
  j["n"] = probs.size();
  write_json(j, a.out);
}

struct SweepArgs {
  std::string li, hi, banks, truth, config, policy = "finegrained", budgets = "2:50:2", out, point_budget,
      random_pool;
  std::optional<std::uint64_t> seed;
};

void run_sweep_cmd(const SweepArgs& a) {
  const auto cfg = load_config(a.config);
  const auto model = io::read_model(a.banks);
  const auto pairs = pair_inputs(io::read_fdmp(a.li), io::read_fdmp(a.hi));
  auto li = li_side(pairs), hi = hi_side(pairs);
  if (!a.truth.empty()) {
    const auto truth = io::read_truth(a.truth);
    apply_truth(li, truth);
    apply_truth(hi, truth);
  }
  SweepSpec spec;
  spec.policy = parse_policy(a.policy);
  spec.cost = cfg.cost;
  spec.budgets = parse_budgets(a.budgets);
  if (!a.point_budget.empty()) spec.point_budget = io::parse_number<double>(a.point_budget, "--point-budget");
  else if (cfg.budget) spec.point_budget = cfg.budget;
  spec.seed = a.seed.value_or(cfg.fit.seed);
  spec.pool = a.random_pool.empty() ? cfg.random_pool : parse_random_pool(a.random_pool);
  spec.n_bins = cfg.n_bins;
  spec.coverage_grid = cfg.coverage;
  const auto rep = run_sweep(li, hi, model, spec);

  ordered_json j;
  j["policy"] = to_string(spec.policy);
  j["f1"] = number(rep.macro_f1);
  j["ece"] = number(rep.ece);
  j["pac"] = number(rep.p_accurate_certain);
  j["tau"] = number(rep.kendall_tau);
  j["aucc"] = number(rep.aucc);
  j["int_f1"] = number(rep.int_f1);
  j["int_ece"] = number(rep.int_ece);
  j["int_pac"] = number(rep.int_pac);
  j["per_class_f1"] = ordered_json::array();
  for (double v : rep.per_class_f1) j["per_class_f1"].push_back(number(v));
  j["curves"] = {{"budget_f1", curve_json(rep.f1_curve)},
                 {"budget_ece", curve_json(rep.ece_curve)},
                 {"budget_pac", curve_json(rep.pac_curve)}};
  write_json(j, a.out);
}

struct DownscaleArgs {
  std::string in, out;
  int factor = 4;
};

void run_downscale(const DownscaleArgs& a) {
  const auto data = io::read_fdmp(a.in);
  const auto out = downscale_grid(data.grid(), a.factor);
  io::write_fdmp(io::FdmpData::from_grid(out), a.out);
  std::cerr << "downscale: " << data.height << "x" << data.width << " -> " << out.height << "x" << out.width
            << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Uncertainty-aware adaptive imaging pipeline over LI/HI feature dumps"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth", "Generate a paired synthetic LI/HI dataset");
  c_synth->add_option("--config", synth.config, "Synthetic key=value config")->check(CLI::ExistingFile);
  c_synth->add_option("--out-dir", synth.out_dir, "Directory for li.fdmp, hi.fdmp and truth.txt");
  c_synth->add_flag("--no-ue", synth.no_ue, "Plant no epistemic samples (training split)");
  c_synth->add_option("--seed", synth.seed, "Override the config seed");
  c_synth->add_option("--n", synth.n, "Override the sample count");

  FitArgs fit;
  auto* c_fit = app.add_subcommand("fit", "Fit EU banks, thresholds and resolvability banks");
  c_fit->add_option("--li", fit.li, "LI training dump (labelled)")->required();
  c_fit->add_option("--hi", fit.hi, "HI training dump")->required();
  c_fit->add_option("--config", fit.config, "Run config");
  c_fit->add_option("--calib-size", fit.calib_size, "Calibration draw size");
  c_fit->add_option("--truth", fit.truth, "Labels for unlabelled dumps");
  c_fit->add_option("--out-dir", fit.out_dir, "Directory for banks.bin and thresholds.txt");

  TaxonomyArgs tax;
  auto* c_tax = app.add_subcommand("taxonomy", "Tag LI samples with static and dynamic categories");
  c_tax->add_option("--in", tax.in, "LI dump")->required();
  c_tax->add_option("--banks", tax.banks, "Model file from fit")->required();
  c_tax->add_flag("--oracle", tax.oracle, "Use the paired HI dump instead of the surrogate");
  c_tax->add_option("--hi", tax.hi, "HI dump for --oracle");
  c_tax->add_option("--out", tax.out, "Tags file");
  c_tax->add_option("--workers", tax.workers, "Scoring threads (0 = all hardware threads)");

  QueryArgs query;
  auto* c_query = app.add_subcommand("query", "Select samples for HI re-imaging under a budget");
  c_query->add_option("--tags", query.tags, "Tags file from taxonomy")->required();
  c_query->add_option("--budget", query.budget, "Normalized budget T_A, or 'none'");
  c_query->add_option("--policy", query.policy, "finegrained, random or maxau")
      ->check(CLI::IsMember({"finegrained", "random", "maxau"}));
  c_query->add_option("--seed", query.seed, "Seed for the random policy");
  c_query->add_option("--random-pool", query.random_pool, "Random policy pool: all or ua")
      ->check(CLI::IsMember({"all", "ua"}));
  c_query->add_option("--config", query.config, "Run config");
  c_query->add_option("--out", query.out, "Plan file");

  FuseArgs fuse;
  auto* c_fuse = app.add_subcommand("fuse", "Merge LI and HI predictions according to a plan");
  c_fuse->add_option("--plan", fuse.plan, "Plan file")->required();
  c_fuse->add_option("--li", fuse.li, "LI dump")->required();
  c_fuse->add_option("--hi", fuse.hi, "HI dump")->required();
  c_fuse->add_option("--banks", fuse.banks, "Model file; enables the .prov certainty sidecar");
  c_fuse->add_option("--out", fuse.out, "Fused dump");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Score fused predictions against ground truth");
  c_eval->add_option("--pred", eval.pred, "Prediction dump")->required();
  c_eval->add_option("--truth", eval.truth, "Truth file")->required();
  c_eval->add_option("--prov", eval.prov, "Provenance sidecar (default: <pred>.prov if present)");
  c_eval->add_option("--banks", eval.banks, "Model file for tau and aucc");
  c_eval->add_option("--li", eval.li, "LI dump for tau and aucc");
  c_eval->add_option("--hi", eval.hi, "HI dump for tau and aucc");
  c_eval->add_option("--config", eval.config, "Run config");
  c_eval->add_option("--out", eval.out, "Report path (default stdout)");

  SweepArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "Budget sweep with metric curves and their integrals");
  c_sweep->add_option("--li", sweep.li, "LI test dump")->required();
  c_sweep->add_option("--hi", sweep.hi, "HI test dump")->required();
  c_sweep->add_option("--banks", sweep.banks, "Model file from fit")->required();
  c_sweep->add_option("--truth", sweep.truth, "Truth file (default: labels in the dumps)");
  c_sweep->add_option("--budgets", sweep.budgets, "start:stop:step or a comma list");
  c_sweep->add_option("--point-budget", sweep.point_budget, "Budget for the point metrics");
  c_sweep->add_option("--policy", sweep.policy, "finegrained, random or maxau")
      ->check(CLI::IsMember({"finegrained", "random", "maxau"}));
  c_sweep->add_option("--seed", sweep.seed, "Seed for the random policy");
  c_sweep->add_option("--random-pool", sweep.random_pool, "Random policy pool: all or ua")
      ->check(CLI::IsMember({"all", "ua"}));
  c_sweep->add_option("--config", sweep.config, "Run config");
  c_sweep->add_option("--out", sweep.out, "Report path (default stdout)");

  DownscaleArgs down;
  auto* c_down = app.add_subcommand("downscale", "Block-mean downscale a grid dump");
  c_down->add_option("--in", down.in, "Grid dump")->required();
  c_down->add_option("--factor", down.factor, "Block size")->check(CLI::PositiveNumber);
  c_down->add_option("--out", down.out, "Output dump")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*c_synth) run_synth(synth);
    else if (*c_fit) run_fit(fit);
    else if (*c_tax) run_taxonomy(tax);
    else if (*c_query) run_query(query);
    else if (*c_fuse) run_fuse(fuse);
    else if (*c_eval) run_eval(eval);
    else if (*c_sweep) run_sweep_cmd(sweep);
    else if (*c_down) run_downscale(down);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: io: " << e.what() << "\n";
    return static_cast<int>(ErrorCode::io);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
