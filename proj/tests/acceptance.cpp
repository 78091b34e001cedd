// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "adaptau/adaptau.hpp"
#include "oracles.hpp"

using namespace adaptau;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

RowMatrix to_rows(const std::vector<oracle::Vec>& v) {
  RowMatrix m(static_cast<Eigen::Index>(v.size()), static_cast<Eigen::Index>(v.front().size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = 0; j < v[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v[i][j];
  }
  return m;
}

Eigen::MatrixXd to_matrix(const oracle::Mat& a) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = a[i][j];
  }
  return m;
}

Eigen::VectorXd to_eigen(const oracle::Vec& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void oracle_equivalence(Outcome& o) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::uniform_int_distribution<std::size_t> dims(1, 16), groups(1, 6);
  double worst_rel = 0.0;
  for (int bank = 0; bank < 100; ++bank) {
    const std::size_t d = dims(rng), k = groups(rng);
    const auto cov = oracle::random_spd(d, rng);
    std::vector<oracle::Vec> means(k, oracle::Vec(d));
    for (auto& m : means) {
      for (auto& v : m) v = 3.0 * g(rng);
    }
    std::vector<int> ids(k);
    for (std::size_t i = 0; i < k; ++i) ids[i] = static_cast<int>(i);
    const auto fitted = GaussianBank::from_covariance(ids, to_rows(means), to_matrix(cov));
    for (int q = 0; q < 20; ++q) {
      oracle::Vec z(d);
      for (auto& v : z) v = 4.0 * g(rng);
      const double expect = oracle::mahalanobis(z, means, cov);
      const double got = fitted.score(to_eigen(z)).score;
      worst_rel = std::max(worst_rel, std::abs(got - expect) / std::max(expect, 1e-12));
    }
  }
  o.check(worst_rel <= 1e-6, "Mahalanobis relative error");

  std::size_t knn_mismatch = 0;
  for (std::size_t d : {2u, 8u, 16u}) {
    std::vector<oracle::Vec> pts(1000, oracle::Vec(d));
    for (auto& p : pts) {
      for (auto& v : p) v = g(rng);
    }
    for (std::size_t k : {1u, 10u, 100u, 1000u}) {
      const NeighborBank nb(to_rows(pts), k);
      for (int q = 0; q < 20; ++q) {
        oracle::Vec z(d);
        for (auto& v : z) v = 1.5 * g(rng);
        if (nb.score(to_eigen(z)) != oracle::knn(z, pts, k)) ++knn_mismatch;
      }
    }
  }
  o.check(knn_mismatch == 0, "KNN mismatch");
  o.detail << "max MD rel err " << worst_rel << " over 100 banks; KNN mismatches " << knn_mismatch << "/240";
}

void truth_table(Outcome& o) {
  using S = StaticTag;
  using D = DynamicTag;
  const struct {
    S li, hi;
    D want;
  } table[] = {{S::C, S::C, D::C},     {S::C, S::UA, D::C},     {S::C, S::UE, D::C},
               {S::UE, S::C, D::UE},   {S::UE, S::UA, D::UE},   {S::UE, S::UE, D::UE},
               {S::UA, S::C, D::UAR},  {S::UA, S::UA, D::UAI},  {S::UA, S::UE, D::UAI}};
  int ok = 0;
  for (const auto& row : table) ok += classify_dynamic_oracle(row.li, row.hi) == row.want;
  o.check(ok == 9, "truth table");
  o.detail << ok << "/9 combinations";
}

void threshold_calibration(Outcome& o) {
  std::mt19937_64 rng(2024);
  std::chi_squared_distribution<double> chi(16.0);
  std::vector<double> calib(10000), fresh(10000);
  for (auto& v : calib) v = std::sqrt(chi(rng));
  for (auto& v : fresh) v = std::sqrt(chi(rng));
  const double tau = calibrate_tau_eu(calib, 0.95);
  const double below =
      static_cast<double>(std::count_if(fresh.begin(), fresh.end(), [&](double v) { return v < tau; })) / 1e4;
  o.check(below >= 0.93 && below <= 0.97, "fresh-draw coverage");

  std::uniform_real_distribution<double> u(0.0, 1.0);
  int exact = 0;
  const int cases = 20;
  for (int c = 0; c < cases; ++c) {
    std::vector<AuCalibrationSample> s;
    std::vector<oracle::AuRecord> r;
    for (int i = 0; i < 1000; ++i) {
      const double h = c % 2 ? std::round(u(rng) * 30.0) / 30.0 * std::log(6.0) : u(rng) * std::log(6.0);
      const double eu = u(rng);
      const bool acc = u(rng) < 1.0 - 0.8 * h / std::log(6.0);
      s.push_back({eu, h, acc});
      r.push_back({eu, h, acc});
    }
    const auto got = calibrate_tau_au(s, 0.9, 6);
    const auto [tau_au, obj] = oracle::tau_au_sweep(r, 0.9, 6);
    exact += got.tau_au == tau_au && got.objective == obj;
  }
  o.check(exact == cases, "tau_AU sweep equality");
  o.detail << "fresh below-tau fraction " << below << "; tau_AU exact on " << exact << "/" << cases
           << " cases of 1000";
}

double surrogate_mean_f1(double sep_li) {
  SynthConfig tc;
  tc.sep_li = sep_li;
  tc.frac_ue = 0.0;
  tc.seed = 1000;
  SynthConfig ec = tc;
  ec.frac_ue = 0.1;
  ec.seed = 2000;
  const auto train = generate_paired_dataset(tc);
  const auto test = generate_paired_dataset(ec);
  const auto model = fit_model(zip_pairs(train.li, train.hi), FitOptions{});
  const auto oracle = oracle_tags(classify_all(test.li, model.li), classify_all(test.hi, model.hi));
  std::vector<DynamicTag> sur;
  for (const auto& s : assess(test.li, model)) sur.push_back(s.dynamic.tag);
  return surrogate_agreement(oracle, sur).mean_f1;
}

void surrogate_fidelity(Outcome& o) {
  const auto t0 = Clock::now();
  std::vector<double> f1;
  for (double sep : {8.0, 4.0, 2.0, 1.0}) f1.push_back(surrogate_mean_f1(sep));
  const double elapsed = seconds_since(t0);
  o.check(f1[0] >= 0.90, "mean F1 at sep 8");
  o.check(f1[0] > f1[1] && f1[1] > f1[2] && f1[2] > f1[3], "monotone degradation");
  o.check(elapsed < 60.0, "runtime");
  o.detail << "mean F1 sep{8,4,2,1} = " << f1[0] << ", " << f1[1] << ", " << f1[2] << ", " << f1[3];
}

void baseline_ordering(Outcome& o) {
  const auto t0 = Clock::now();
  const CostModel cost;
  double pac[3] = {0, 0, 0}, ece_sum[3] = {0, 0, 0};
  const int seeds = 8;
  for (int seed = 0; seed < seeds; ++seed) {
    SynthConfig tc;
    tc.frac_ue = 0.0;
    tc.seed = 5000 + static_cast<std::uint64_t>(seed);
    SynthConfig ec;
    ec.seed = 6000 + static_cast<std::uint64_t>(seed);
    const auto train = generate_paired_dataset(tc);
    const auto test = generate_paired_dataset(ec);
    FitOptions fo;
    fo.seed = static_cast<std::uint64_t>(seed);
    const auto model = fit_model(zip_pairs(train.li, train.hi), fo);
    const auto samples = assess(test.li, model);
    const auto li_st = classify_all(test.li, model.li);
    const auto hi_st = classify_all(test.hi, model.hi);
    const QueryPolicy policies[3] = {QueryPolicy::finegrained, QueryPolicy::maxau, QueryPolicy::random};
    for (int p = 0; p < 3; ++p) {
      const auto plan = make_plan(policies[p], samples, cost, 50.0, static_cast<std::uint64_t>(seed));
      const auto m = evaluate_plan(test.li, test.hi, li_st, hi_st, plan);
      pac[p] += m.p_accurate_certain / seeds;
      ece_sum[p] += m.ece / seeds;
    }
  }
  const double elapsed = seconds_since(t0);
  o.check(pac[0] >= pac[1] && pac[1] >= pac[2], "P(a,c) ordering");
  o.check(ece_sum[0] <= ece_sum[2], "ECE ordering");
  o.check(elapsed < 300.0, "runtime");
  o.detail << "mean P(a,c) fg/maxau/random = " << pac[0] << "/" << pac[1] << "/" << pac[2]
           << "; mean ECE fg/random = " << ece_sum[0] << "/" << ece_sum[2] << " over " << seeds << " seeds";
}

void cost_accounting(Outcome& o) {
  const CostModel cost{1.0, 250.0};
  const double t_a = cost.realized(196, 1000);
  o.check(t_a == 50.0, "T_A exact");

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<SampleAssessment> pop(1000);
  for (auto& s : pop) {
    const double r = u(rng);
    s.entropy = u(rng);
    if (r < 0.3) {
      s.li_static = {StaticTag::UA, 0.1, s.entropy};
      s.dynamic = {DynamicTag::UAR, LabelSource::surrogate, u(rng), u(rng)};
    } else if (r < 0.45) {
      s.li_static = {StaticTag::UA, 0.1, s.entropy};
      s.dynamic = {DynamicTag::UAI, LabelSource::surrogate, u(rng), u(rng)};
    }
  }
  std::size_t over = 0, plans = 0;
  for (int p = 0; p < 3; ++p) {
    for (double b = 2.0; b <= 50.0; b += 2.0) {
      const auto plan = make_plan(static_cast<QueryPolicy>(p), pop, cost, b, 7);
      ++plans;
      over += plan.realized_cost > b;
    }
  }
  o.check(over == 0, "budget exceeded");

  const std::vector<std::vector<std::pair<double, double>>> curves{
      {{0, 0}, {1, 1}}, {{2, 0.7}, {10, 0.7}, {50, 0.7}}, {{0, .2}, {1, .4}, {3, .5}, {4, .9}, {8, .6}}};
  const double manual[] = {0.5, 0.7, 9.8 / 16.0};
  double worst = 0.0;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    worst = std::max(worst, std::abs(budget_auc(curves[i]) - manual[i]));
    worst = std::max(worst, std::abs(budget_auc(curves[i]) - oracle::trapezoid(curves[i])));
  }
  o.check(worst < 1e-12, "budget_auc vs manual trapezoid");
  o.detail << "T_A(rho=0.196) = " << t_a << "; " << over << "/" << plans
           << " plans over budget; budget_auc max abs err " << worst;
}

void metric_units(Outcome& o) {
  std::vector<ProbabilityVector> p(10, ProbabilityVector::one_hot(3, 1));
  const double e0 = ece(p, std::vector<std::size_t>(10, 1));
  const double e1 = ece(p, std::vector<std::size_t>(10, 0));
  o.check(e0 == 0.0 && e1 == 1.0, "ECE extremes");

  const std::vector<double> x{1, 2, 3, 4, 5}, y{2, 4, 6, 8, 10}, r{5, 4, 3, 2, 1};
  const double tp = kendall_tau(x, y), tn = kendall_tau(x, r);
  o.check(tp == 1.0 && tn == -1.0, "Kendall +-1");

  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> small(0, 5);
  double worst_tau = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> a(200), b(200);
    for (auto& v : a) v = small(rng);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = small(rng) + (trial % 2 ? a[i] : 0.0);
    worst_tau = std::max(worst_tau, std::abs(kendall_tau(a, b) - oracle::kendall_tau_b(a, b)));
  }
  o.check(worst_tau < 1e-12, "Kendall vs O(n^2) oracle");

  std::gamma_distribution<double> g(0.5, 1.0);
  std::vector<ProbabilityVector> q;
  std::vector<std::size_t> yq;
  for (int i = 0; i < 200; ++i) {
    q.push_back(ProbabilityVector::normalized(std::vector<double>{g(rng) + 1e-6, g(rng) + 1e-6, g(rng) + 1e-6}));
    yq.push_back(static_cast<std::size_t>(i % 3));
  }
  const auto grid = default_coverage_grid();
  const double a = aucc(q, yq, std::vector<double>(200, 1.0), grid);
  const double full = ece(q, yq);
  o.check(std::abs(a - full) < 1e-12, "AUCC with constant EU");
  o.detail << "ECE extremes " << e0 << "/" << e1 << "; tau " << tp << "/" << tn << "; tau-b max err " << worst_tau
           << "; AUCC " << a << " vs ECE " << full;
}

void fdmp_round_trip(Outcome& o) {
  std::mt19937_64 rng(5);
  std::normal_distribution<float> g;
  std::uniform_real_distribution<double> u(0.01, 1.0);
  std::vector<FeatureRecord> recs;
  for (std::uint32_t i = 0; i < 64; ++i) {
    std::vector<float> f(64);
    for (auto& v : f) v = g(rng);
    std::vector<double> p(6);
    for (auto& v : p) v = u(rng);
    recs.push_back({f, ProbabilityVector::normalized(p), static_cast<std::uint16_t>(i % 6), GridCoord{i / 8, i % 8},
                    Domain::HI});
  }
  auto data = io::FdmpData::from_records(recs, Domain::HI);
  data.height = 8;
  data.width = 8;
  const auto bytes = io::encode_fdmp(data);
  const auto back = io::decode_fdmp(bytes);
  const bool bitwise = back.records == recs && io::encode_fdmp(back) == bytes;
  o.check(bitwise, "round trip");

  std::size_t truncated = 0;
  for (std::size_t len = 0; len < bytes.size(); len += 7) {
    try {
      io::decode_fdmp(std::span<const unsigned char>(bytes.data(), len));
    } catch (const Error& e) {
      truncated += e.code() == ErrorCode::truncated;
    }
  }
  const std::size_t tried = (bytes.size() + 6) / 7;
  o.check(truncated == tried, "truncation");

  auto bad = bytes;
  bad[1] = 'X';
  bool magic = false;
  try {
    io::decode_fdmp(bad);
  } catch (const Error& e) {
    magic = e.code() == ErrorCode::bad_magic;
  }
  o.check(magic, "bad magic");
  o.detail << "bitwise " << (bitwise ? "yes" : "no") << " on " << bytes.size() << " bytes; truncations rejected "
           << truncated << "/" << tried << "; bad magic " << (magic ? "rejected" : "accepted");
}

void throughput(Outcome& o) {
  std::mt19937_64 rng(6);
  const std::size_t d = 64;
  const auto cov = oracle::random_spd(d, rng, 1.0);
  std::normal_distribution<float> g;
  RowMatrix means(6, static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < means.rows(); ++i) {
    for (Eigen::Index j = 0; j < means.cols(); ++j) means(i, j) = 3.0 * g(rng);
  }
  const auto bank = GaussianBank::from_covariance({0, 1, 2, 3, 4, 5}, means, to_matrix(cov));
  const std::size_t total = 1000000, chunk = 50000;
  std::vector<float> rows(chunk * d);
  double scoring = 0.0, checksum = 0.0;
  for (std::size_t done = 0; done < total; done += chunk) {
    for (auto& v : rows) v = g(rng);
    const auto t0 = Clock::now();
    const auto scores = bank.score_rows(rows);
    scoring += seconds_since(t0);
    checksum += scores.front();
  }
  o.check(scoring <= 10.0, "throughput");
  o.detail << "1e6 vectors (d=64, 6 centroids) scored in " << scoring << " s single-threaded (checksum "
           << checksum << ")";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"oracle equivalence", oracle_equivalence},
      {"dynamic truth table", truth_table},
      {"threshold calibration", threshold_calibration},
      {"surrogate fidelity", surrogate_fidelity},
      {"baseline ordering", baseline_ordering},
      {"cost accounting", cost_accounting},
      {"metric unit checks", metric_units},
      {"FDMP round trip", fdmp_round_trip},
      {"scoring throughput", throughput},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    const double elapsed = seconds_since(t0);
    failures += !o.pass;
    std::printf("%s [%zu] %s: %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.str().c_str(), elapsed);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
