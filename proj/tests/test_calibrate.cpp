#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "adaptau/calibrate.hpp"
#include "oracles.hpp"

using namespace adaptau;

TEST(Stratified, FullDrawReturnsEverything) {
  const std::vector<std::uint16_t> labels{0, 1, 1, 2, 0, 2, 2};
  const auto idx = stratified_indices(labels, {}, labels.size(), 1);
  std::vector<std::size_t> all(labels.size());
  std::iota(all.begin(), all.end(), 0);
  EXPECT_EQ(idx, all);
}

TEST(Stratified, EqualStrataSplitEvenly) {
  std::vector<std::uint16_t> labels(400, 0);
  std::fill(labels.begin() + 200, labels.end(), 1);
  const auto idx = stratified_indices(labels, {}, 100, 3);
  const auto ones = std::count_if(idx.begin(), idx.end(), [&](std::size_t i) { return labels[i] == 1; });
  EXPECT_EQ(idx.size(), 100u);
  EXPECT_EQ(ones, 50);
}

TEST(Stratified, LargestRemainderProportions) {
  // 700/200/100 of 1000, target 100 -> exact quotas 70/20/10.
  const std::vector<std::size_t> sizes{700, 200, 100};
  EXPECT_EQ(allocate_largest_remainder(sizes, 100), (std::vector<std::size_t>{70, 20, 10}));
  // 5/3/2 of 10, target 4 -> quotas 2.0/1.2/0.8 -> floors 2/1/0, one seat left, largest
  // remainder is 0.8 -> 2/1/1.
  const std::vector<std::size_t> uneven{5, 3, 2};
  EXPECT_EQ(allocate_largest_remainder(uneven, 4), (std::vector<std::size_t>{2, 1, 1}));
  // 1/1/1, target 2 -> equal remainders, ties go to earlier strata.
  const std::vector<std::size_t> flat{1, 1, 1};
  EXPECT_THROW(allocate_largest_remainder(flat, 2), Error);
  EXPECT_EQ(allocate_largest_remainder(flat, 3), (std::vector<std::size_t>{1, 1, 1}));
}

TEST(Stratified, EveryStratumRepresented) {
  // 98/1/1 of 100, target 10 -> floors 9/0/0; top-up gives each tiny stratum one draw.
  const std::vector<std::size_t> sizes{98, 1, 1};
  EXPECT_EQ(allocate_largest_remainder(sizes, 10), (std::vector<std::size_t>{8, 1, 1}));
}

TEST(Stratified, GroupsFormSeparateStrata) {
  std::vector<std::uint16_t> labels(100, 0);
  std::vector<int> groups(100, 0);
  std::fill(groups.begin() + 90, groups.end(), 1);
  const auto idx = stratified_indices(labels, groups, 10, 0);
  const auto g1 = std::count_if(idx.begin(), idx.end(), [&](std::size_t i) { return groups[i] == 1; });
  EXPECT_EQ(g1, 1);
}

TEST(Stratified, DeterministicSortedAndValidated) {
  std::vector<std::uint16_t> labels;
  for (int i = 0; i < 300; ++i) labels.push_back(static_cast<std::uint16_t>(i % 3));
  const auto a = stratified_indices(labels, {}, 50, 42);
  EXPECT_EQ(a, stratified_indices(labels, {}, 50, 42));
  EXPECT_NE(a, stratified_indices(labels, {}, 50, 43));
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_THROW(stratified_indices(labels, {}, 301, 0), Error);
  EXPECT_THROW(stratified_indices(labels, {}, 2, 0), Error);
}

TEST(Stratified, SampleRequiresLabels) {
  std::vector<FeatureRecord> recs(3, FeatureRecord{{0.0f}, ProbabilityVector::uniform(2), std::nullopt,
                                                   std::nullopt, Domain::LI});
  try {
    sample_calibration_set(recs, 2, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::missing_field);
  }
}

TEST(TauEu, OrderStatistic) {
  std::vector<double> scores(100);
  std::iota(scores.begin(), scores.end(), 1.0);
  std::shuffle(scores.begin(), scores.end(), std::mt19937_64(1));
  EXPECT_EQ(calibrate_tau_eu(scores, 0.95), 95.0);
  EXPECT_EQ(calibrate_tau_eu(std::vector<double>(10, 2.5), 0.95), 2.5);
  EXPECT_THROW(calibrate_tau_eu(std::vector<double>{}, 0.95), Error);
  EXPECT_THROW(calibrate_tau_eu(scores, 1.0), Error);
}

TEST(TauEu, GaussianQuantile) {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> g;
  std::vector<double> s(10000);
  for (auto& v : s) v = g(rng);
  EXPECT_NEAR(calibrate_tau_eu(s, 0.95), 1.6448536269514722, 0.05);
}

TEST(TauEuProperty, MonotoneInTprAndFreshDrawCoverage) {
  std::mt19937_64 rng(99);
  std::chi_squared_distribution<double> chi(16.0);
  std::vector<double> calib(10000), fresh(10000);
  for (auto& v : calib) v = std::sqrt(chi(rng));
  for (auto& v : fresh) v = std::sqrt(chi(rng));
  double prev = -1.0;
  for (double tpr = 0.05; tpr < 1.0; tpr += 0.05) {
    const double tau = calibrate_tau_eu(calib, tpr);
    EXPECT_GE(tau, prev);
    prev = tau;
    const double below =
        static_cast<double>(std::count_if(fresh.begin(), fresh.end(), [&](double v) { return v < tau; })) /
        static_cast<double>(fresh.size());
    EXPECT_NEAR(below, tpr, 0.02) << "tpr=" << tpr;
    const double in_sample =
        static_cast<double>(std::count_if(calib.begin(), calib.end(), [&](double v) { return v < tau; })) /
        static_cast<double>(calib.size());
    EXPECT_GE(in_sample, tpr - 1.0 / 10000 - 1e-12);
    EXPECT_LT(in_sample, tpr + 1.0 / 10000);
  }
}

TEST(TauAu, AllAccurateAdmitsEverything) {
  std::vector<AuCalibrationSample> s{{0.1, 0.2, true}, {0.2, 1.0, true}, {0.3, 0.5, true}};
  const auto r = calibrate_tau_au(s, 1.0, 6);
  EXPECT_DOUBLE_EQ(r.tau_au, std::log(6.0));
  EXPECT_EQ(r.objective, 3u);
}

TEST(TauAu, SeparableCasePicksSmallestAdmittingCandidate) {
  std::vector<AuCalibrationSample> s{{0.1, 0.05, true}, {0.1, 0.1, true}, {0.1, 0.5, false},
                                     {0.1, 0.9, false}, {5.0, 0.01, true}};
  const auto r = calibrate_tau_au(s, 1.0, 4);
  EXPECT_DOUBLE_EQ(r.tau_au, 0.5);
  EXPECT_EQ(r.objective, 2u);
}

TEST(TauAu, HighEuRecordsIgnoredAndEmptyIsUnusable) {
  std::vector<AuCalibrationSample> s{{2.0, 0.1, true}};
  try {
    calibrate_tau_au(s, 1.0, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unusable_calibration);
  }
}

TEST(TauAu, MixedTwentyRecordCaseMatchesExhaustiveSweep) {
  std::mt19937_64 rng(20);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<AuCalibrationSample> s;
  std::vector<oracle::AuRecord> o;
  for (int i = 0; i < 20; ++i) {
    const double eu = 2.0 * u(rng), h = std::log(5.0) * u(rng);
    const bool acc = u(rng) < 0.6;
    s.push_back({eu, h, acc});
    o.push_back({eu, h, acc});
  }
  const auto [tau, obj] = oracle::tau_au_sweep(o, 1.2, 5);
  const auto r = calibrate_tau_au(s, 1.2, 5);
  EXPECT_EQ(r.tau_au, tau);
  EXPECT_EQ(r.objective, obj);
}

TEST(TauAuProperty, ObjectiveEqualsExhaustiveMaximum) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(u(rng) * 60);
    std::vector<AuCalibrationSample> s;
    std::vector<oracle::AuRecord> o;
    for (std::size_t i = 0; i < n; ++i) {
      // coarse grid so entropy ties occur
      const double h = std::round(u(rng) * 8.0) / 8.0 * std::log(3.0);
      const double eu = u(rng);
      const bool acc = u(rng) < 0.5;
      s.push_back({eu, h, acc});
      o.push_back({eu, h, acc});
    }
    const double tau_eu = 0.3 + 0.7 * u(rng);
    if (std::none_of(s.begin(), s.end(), [&](const auto& x) { return x.eu < tau_eu; })) continue;
    const auto [tau, obj] = oracle::tau_au_sweep(o, tau_eu, 3);
    const auto r = calibrate_tau_au(s, tau_eu, 3);
    EXPECT_EQ(r.objective, obj);
    EXPECT_EQ(r.tau_au, tau);
  }
}
