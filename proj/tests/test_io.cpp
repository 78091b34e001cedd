#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "adaptau/io/bank_file.hpp"
#include "adaptau/io/config.hpp"
#include "adaptau/io/fdmp.hpp"
#include "adaptau/io/text.hpp"

using namespace adaptau;
using namespace adaptau::io;

namespace {

std::vector<FeatureRecord> random_records(std::size_t n, std::size_t d, std::size_t c, bool labels, bool coords,
                                          Domain dom, std::mt19937_64& rng) {
  std::normal_distribution<float> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<FeatureRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<float> f(d);
    for (auto& v : f) v = g(rng);
    std::vector<double> p(c);
    for (auto& v : p) v = u(rng) + 1e-3;
    FeatureRecord r{f, ProbabilityVector::normalized(p), std::nullopt, std::nullopt, dom};
    if (labels) r.label = static_cast<std::uint16_t>(i % c);
    if (coords) r.coord = GridCoord{static_cast<std::uint32_t>(i / 4), static_cast<std::uint32_t>(i % 4)};
    out.push_back(std::move(r));
  }
  return out;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::validation;
}

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = std::filesystem::temp_directory_path() /
           ("adaptau_io_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) + "_" +
            ::testing::UnitTest::GetInstance()->current_test_info()->name());
    std::filesystem::create_directories(dir_);
  }
  void TearDown() override { std::filesystem::remove_all(dir_); }
  std::filesystem::path dir_;
};

}  // namespace

TEST(Fdmp, GoldenHeaderAndPayloadBytes) {
  FdmpData data = FdmpData::from_records(
      {FeatureRecord{{1.0f, 2.0f}, ProbabilityVector({0.25f, 0.75f}), std::nullopt, std::nullopt, Domain::LI}},
      Domain::LI);
  const std::vector<unsigned char> expected{
      'F',  'D',  'M',  'P',  0x01, 0x00, 0x00, 0x00,              // magic, version, flags
      0x01, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,              // n
      0x02, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x00,              // d, C
      0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00,        // height, width, domain
      0x00, 0x00, 0x80, 0x3f, 0x00, 0x00, 0x00, 0x40,              // 1.0f, 2.0f
      0x00, 0x00, 0x80, 0x3e, 0x00, 0x00, 0x40, 0x3f};             // 0.25f, 0.75f
  EXPECT_EQ(encode_fdmp(data), expected);
}

TEST(Fdmp, RoundTripIsBitwise) {
  std::mt19937_64 rng(1);
  for (int flags = 0; flags < 4; ++flags) {
    const bool labels = flags & 1, coords = flags & 2;
    auto recs = random_records(12, 7, 4, labels, coords, Domain::HI, rng);
    FdmpData data = FdmpData::from_records(recs, Domain::HI);
    if (flags == 3) {
      data.height = 3;
      data.width = 4;
    }
    const auto bytes = encode_fdmp(data);
    EXPECT_EQ(bytes.size(), kFdmpHeaderSize + 12 * (7 + 4) * 4 + (labels ? 24u : 0u) + (coords ? 96u : 0u));
    const auto back = decode_fdmp(bytes);
    EXPECT_EQ(back.records, recs);
    EXPECT_EQ(back.height, data.height);
    EXPECT_EQ(encode_fdmp(back), bytes);
  }
}

TEST(Fdmp, RoundTripPreservesSpecialFloats) {
  FeatureRecord r{{-0.0f, 1e-45f, 3.4028235e38f}, ProbabilityVector({1.0f, 0.0f}), 1, std::nullopt, Domain::LI};
  const auto back = decode_fdmp(encode_fdmp(FdmpData::from_records({r}, Domain::LI)));
  EXPECT_TRUE(std::signbit(back.records[0].features[0]));
  EXPECT_EQ(back.records[0].features, r.features);
}

TEST(Fdmp, RejectsTruncationAtEveryLength) {
  std::mt19937_64 rng(2);
  const auto bytes = encode_fdmp(FdmpData::from_records(random_records(3, 2, 2, true, false, Domain::LI, rng), Domain::LI));
  for (std::size_t len = 0; len < bytes.size(); ++len) {
    const std::span<const unsigned char> prefix(bytes.data(), len);
    EXPECT_EQ(code_of([&] { decode_fdmp(prefix); }), ErrorCode::truncated) << "len=" << len;
  }
  auto extra = bytes;
  extra.push_back(0);
  EXPECT_EQ(code_of([&] { decode_fdmp(extra); }), ErrorCode::validation);
}

TEST(Fdmp, RejectsBadMagicAndVersion) {
  std::mt19937_64 rng(3);
  auto bytes = encode_fdmp(FdmpData::from_records(random_records(2, 2, 2, false, false, Domain::LI, rng), Domain::LI));
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_EQ(code_of([&] { decode_fdmp(bad); }), ErrorCode::bad_magic);
  bad = bytes;
  std::copy_n("FDBK", 4, bad.begin());
  EXPECT_EQ(code_of([&] { decode_fdmp(bad); }), ErrorCode::bad_magic);
  bad = bytes;
  bad[4] = 2;
  EXPECT_EQ(code_of([&] { decode_fdmp(bad); }), ErrorCode::version_mismatch);
  bad = bytes;
  bad[6] = 0x80;
  EXPECT_EQ(code_of([&] { decode_fdmp(bad); }), ErrorCode::validation);
}

TEST(Fdmp, RejectsInvalidPayloadValues) {
  FeatureRecord r{{0.0f}, ProbabilityVector({0.5f, 0.5f}), 1, std::nullopt, Domain::LI};
  auto bytes = encode_fdmp(FdmpData::from_records({r}, Domain::LI));
  auto bad = bytes;
  bad[bad.size() - 2] = 5;  // label 5 with C = 2
  EXPECT_EQ(code_of([&] { decode_fdmp(bad); }), ErrorCode::validation);
  bad = bytes;
  const float off = 0.9f;  // probabilities no longer sum to 1
  std::memcpy(&bad[kFdmpHeaderSize + 4], &off, 4);
  EXPECT_EQ(code_of([&] { decode_fdmp(bad); }), ErrorCode::validation);
}

TEST(Fdmp, LabelsAccessorRequiresFlag) {
  std::mt19937_64 rng(4);
  const auto data = decode_fdmp(
      encode_fdmp(FdmpData::from_records(random_records(2, 2, 2, false, false, Domain::LI, rng), Domain::LI)));
  EXPECT_EQ(code_of([&] { data.labels(); }), ErrorCode::missing_field);
}

TEST(Fdmp, EncodeChecksFlagConsistency) {
  std::mt19937_64 rng(5);
  auto data = FdmpData::from_records(random_records(4, 2, 2, true, false, Domain::LI, rng), Domain::LI);
  data.records[2].label.reset();
  EXPECT_THROW(encode_fdmp(data), Error);
  data = FdmpData::from_records(random_records(4, 2, 2, false, false, Domain::LI, rng), Domain::LI);
  data.height = 3;
  data.width = 3;
  EXPECT_THROW(encode_fdmp(data), Error);
}

TEST_F(TempDir, FdmpFilesAndGridView) {
  std::mt19937_64 rng(6);
  auto data = FdmpData::from_records(random_records(8, 3, 2, true, true, Domain::HI, rng), Domain::HI);
  data.height = 2;
  data.width = 4;
  write_fdmp(data, dir_ / "a.fdmp");
  const auto back = read_fdmp(dir_ / "a.fdmp");
  EXPECT_EQ(back.records, data.records);
  EXPECT_EQ(back.grid().at(1, 3), data.records[7]);
  EXPECT_EQ(code_of([&] { read_fdmp(dir_ / "missing.fdmp"); }), ErrorCode::io);
}

namespace {

FittedModel small_model(Backend backend, std::size_t pca_dims) {
  SynthConfig cfg;
  cfg.n_samples = 1500;
  cfg.frac_ue = 0.0;
  cfg.seed = 77;
  const auto d = generate_paired_dataset(cfg);
  FitOptions opts;
  opts.distance.backend = backend;
  opts.distance.k = 10;
  opts.pca_dims = pca_dims;
  return fit_model(zip_pairs(d.li, d.hi), opts);
}

}  // namespace

TEST(Fdbk, RoundTripReproducesEveryScore) {
  SynthConfig probe_cfg;
  probe_cfg.n_samples = 200;
  probe_cfg.seed = 78;
  const auto probe = generate_paired_dataset(probe_cfg);
  for (auto [backend, pca] : {std::pair{Backend::mahalanobis, std::size_t{0}}, std::pair{Backend::knn, std::size_t{0}},
                              std::pair{Backend::mahalanobis, std::size_t{5}}}) {
    const auto model = small_model(backend, pca);
    const auto bytes = encode_model(model);
    const auto back = decode_model(bytes);
    EXPECT_EQ(encode_model(back), bytes);
    EXPECT_EQ(back.calibration_indices, model.calibration_indices);
    EXPECT_EQ(back.resolvability.projector.has_value(), pca > 0);
    EXPECT_EQ(back.li.thresholds.tau_eu(), model.li.thresholds.tau_eu());
    EXPECT_EQ(back.hi.thresholds.tau_au(), model.hi.thresholds.tau_au());
    for (std::size_t i = 0; i < probe.li.size(); ++i) {
      EXPECT_EQ(back.li.eu(probe.li[i]), model.li.eu(probe.li[i]));
      EXPECT_EQ(back.hi.eu(probe.hi[i]), model.hi.eu(probe.hi[i]));
      EXPECT_EQ(back.resolvability.distances(probe.li[i].features),
                model.resolvability.distances(probe.li[i].features));
    }
  }
}

TEST(Fdbk, RejectsCorruption) {
  const auto bytes = encode_model(small_model(Backend::mahalanobis, 0));
  auto bad = bytes;
  bad[0] = 'Z';
  EXPECT_EQ(code_of([&] { decode_model(bad); }), ErrorCode::bad_magic);
  bad = bytes;
  bad[4] = 9;
  EXPECT_EQ(code_of([&] { decode_model(bad); }), ErrorCode::version_mismatch);
  const std::span<const unsigned char> cut(bytes.data(), bytes.size() - 3);
  EXPECT_EQ(code_of([&] { decode_model(cut); }), ErrorCode::truncated);
  bad = bytes;
  bad.push_back(1);
  EXPECT_EQ(code_of([&] { decode_model(bad); }), ErrorCode::validation);
}

TEST(RunConfigText, DefaultsAndOverrides) {
  const auto def = parse_run_config("");
  EXPECT_EQ(def.fit.tpr, 0.95);
  EXPECT_EQ(def.cost.t_hi, 250.0);
  EXPECT_FALSE(def.budget.has_value());
  const auto c = parse_run_config(
      "# comment\nbackend = knn\nk=25\n tpr=0.9 # trailing\nbudget=50\ncoverage=0.5, 1\nrandom_pool=ua\n"
      "tau_au_source=training\n");
  EXPECT_EQ(c.fit.distance.backend, Backend::knn);
  EXPECT_EQ(c.fit.distance.k, 25u);
  EXPECT_EQ(c.fit.tpr, 0.9);
  EXPECT_EQ(c.budget, std::optional<double>(50.0));
  EXPECT_EQ(c.coverage, (std::vector<double>{0.5, 1.0}));
  EXPECT_EQ(c.random_pool, RandomPool::ua);
  EXPECT_EQ(c.fit.tau_au_source, TauAuSource::training);
}

TEST(RunConfigText, RejectsUnknownDuplicateAndMalformed) {
  EXPECT_EQ(code_of([] { parse_run_config("tpr_typo=0.9\n"); }), ErrorCode::validation);
  EXPECT_EQ(code_of([] { parse_run_config("k=3\nk=4\n"); }), ErrorCode::validation);
  EXPECT_EQ(code_of([] { parse_run_config("k\n"); }), ErrorCode::validation);
  EXPECT_EQ(code_of([] { parse_run_config("k=3x\n"); }), ErrorCode::validation);
  EXPECT_EQ(code_of([] { parse_run_config("tpr=1.5\n"); }), ErrorCode::validation);
  EXPECT_EQ(code_of([] { parse_run_config("t_hi=0.5\n"); }), ErrorCode::validation);
}

TEST(SynthConfigText, ParsesAndValidates) {
  const auto s = parse_synth_config("n_samples=100\nsep_li=4\nseed=9\n");
  EXPECT_EQ(s.n_samples, 100u);
  EXPECT_EQ(s.sep_li, 4.0);
  EXPECT_EQ(s.seed, 9u);
  EXPECT_THROW(parse_synth_config("ue_shift=2\n"), Error);
}

TEST(TextFormats, TruthRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "adaptau_text_truth";
  std::filesystem::create_directories(dir);
  const TruthTable t{{0, 3, 1}, std::vector<DynamicTag>{DynamicTag::C, DynamicTag::UAI, DynamicTag::UE}};
  write_truth(t, dir / "t.txt");
  const auto back = read_truth(dir / "t.txt");
  EXPECT_EQ(back.labels, t.labels);
  EXPECT_EQ(back.planted, t.planted);
  EXPECT_THROW(parse_truth("1 0\n"), Error);
  std::filesystem::remove_all(dir);
}

TEST(TextFormats, TagsPlanAndProvenanceRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "adaptau_text_misc";
  std::filesystem::create_directories(dir);
  std::vector<SampleAssessment> tags(3);
  tags[0].li_static = {StaticTag::UA, 0.123456789012345678, 0.5};
  tags[0].dynamic = {DynamicTag::UAR, LabelSource::surrogate, 1.0 / 3.0, 2.0 / 3.0};
  tags[0].entropy = 0.5;
  tags[1].li_static = {StaticTag::UE, 9.75, std::nullopt};
  tags[1].dynamic = {DynamicTag::UE, LabelSource::surrogate, std::nullopt, std::nullopt};
  tags[1].entropy = 0.01;
  tags[2].dynamic.source = LabelSource::oracle;
  write_tags(tags, dir / "tags.txt");
  const auto tb = read_tags(dir / "tags.txt");
  ASSERT_EQ(tb.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(tb[i].li_static.tag, tags[i].li_static.tag);
    EXPECT_EQ(tb[i].li_static.eu_score, tags[i].li_static.eu_score);
    EXPECT_EQ(tb[i].li_static.au_score, tags[i].li_static.au_score);
    EXPECT_EQ(tb[i].dynamic.tag, tags[i].dynamic.tag);
    EXPECT_EQ(tb[i].dynamic.source, tags[i].dynamic.source);
    EXPECT_EQ(tb[i].dynamic.d_uar, tags[i].dynamic.d_uar);
    EXPECT_EQ(tb[i].dynamic.d_uai, tags[i].dynamic.d_uai);
    EXPECT_EQ(tb[i].entropy, tags[i].entropy);
  }

  PlanFile plan{"finegrained", {}};
  plan.plan.selected = {4, 0, 9};
  plan.plan.ranking_scores = {0.1, 0.2, 0.30000000000000004};
  plan.plan.budget = 12.5;
  plan.plan.n_total = 10;
  plan.plan.realized_cost = 76.0;
  write_plan(plan, dir / "plan.txt");
  const auto pb = read_plan(dir / "plan.txt");
  EXPECT_EQ(pb.policy, "finegrained");
  EXPECT_EQ(pb.plan.selected, plan.plan.selected);
  EXPECT_EQ(pb.plan.ranking_scores, plan.plan.ranking_scores);
  EXPECT_EQ(pb.plan.budget, plan.plan.budget);
  EXPECT_EQ(pb.plan.realized_cost, 76.0);
  EXPECT_EQ(pb.plan.status, PlanStatus::ok);
  EXPECT_EQ(code_of([] { parse_plan("# index score\n1 0.5\n"); }), ErrorCode::missing_field);

  const std::vector<ProvenanceRow> prov{{Domain::LI, StaticTag::C, 0.5}, {Domain::HI, StaticTag::UA, 2.25}};
  write_provenance(prov, dir / "p.prov");
  const auto vb = read_provenance(dir / "p.prov");
  ASSERT_EQ(vb.size(), 2u);
  EXPECT_EQ(vb[1].domain, Domain::HI);
  EXPECT_EQ(vb[1].tag, StaticTag::UA);
  EXPECT_EQ(vb[1].eu, 2.25);
  std::filesystem::remove_all(dir);
}
