#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "helio/error.hpp"
#include "helio/met_csv.hpp"
#include "helio/metpipe.hpp"
#include "met_oracle.hpp"

using namespace helio;
using namespace helio::met;
using std::chrono::hours;
using std::chrono::minutes;

namespace {

Timestamp at(const char* s) { return Timestamp::parse(s); }

MetRow quad_row(const Timestamp& t, double v) { return {t, {v, v, v, v}, std::nullopt}; }

MetRow forecast_row(const Timestamp& base, int step, double v) {
  return {base, {v, v, v, v}, ForecastOrigin{base, step}};
}

std::vector<Timestamp> minute_grid(const Timestamp& start, int count, int step_minutes = 1) {
  std::vector<Timestamp> g;
  for (int i = 0; i < count; ++i) g.push_back(start + minutes(i * step_minutes));
  return g;
}

}  // namespace

TEST(Catalogue, MatchesVariableTable) {
  const std::vector<std::string> codes{"tcc", "i10fg", "100u", "100v", "sp", "strd", "ssrd", "str", "tsr", "fdir"};
  ASSERT_EQ(catalogue().size(), codes.size());
  for (std::size_t i = 0; i < codes.size(); ++i) {
    const auto& v = catalogue()[i];
    EXPECT_EQ(v.code, codes[i]);
    if (v.kind == Kind::accumulative) {
      EXPECT_EQ(v.source, Source::forecast);
      EXPECT_TRUE(v.has_step);
    }
  }
  for (const char* acc : {"strd", "ssrd", "str", "tsr", "fdir"}) EXPECT_EQ(lookup(acc).kind, Kind::accumulative);
  for (const char* inst : {"tcc", "100u", "100v", "sp"}) EXPECT_EQ(lookup(inst).source, Source::analysis);
  EXPECT_EQ(lookup("i10fg").source, Source::forecast);
  EXPECT_EQ(lookup("i10fg").kind, Kind::instantaneous);
  EXPECT_THROW(lookup("t2m"), UsageError);
}

TEST(ReconstructTimestamps, AddsStep) {
  const auto base = at("2017-05-01T06:00Z");
  MetSeries s{lookup("i10fg"), {forecast_row(base, 1, 1.0), forecast_row(base, 2, 2.0)}};
  const auto r = reconstruct_timestamps(s);
  ASSERT_EQ(r.rows.size(), 2u);
  EXPECT_EQ(r.rows[0].time, at("2017-05-01T07:00Z"));
  EXPECT_EQ(r.rows[1].time, at("2017-05-01T08:00Z"));
}

TEST(ReconstructTimestamps, TwoRunsAreContiguous) {
  const auto b1 = at("2017-05-01T06:00Z");
  const auto b2 = at("2017-05-01T18:00Z");
  MetSeries s{lookup("i10fg"), {}};
  for (int k = 12; k >= 1; --k) s.rows.push_back(forecast_row(b2, k, k));
  for (int k = 1; k <= 12; ++k) s.rows.push_back(forecast_row(b1, k, k));
  const auto r = reconstruct_timestamps(s);
  ASSERT_EQ(r.rows.size(), 24u);
  std::set<std::int64_t> expected;
  for (const auto& b : {b1, b2})
    for (int k = 1; k <= 12; ++k) expected.insert((b + hours(k)).unix_seconds());
  std::size_t i = 0;
  for (auto secs : expected) EXPECT_EQ(r.rows[i++].time.unix_seconds(), secs);
  for (std::size_t j = 1; j < r.rows.size(); ++j) EXPECT_EQ(r.rows[j].time - r.rows[j - 1].time, hours(1));
}

TEST(ReconstructTimestamps, DuplicateIsIntegrityError) {
  const auto base = at("2017-05-01T06:00Z");
  MetSeries s{lookup("i10fg"), {forecast_row(base, 1, 1.0), forecast_row(base, 1, 2.0)}};
  try {
    reconstruct_timestamps(s);
    FAIL();
  } catch (const IntegrityError& e) {
    EXPECT_NE(std::string(e.what()).find("2017-05-01T07:00:00"), std::string::npos) << e.what();
  }
}

TEST(CumulativeToRate, Examples) {
  const auto base = at("2017-05-01T06:00Z");
  auto s = reconstruct_timestamps(
      {lookup("ssrd"), {forecast_row(base, 1, 3.6e6), forecast_row(base, 2, 1.08e7), forecast_row(base, 3, 1.44e7)}});
  auto r = cumulative_to_rate(s);
  ASSERT_EQ(r.rows.size(), 3u);
  EXPECT_NEAR(r.rows[0].values[0], 1000.0, 1e-9);
  EXPECT_NEAR(r.rows[1].values[1], 2000.0, 1e-9);
  EXPECT_NEAR(r.rows[2].values[3], 1000.0, 1e-9);

  r = cumulative_to_rate(reconstruct_timestamps({lookup("ssrd"), {forecast_row(base, 1, 5e6), forecast_row(base, 2, 5e6)}}));
  EXPECT_DOUBLE_EQ(r.rows[0].values[0], 5e6 / 3600.0);
  EXPECT_EQ(r.rows[1].values[0], 0.0);
}

TEST(CumulativeToRate, ResetsPerRun) {
  const auto b1 = at("2017-05-01T06:00Z");
  const auto b2 = at("2017-05-01T18:00Z");
  MetSeries s{lookup("strd"),
              {forecast_row(b1, 1, 4e6), forecast_row(b1, 2, 9e6), forecast_row(b2, 1, 1e6), forecast_row(b2, 2, 3e6)}};
  const auto r = cumulative_to_rate(reconstruct_timestamps(s));
  ASSERT_EQ(r.rows.size(), 4u);
  EXPECT_DOUBLE_EQ(r.rows[2].values[0], 1e6 / 3600.0);
  EXPECT_DOUBLE_EQ(r.rows[3].values[0], 2e6 / 3600.0);
}

TEST(CumulativeToRate, NegativeIncrementIsIntegrityError) {
  const auto base = at("2017-05-01T06:00Z");
  MetSeries s{lookup("ssrd"), {forecast_row(base, 1, 5e6), forecast_row(base, 2, 4e6)}};
  EXPECT_THROW(cumulative_to_rate(reconstruct_timestamps(s)), IntegrityError);
  // Rounding-level dips are tolerated.
  MetSeries t{lookup("ssrd"), {forecast_row(base, 1, 5e6), forecast_row(base, 2, 5e6 - 1.0)}};
  EXPECT_NO_THROW(cumulative_to_rate(reconstruct_timestamps(t)));
}

TEST(CumulativeToRate, PreservesRunTotalsAndMatchesOracle) {
  Rng rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = reconstruct_timestamps(oracle::random_accumulation(rng, 3, 12, at("2017-05-01T06:00Z")));
    const auto r = cumulative_to_rate(s);
    const auto ref = oracle::rates(s);
    ASSERT_EQ(r.rows.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i)
      for (int g = 0; g < 4; ++g) EXPECT_NEAR(r.rows[i].values[g], ref[i][g], 1e-9 * std::abs(ref[i][g]));
    for (int run = 0; run < 3; ++run) {
      for (int g = 0; g < 4; ++g) {
        double total = 0.0;
        for (int k = 0; k < 12; ++k) total += r.rows[run * 12 + k].values[g] * 3600.0;
        const double final_acc = s.rows[run * 12 + 11].values[g];
        EXPECT_NEAR(total, final_acc, 1e-9 * final_acc);
      }
    }
  }
}

TEST(AlignToMinutes, SinglePointFill) {
  MetSeries s{lookup("tcc"), {quad_row(at("2017-05-01T07:00Z"), 5.0)}};
  const auto grid = minute_grid(at("2017-05-01T06:58Z"), 3, 2);
  const auto a = align_to_minutes(s, grid, AlignMode::fill);
  ASSERT_EQ(a.rows.size(), 3u);
  for (const auto& row : a.rows) EXPECT_EQ(row.values[0], 5.0);
}

TEST(AlignToMinutes, InterpolatesAndClamps) {
  MetSeries s{lookup("ssrd"), {quad_row(at("2017-05-01T07:00Z"), 0.0), quad_row(at("2017-05-01T08:00Z"), 60.0)}};
  const std::vector<Timestamp> mid{at("2017-05-01T07:30Z")};
  EXPECT_EQ(align_to_minutes(s, mid, AlignMode::interpolate).rows[0].values[1], 30.0);
  const std::vector<Timestamp> outside{at("2017-05-01T06:30Z"), at("2017-05-01T08:30Z")};
  const auto a = align_to_minutes(s, outside, AlignMode::interpolate);
  EXPECT_EQ(a.rows[0].values[0], 0.0);
  EXPECT_EQ(a.rows[1].values[0], 60.0);
}

TEST(AlignToMinutes, Errors) {
  const auto grid = minute_grid(at("2017-05-01T07:00Z"), 3);
  EXPECT_THROW(align_to_minutes({lookup("tcc"), {}}, grid, AlignMode::fill), IntegrityError);
  MetSeries s{lookup("tcc"), {quad_row(at("2017-05-01T07:00Z"), 5.0)}};
  const std::vector<Timestamp> bad{at("2017-05-01T07:01Z"), at("2017-05-01T07:00Z")};
  EXPECT_THROW(align_to_minutes(s, bad, AlignMode::fill), IntegrityError);
}

TEST(AlignToMinutes, MatchesBruteForceAndGridExactly) {
  Rng rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const auto s = oracle::random_instantaneous(rng, 8, at("2017-05-01T05:00Z"), false);
    const auto grid = minute_grid(at("2017-05-01T04:30Z"), 600);
    for (auto mode : {AlignMode::fill, AlignMode::interpolate}) {
      const auto a = align_to_minutes(s, grid, mode);
      ASSERT_EQ(a.rows.size(), grid.size());
      for (std::size_t i = 0; i < grid.size(); ++i) {
        EXPECT_EQ(a.rows[i].time, grid[i]);
        for (int g = 0; g < 4; ++g) {
          const double ref = mode == AlignMode::fill ? oracle::fill_at(s, grid[i], g)
                                                     : oracle::interpolate_at(s, grid[i], g);
          EXPECT_NEAR(a.rows[i].values[g], ref, 1e-12);
        }
      }
    }
  }
}

TEST(AlignmentFor, VariableClasses) {
  EXPECT_EQ(alignment_for(lookup("tcc")), AlignMode::fill);
  EXPECT_EQ(alignment_for(lookup("i10fg")), AlignMode::fill);
  EXPECT_EQ(alignment_for(lookup("fdir")), AlignMode::interpolate);
}

TEST(NormStats, ConstantFloorsStdToOne) {
  const auto t0 = at("2017-05-01T07:00Z");
  MetSeries s{lookup("tcc"), {quad_row(t0, 2.0), quad_row(t0 + hours(1), 2.0), quad_row(t0 + hours(2), 2.0)}};
  const auto st = fit_norm_stats(s, {true, true, true});
  EXPECT_EQ(st.at("tcc")[0].mean, 2.0);
  EXPECT_EQ(st.at("tcc")[0].std, 1.0);
  EXPECT_EQ(normalize(s, st).rows[1].values[3], 0.0);
}

TEST(NormStats, TwoValues) {
  const auto t0 = at("2017-05-01T07:00Z");
  MetSeries s{lookup("tcc"), {quad_row(t0, 0.0), quad_row(t0 + hours(1), 2.0)}};
  const auto st = fit_norm_stats(s, {true, true});
  EXPECT_EQ(st.at("tcc")[2].mean, 1.0);
  EXPECT_EQ(st.at("tcc")[2].std, 1.0);
  const auto n = normalize(s, st);
  EXPECT_EQ(n.rows[0].values[0], -1.0);
  EXPECT_EQ(n.rows[1].values[0], 1.0);
}

TEST(NormStats, NeedsTwoMaskedRows) {
  const auto t0 = at("2017-05-01T07:00Z");
  MetSeries s{lookup("tcc"), {quad_row(t0, 0.0), quad_row(t0 + hours(1), 2.0)}};
  EXPECT_THROW(fit_norm_stats(s, {true, false}), RangeError);
  EXPECT_THROW(fit_norm_stats(s, {true}), ShapeError);
}

TEST(NormStats, MaskMatchesBruteForce) {
  Rng rng(43);
  const auto s = oracle::random_instantaneous(rng, 40, at("2017-05-01T05:00Z"), true);
  std::vector<bool> mask(40), all(40, true);
  for (int i = 0; i < 40; ++i) mask[i] = i < 30;
  const auto masked = fit_norm_stats(s, mask);
  const auto full = fit_norm_stats(s, all);
  for (int g = 0; g < 4; ++g) {
    const auto ref = oracle::mean_std(s, mask, g);
    EXPECT_NEAR(masked.at("tcc")[g].mean, ref.mean, 1e-12);
    EXPECT_NEAR(masked.at("tcc")[g].std, ref.std, 1e-12);
  }
  EXPECT_NE(masked.at("tcc")[0].mean, full.at("tcc")[0].mean);
  EXPECT_EQ(masked.at("tcc")[2].std, 1.0);
}

TEST(NormStats, NormalizedTrainingRowsAreStandard) {
  Rng rng(44);
  const auto s = oracle::random_instantaneous(rng, 50, at("2017-05-01T05:00Z"), false);
  std::vector<bool> mask(50);
  for (int i = 0; i < 50; ++i) mask[i] = i % 5 != 0;
  const auto n = normalize(s, fit_norm_stats(s, mask));
  for (int g = 0; g < 4; ++g) {
    double mean = 0, ss = 0;
    int count = 0;
    for (int i = 0; i < 50; ++i)
      if (mask[i]) mean += n.rows[i].values[g], ++count;
    mean /= count;
    for (int i = 0; i < 50; ++i)
      if (mask[i]) ss += std::pow(n.rows[i].values[g] - mean, 2);
    EXPECT_LT(std::abs(mean), 1e-9);
    EXPECT_NEAR(std::sqrt(ss / count), 1.0, 1e-9);
  }
}

TEST(NormStats, RoundTripAndJson) {
  Rng rng(45);
  const auto s = oracle::random_instantaneous(rng, 30, at("2017-05-01T05:00Z"), true);
  const auto st = fit_norm_stats(s, std::vector<bool>(30, true));
  const auto back = denormalize(normalize(s, st), st);
  for (std::size_t i = 0; i < s.rows.size(); ++i)
    for (int g = 0; g < 4; ++g) EXPECT_NEAR(back.rows[i].values[g], s.rows[i].values[g], 1e-12);
  const auto parsed = NormStats::from_json(st.to_json());
  for (int g = 0; g < 4; ++g) {
    EXPECT_EQ(parsed.at("tcc")[g].mean, st.at("tcc")[g].mean);
    EXPECT_EQ(parsed.at("tcc")[g].std, st.at("tcc")[g].std);
  }
  EXPECT_NE(st.to_json().find("\"NW\""), std::string::npos);
  EXPECT_THROW(normalize(s, NormStats{}), UsageError);
}

TEST(Features, Lengths) {
  EXPECT_EQ(FeatureSelection({{"tcc"}, false}).length(), 4u);
  EXPECT_EQ(FeatureSelection({{"i10fg", "Wind100"}, true}).length(), 14u);
  EXPECT_EQ(FeatureSelection({}).length(), 0u);
  EXPECT_EQ(FeatureSelection({}).label(), "MSUNSET");
  const auto sel = FeatureSelection::parse_label("+i10fg+Wind100+sun position+strd");
  EXPECT_EQ(sel.variables, (std::vector<std::string>{"i10fg", "Wind100", "strd"}));
  EXPECT_TRUE(sel.sun_position);
  EXPECT_EQ(sel.length(), 18u);
  EXPECT_THROW(FeatureSelection::parse_label("+t2m"), UsageError);
  EXPECT_THROW(FeatureSelection::parse_label("tcc"), UsageError);
}

TEST(Features, ExpandWind) {
  const std::vector<std::string> in{"Wind100", "tcc"};
  EXPECT_EQ(expand_variables(in), (std::vector<std::string>{"100u", "100v", "tcc"}));
}

TEST(Features, VectorOrderAndRange) {
  const auto t0 = at("2017-05-01T07:00Z");
  FeatureStore store;
  for (const char* code : {"i10fg", "100u", "100v"}) {
    MetSeries s{lookup(code), {}};
    const double base = code[0] == 'i' ? 10 : code[3] == 'u' ? 20 : 30;
    s.rows.push_back({t0, {base + 1, base + 2, base + 3, base + 4}, std::nullopt});
    store.add(s);
  }
  const auto v = store.build_feature_vector(FeatureSelection({{"i10fg", "Wind100"}, true}), t0,
                                            std::pair{0.25, 0.75});
  EXPECT_EQ(v, (std::vector<double>{11, 12, 13, 14, 21, 22, 23, 24, 31, 32, 33, 34, 0.25, 0.75}));
  EXPECT_TRUE(store.build_feature_vector({}, t0, std::nullopt).empty());
  EXPECT_THROW(store.build_feature_vector(FeatureSelection({{"i10fg"}, false}), t0 + minutes(1), std::nullopt),
               RangeError);
}

TEST(Preprocess, OutputGridEqualsRequestForEveryClass) {
  Rng rng(46);
  std::map<std::string, MetSeries> raw;
  raw["tcc"] = oracle::random_instantaneous(rng, 30, at("2017-05-01T00:00Z"), false);
  raw["ssrd"] = oracle::random_accumulation(rng, 3, 12, at("2017-04-30T18:00Z"));
  MetSeries gust{lookup("i10fg"), {}};
  for (int run = 0; run < 2; ++run)
    for (int k = 1; k <= 12; ++k) gust.rows.push_back(forecast_row(at("2017-05-01T06:00Z") + hours(12 * run), k, k));
  raw["i10fg"] = gust;
  const auto grid = minute_grid(at("2017-05-01T06:00Z"), 14 * 60);
  const std::vector<std::string> codes{"tcc", "ssrd", "i10fg"};
  const auto out = preprocess(raw, codes, grid, grid[500]);
  for (const auto& code : codes) {
    const auto& rows = out.normalized.at(code).rows;
    ASSERT_EQ(rows.size(), grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_EQ(rows[i].time, grid[i]);
    EXPECT_TRUE(out.stats.contains(code));
  }
}

TEST(MetCsv, RawRoundTrip) {
  Rng rng(47);
  std::map<std::string, MetSeries> raw;
  raw["tcc"] = oracle::random_instantaneous(rng, 5, at("2017-05-01T00:00Z"), false);
  raw["ssrd"] = oracle::random_accumulation(rng, 2, 3, at("2017-05-01T06:00Z"));
  std::stringstream ss;
  write_raw_csv(ss, raw);
  EXPECT_EQ(ss.str().substr(0, ss.str().find('\n')), kRawCsvHeader);
  const auto back = read_raw_csv(ss);
  ASSERT_EQ(back.size(), 2u);
  for (const auto& [code, s] : raw) {
    const auto& b = back.at(code);
    ASSERT_EQ(b.rows.size(), s.rows.size()) << code;
    for (std::size_t i = 0; i < s.rows.size(); ++i) {
      EXPECT_EQ(b.rows[i].values, s.rows[i].values);
      EXPECT_EQ(b.rows[i].origin.has_value(), s.rows[i].origin.has_value());
    }
  }
}

TEST(MetCsv, RejectsMissingGridPointAndUnknownVariable) {
  std::stringstream a(std::string(kRawCsvHeader) + "\n2017-05-01T00:00Z,,,tcc,NW,0.5\n");
  EXPECT_ANY_THROW(read_raw_csv(a));
  std::stringstream b(std::string(kRawCsvHeader) + "\n2017-05-01T00:00Z,,,t2m,NW,0.5\n");
  EXPECT_THROW(read_raw_csv(b), UsageError);
  std::stringstream c("time,value\n");
  EXPECT_ANY_THROW(read_raw_csv(c));
}
