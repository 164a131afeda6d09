#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "helio/dataset.hpp"
#include "helio/error.hpp"

using namespace helio;
using namespace helio::data;
using std::chrono::minutes;

namespace {

constexpr int kOffset = -480;

Timestamp local(int day, int hour, int minute) { return Timestamp::from_local(2017, 5, day, hour, minute, 0, kOffset); }

/// One entry per minute over [first, last] local time on each listed day.
CorpusIndex minute_corpus(std::initializer_list<int> days, int first_minute, int last_minute,
                          std::initializer_list<int> skip = {}) {
  CorpusIndex c;
  for (int d : days) {
    c.set_label(local(d, 0, 0).local_date(), d % 2 ? DayLabel::sunny : DayLabel::cloudy);
    for (int m = first_minute; m <= last_minute; ++m) {
      if (std::find(skip.begin(), skip.end(), m) != skip.end()) continue;
      c.add({local(d, 0, 0) + minutes(m), 0.01 * m, "images/x.htns", static_cast<std::size_t>(m)});
    }
  }
  return c;
}

}  // namespace

TEST(DayLabels, ParseAndRoundTrip) {
  EXPECT_EQ(parse_day_label("sunny"), DayLabel::sunny);
  EXPECT_EQ(parse_day_label("cloudy"), DayLabel::cloudy);
  EXPECT_THROW(parse_day_label("overcast"), UsageError);
  DayLabels labels{{"2017-05-01", DayLabel::sunny}, {"2017-05-02", DayLabel::cloudy}};
  std::stringstream s;
  write_day_labels(s, labels);
  EXPECT_EQ(read_day_labels(s), labels);
  std::istringstream bad("date,kind\n");
  EXPECT_THROW(read_day_labels(bad), IoError);
}

TEST(CorpusIndex, RejectsDisorderAndNegativePower) {
  CorpusIndex c;
  c.add({local(1, 6, 0), 1.0, "a", 0});
  EXPECT_THROW(c.add({local(1, 6, 0), 1.0, "a", 1}), IntegrityError);
  EXPECT_THROW(c.add({local(1, 5, 0), 1.0, "a", 1}), IntegrityError);
  EXPECT_THROW(c.add({local(1, 6, 1), -0.1, "a", 1}), IntegrityError);
}

TEST(CorpusIndex, CsvRoundTrip) {
  auto c = minute_corpus({1, 2}, 360, 370);
  std::stringstream s;
  c.write_csv(s);
  auto back = CorpusIndex::read_csv(s);
  ASSERT_EQ(back.size(), c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    EXPECT_EQ(back.entries()[i].time, c.entries()[i].time);
    EXPECT_EQ(back.entries()[i].time.offset(), c.entries()[i].time.offset());
    EXPECT_EQ(back.entries()[i].pv_kw, c.entries()[i].pv_kw);
    EXPECT_EQ(back.entries()[i].tensor_file, c.entries()[i].tensor_file);
    EXPECT_EQ(back.entries()[i].frame_index, c.entries()[i].frame_index);
  }
  EXPECT_EQ(back.labels(), c.labels());
  EXPECT_EQ(back.days(), (std::vector<std::string>{"2017-05-01", "2017-05-02"}));
}

TEST(CorpusIndex, RejectsBadHeader) {
  std::istringstream in("time,pv\n");
  EXPECT_THROW(CorpusIndex::read_csv(in), IoError);
}

TEST(CorpusMeta, JsonRoundTrip) {
  CorpusMeta m;
  m.utc_offset_minutes = 60;
  auto back = CorpusMeta::from_json(m.to_json());
  EXPECT_EQ(back.utc_offset_minutes, 60);
  EXPECT_EQ(back.site.latitude, m.site.latitude);
  EXPECT_EQ(back.site.camera_azimuth, m.site.camera_azimuth);
  EXPECT_THROW(CorpusMeta::from_json("{"), IoError);
}

TEST(ImageStore, WritesAndServesFrames) {
  const auto dir = std::filesystem::temp_directory_path() / "helio_image_store";
  std::filesystem::create_directories(dir / "images");
  Tensor<std::uint8_t> stack({2, 3, 64, 64});
  for (std::size_t i = 0; i < stack.size(); ++i) stack.raw()[i] = static_cast<std::uint8_t>(i % 251);
  ImageStore::write_day((dir / "images" / "d.htns").string(), stack);
  CorpusIndex c;
  c.add({local(1, 6, 0), 0.0, "images/d.htns", 0});
  c.add({local(1, 6, 1), 0.0, "images/d.htns", 1});
  ImageStore store(dir.string());
  EXPECT_THROW(store.image(c.entries()[0]), StateError);
  store.load_all(c);
  auto second = store.image(c.entries()[1]);
  ASSERT_EQ(second.size(), kImageBytes);
  EXPECT_TRUE(std::equal(second.begin(), second.end(), stack.raw() + kImageBytes));
  std::filesystem::remove_all(dir);
}

TEST(NowcastSplit, ThousandSamplesAtNinetySixPercent) {
  CorpusIndex c;
  for (int i = 0; i < 1000; ++i) c.add({local(1, 0, 0) + minutes(i), 1.0, "x", 0});
  auto s = build_nowcast(c, 0.96, {});
  EXPECT_EQ(s.train.size(), 960u);
  EXPECT_EQ(s.test.size(), 40u);
  EXPECT_LT(s.train.back().time, s.test.front().time);
}

TEST(NowcastSplit, FractionOutOfRangeThrows) {
  auto c = minute_corpus({1}, 360, 400);
  EXPECT_THROW(build_nowcast(c, 1.0, {}), RangeError);
  EXPECT_THROW(build_nowcast(c, 0.0, {}), RangeError);
  CorpusIndex one;
  one.add({local(1, 6, 0), 1.0, "x", 0});
  EXPECT_THROW(build_nowcast(one, 0.5, {}), RangeError);
}

TEST(NowcastSplit, EvalDaysGoToTest) {
  auto c = minute_corpus({1, 2, 3}, 360, 419);
  DayLabels eval{{"2017-05-01", DayLabel::cloudy}};
  auto s = build_nowcast(c, 0.5, eval);
  for (const auto& x : s.train) EXPECT_NE(x.time.local_date(), "2017-05-01");
  const auto on_eval = std::count_if(s.test.begin(), s.test.end(),
                                     [](const Sample& x) { return x.time.local_date() == "2017-05-01"; });
  EXPECT_EQ(on_eval, 60);
  EXPECT_EQ(s.train.size(), 90u);
  EXPECT_EQ(s.train.size() + s.test.size(), c.size());
}

TEST(NowcastSplit, FeaturesAndTargets) {
  auto c = minute_corpus({1}, 360, 369);
  auto s = build_nowcast(c, 0.5, {}, [](const Timestamp& t) {
    return std::vector<double>{static_cast<double>(t.local_minute_of_day())};
  });
  ASSERT_EQ(s.train.size(), 5u);
  EXPECT_EQ(s.train[2].features, std::vector<double>{362.0});
  EXPECT_DOUBLE_EQ(s.train[2].target_kw, 3.62);
}

TEST(DaySequences, TwoHourDayGivesFortySixAnchors) {
  auto c = minute_corpus({1}, 360, 480);
  auto seq = day_sequences(c, "2017-05-01");
  ASSERT_EQ(seq.size(), 46u);
  EXPECT_EQ(seq.front().anchor, local(1, 6, 15));
  EXPECT_EQ(seq.back().anchor, local(1, 7, 45));
  const auto& first = seq.front();
  ASSERT_EQ(first.frames.size(), 16u);
  EXPECT_EQ(c.entries()[first.frames.front()].time, local(1, 6, 0));
  EXPECT_EQ(c.entries()[first.frames.back()].time, local(1, 6, 15));
  EXPECT_EQ(first.target_time, local(1, 6, 30));
  EXPECT_DOUBLE_EQ(first.target_kw, 3.90);
  ASSERT_EQ(first.pv_history.size(), 16u);
  EXPECT_DOUBLE_EQ(first.pv_history.front(), 3.60);
  EXPECT_DOUBLE_EQ(first.pv_history.back(), 3.75);
}

TEST(DaySequences, GapDropsAffectedWindows) {
  // Minutes 400..402 missing: frames or targets touching them are unavailable.
  auto c = minute_corpus({1}, 360, 480, {400, 401, 402});
  auto seq = day_sequences(c, "2017-05-01");
  for (const auto& s : seq) {
    const int a = s.anchor.local_minute_of_day();
    const bool frames_hit = a - 15 <= 402 && a >= 400;
    const bool target_hit = a + 15 >= 400 && a + 15 <= 402;
    EXPECT_FALSE(frames_hit || target_hit) << "anchor " << a;
  }
  // Complete day: 46 anchors at 375, 377, ..., 465. Affected ones: frames
  // covering 400..402 (anchors 401..417) and targets at 400..402 (anchors 385..387).
  int expected = 0;
  for (int a = 375; a <= 465; a += 2) {
    if (!((a >= 400 && a <= 417) || (a >= 385 && a <= 387))) ++expected;
  }
  EXPECT_EQ(static_cast<int>(seq.size()), expected);
}

TEST(DaySequences, ShortOrUnknownDay) {
  auto c = minute_corpus({1}, 360, 380);
  EXPECT_TRUE(day_sequences(c, "2017-05-01").empty());
  EXPECT_TRUE(day_sequences(c, "2017-06-01").empty());
}

TEST(ForecastSplit, NoTrainingWindowOverlapsTest) {
  auto c = minute_corpus({1, 2, 3}, 360, 540);
  DayLabels eval{{"2017-05-02", DayLabel::cloudy}};
  auto s = build_forecast(c, 0.6, eval);
  ASSERT_FALSE(s.train.empty());
  ASSERT_FALSE(s.test.empty());
  for (const auto& x : s.train) {
    EXPECT_NE(x.anchor.local_date(), "2017-05-02");
    const Timestamp lo = c.entries()[x.frames.front()].time;
    for (const auto& y : s.test) {
      const Timestamp ylo = c.entries()[y.frames.front()].time;
      EXPECT_TRUE(x.target_time < ylo || y.target_time < lo);
    }
  }
  for (const auto& y : s.test) {
    if (y.anchor.local_date() == "2017-05-02") continue;
    EXPECT_EQ(y.anchor.local_date(), "2017-05-03");
  }
}

TEST(ForecastSplit, FeatureAndSourceLayout) {
  auto c = minute_corpus({1}, 360, 600);
  auto s = build_forecast(c, 0.5, {}, [](const Timestamp&) { return std::vector<double>{7.0, 8.0}; });
  ASSERT_FALSE(s.train.empty());
  EXPECT_EQ(s.train.front().features, (std::vector<double>{7.0, 8.0}));
}

TEST(NowcastSplit, FullSizeMirror) {
  CorpusIndex c;
  const Timestamp t0 = local(1, 0, 0);
  for (int i = 0; i < 363375; ++i) c.add({t0 + minutes(i), 0.0, "x", 0});
  auto s = build_nowcast(c, 0.96, {});
  EXPECT_EQ(s.train.size(), 348840u);
  EXPECT_EQ(s.test.size(), 363375u - 348840u);
}
