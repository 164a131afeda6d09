#include <gtest/gtest.h>

#include "helio/error.hpp"
#include "helio/time.hpp"

using helio::Timestamp;
using namespace std::chrono;

TEST(Timestamp, ParsesOffsetsAndZulu) {
  const auto a = Timestamp::parse("2017-06-21T12:00:00-07:00");
  const auto b = Timestamp::parse("2017-06-21T19:00Z");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.offset(), minutes(-420));
  EXPECT_EQ(b.offset(), minutes(0));
  EXPECT_EQ(a.to_string(), "2017-06-21T12:00:00-07:00");
  EXPECT_EQ(b.to_string(), "2017-06-21T19:00:00+00:00");
}

TEST(Timestamp, SpaceSeparatorAndLocalFields) {
  const auto t = Timestamp::parse("2017-01-01 00:30:15+05:30");
  EXPECT_EQ(t.local_date(), "2017-01-01");
  EXPECT_EQ(t.local_year(), 2017);
  EXPECT_EQ(t.utc_year(), 2016);
  EXPECT_EQ(t.local_minute_of_day(), 30);
  EXPECT_EQ(t.unix_seconds(), 1483210815);
}

TEST(Timestamp, FromLocalMatchesParse) {
  EXPECT_EQ(Timestamp::from_local(2019, 12, 21, 23, 30, 0, -480), Timestamp::parse("2019-12-21T23:30:00-08:00"));
}

TEST(Timestamp, Arithmetic) {
  const auto t = Timestamp::parse("2017-03-01T23:59:00-08:00");
  const auto u = t + minutes(2);
  EXPECT_EQ(u.to_string(), "2017-03-02T00:01:00-08:00");
  EXPECT_EQ(u - t, seconds(120));
  EXPECT_LT(t, u);
  EXPECT_EQ(t.with_offset(minutes(0)).to_string(), "2017-03-02T07:59:00+00:00");
}

TEST(Timestamp, RejectsMalformed) {
  for (const char* s : {"", "2017-06-21", "2017-06-21T12:00", "2017-13-01T00:00Z", "2017-02-30T00:00Z",
                        "2017-06-21T25:00Z", "2017-06-21T12:00+7", "2017-06-21T12:00Zjunk"}) {
    EXPECT_THROW(Timestamp::parse(s), helio::UsageError) << s;
  }
}
