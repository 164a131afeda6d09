#include "helio/time.hpp"

#include <charconv>
#include <cstdio>

#include "helio/error.hpp"

namespace helio {

namespace {

using namespace std::chrono;

int parse_int(std::string_view text, std::size_t pos, std::size_t len) {
  if (pos + len > text.size()) throw UsageError("truncated timestamp: '" + std::string(text) + "'");
  int value = 0;
  const char* first = text.data() + pos;
  auto [ptr, ec] = std::from_chars(first, first + len, value);
  if (ec != std::errc{} || ptr != first + len) {
    throw UsageError("malformed timestamp: '" + std::string(text) + "'");
  }
  return value;
}

void expect(std::string_view text, std::size_t pos, char c) {
  if (pos >= text.size() || text[pos] != c) {
    throw UsageError("malformed timestamp: '" + std::string(text) + "'");
  }
}

}  // namespace

Timestamp Timestamp::from_local(int year, unsigned month, unsigned day, int hour, int minute, int second,
                                int offset_minutes) {
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month}, std::chrono::day{day}};
  if (!ymd.ok()) throw UsageError("invalid calendar date");
  if (hour < 0 || hour > 23 || minute < 0 || minute > 59 || second < 0 || second > 60) {
    throw UsageError("invalid time of day");
  }
  const sys_seconds local = sys_days{ymd} + hours{hour} + minutes{minute} + seconds{second};
  const minutes offset{offset_minutes};
  return Timestamp{local - offset, offset};
}

Timestamp Timestamp::parse(std::string_view text) {
  const int y = parse_int(text, 0, 4);
  expect(text, 4, '-');
  const int mo = parse_int(text, 5, 2);
  expect(text, 7, '-');
  const int d = parse_int(text, 8, 2);
  if (text.size() <= 10 || (text[10] != 'T' && text[10] != ' ')) {
    throw UsageError("malformed timestamp: '" + std::string(text) + "'");
  }
  const int h = parse_int(text, 11, 2);
  expect(text, 13, ':');
  const int mi = parse_int(text, 14, 2);
  std::size_t pos = 16;
  int s = 0;
  if (pos < text.size() && text[pos] == ':') {
    s = parse_int(text, pos + 1, 2);
    pos += 3;
  }
  if (pos >= text.size()) throw UsageError("timestamp lacks a UTC offset: '" + std::string(text) + "'");
  int offset = 0;
  if (text[pos] == 'Z') {
    ++pos;
  } else if (text[pos] == '+' || text[pos] == '-') {
    const int sign = text[pos] == '-' ? -1 : 1;
    const int oh = parse_int(text, pos + 1, 2);
    expect(text, pos + 3, ':');
    const int om = parse_int(text, pos + 4, 2);
    offset = sign * (oh * 60 + om);
    pos += 6;
  } else {
    throw UsageError("malformed timestamp offset: '" + std::string(text) + "'");
  }
  if (pos != text.size()) throw UsageError("trailing characters in timestamp: '" + std::string(text) + "'");
  return from_local(y, static_cast<unsigned>(mo), static_cast<unsigned>(d), h, mi, s, offset);
}

std::string Timestamp::local_date() const {
  const year_month_day ymd{floor<days>(local())};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int Timestamp::local_year() const {
  return static_cast<int>(year_month_day{floor<days>(local())}.year());
}

int Timestamp::utc_year() const {
  return static_cast<int>(year_month_day{floor<days>(utc_)}.year());
}

int Timestamp::local_minute_of_day() const {
  const auto l = local();
  return static_cast<int>(duration_cast<minutes>(l - floor<days>(l)).count());
}

std::string Timestamp::to_string() const {
  const auto l = local();
  const auto day = floor<days>(l);
  const year_month_day ymd{day};
  const hh_mm_ss tod{l - day};
  const auto off = offset_.count();
  const auto aoff = off < 0 ? -off : off;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d%c%02d:%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                static_cast<int>(tod.hours().count()), static_cast<int>(tod.minutes().count()),
                static_cast<int>(tod.seconds().count()), off < 0 ? '-' : '+', static_cast<int>(aoff / 60),
                static_cast<int>(aoff % 60));
  return buf;
}

}  // namespace helio
