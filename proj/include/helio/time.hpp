// Civil timestamps with an explicit UTC offset.
#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

namespace helio {

/// An instant plus the UTC offset it was recorded in.
///
/// Ordering and equality compare instants only, so 12:00-08:00 equals
/// 20:00Z. Formatting renders the local wall clock with its offset.
class Timestamp {
 public:
  using Seconds = std::chrono::sys_seconds;

  Timestamp() = default;
  Timestamp(Seconds utc, std::chrono::minutes offset) : utc_(utc), offset_(offset) {}

  /// Builds from local wall-clock fields and the zone offset in minutes.
  static Timestamp from_local(int year, unsigned month, unsigned day, int hour, int minute, int second,
                              int offset_minutes);

  /// Parses "YYYY-MM-DDTHH:MM[:SS](Z|±HH:MM)". A space may replace 'T'.
  static Timestamp parse(std::string_view text);

  Seconds utc() const { return utc_; }
  std::chrono::minutes offset() const { return offset_; }
  std::int64_t unix_seconds() const { return utc_.time_since_epoch().count(); }

  /// Local wall-clock time as seconds since the local epoch.
  std::chrono::sys_seconds local() const { return utc_ + offset_; }
  /// Local calendar date "YYYY-MM-DD".
  std::string local_date() const;
  int local_year() const;
  int utc_year() const;
  /// Minutes after local midnight.
  int local_minute_of_day() const;

  /// Same instant, expressed in another offset.
  Timestamp with_offset(std::chrono::minutes offset) const { return {utc_, offset}; }

  Timestamp operator+(std::chrono::seconds d) const { return {utc_ + d, offset_}; }
  Timestamp operator-(std::chrono::seconds d) const { return {utc_ - d, offset_}; }
  std::chrono::seconds operator-(const Timestamp& other) const { return utc_ - other.utc_; }

  friend bool operator==(const Timestamp& a, const Timestamp& b) { return a.utc_ == b.utc_; }
  friend std::strong_ordering operator<=>(const Timestamp& a, const Timestamp& b) {
    return a.utc_ <=> b.utc_;
  }

  std::string to_string() const;

 private:
  Seconds utc_{};
  std::chrono::minutes offset_{0};
};

}  // namespace helio
