// Seeded synthetic sky-image/PV corpus with matching meteorology.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "helio/dataset.hpp"
#include "helio/metpipe.hpp"
#include "helio/random.hpp"

namespace helio::synth {

/// `mixed` alternates sunny and cloudy days, starting sunny.
enum class Profile { sunny, cloudy, mixed };

Profile parse_profile(std::string_view name);

struct Options {
  int days = 1;
  Profile profile = Profile::sunny;
  std::uint64_t seed = 0;
  std::string start_date = "2017-05-01";  ///< first local day
  data::CorpusMeta meta;
  int first_minute = 6 * 60;   ///< local minute of day of the first frame
  int last_minute = 20 * 60;   ///< local minute of day of the last frame
  double peak_kw = 25.0;

  void validate() const;
};

/// One cloud passing the sun. Opacity has logistic edges at start and end.
struct CloudEvent {
  double start = 0.0;  ///< minutes from the first frame
  double end = 0.0;
  double depth = 0.0;  ///< peak opacity in (0, 0.8]
  double edge = 1.0;   ///< logistic edge scale, minutes
  double direction = 0.0;  ///< approach direction, radians

  double opacity(double minute) const;
};

/// Ground truth of one generated day.
struct Day {
  std::string date;
  data::DayLabel label = data::DayLabel::sunny;
  std::vector<Timestamp> times;
  std::vector<double> clear_kw;
  std::vector<double> transmission;  ///< in [0.2, 1]
  std::vector<double> pv_kw;
  std::vector<CloudEvent> events;
};

/// Clear-sky PV: peak * max(0, sin elevation) / max over the day.
std::vector<double> clear_sky_kw(const std::vector<Timestamp>& times, const ephemeris::GeoLocation& site,
                                 double peak_kw);

/// Cloud events for a cloudy day of `minutes` frames. The first event is a
/// deep, sharp-edged cloud near the brightest minute, so every cloudy day has
/// a ramp; the others never overlap it.
std::vector<CloudEvent> cloud_events(Rng& rng, std::size_t minutes, std::size_t noon_index);

Day make_day(const Options& options, int day_index);

/// Renders the day's frames as [minutes, 3, 64, 64].
Tensor<std::uint8_t> render_day(const Day& day, const Options& options, Rng& rng);

/// Hourly raw meteorology (long-form rows) covering the whole corpus, with
/// analysis fields on the hour and forecast runs at 06 and 18 UTC.
std::map<std::string, met::MetSeries> make_met(const std::vector<Day>& days, const Options& options);

struct Corpus {
  data::CorpusIndex index;
  std::vector<Day> days;
  std::vector<Tensor<std::uint8_t>> images;  ///< one stack per day
  std::map<std::string, met::MetSeries> met;
  data::DayLabels eval_days;  ///< last sunny and last cloudy day; empty below four days
};

Corpus generate(const Options& options);

/// Writes index.csv, corpus.json, met.csv, eval_days.csv and images/<day>.htns.
void write_corpus(const Corpus& corpus, const Options& options, const std::string& dir);

}  // namespace helio::synth
