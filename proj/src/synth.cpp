#include "helio/synth.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "helio/error.hpp"
#include "helio/met_csv.hpp"

namespace helio::synth {

namespace {

std::uint64_t mix(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed ^ (a * 0x9e3779b97f4a7c15ULL) ^ (b * 0xbf58476d1ce4e5b9ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Timestamp day_start(const Options& o, int day_index) {
  int y = 0;
  unsigned m = 0, d = 0;
  if (std::sscanf(o.start_date.c_str(), "%d-%u-%u", &y, &m, &d) != 3) {
    throw UsageError("start date must be YYYY-MM-DD, got '" + o.start_date + "'");
  }
  return Timestamp::from_local(y, m, d, 0, 0, 0, o.meta.utc_offset_minutes) + std::chrono::hours(24 * day_index);
}

data::DayLabel label_for(Profile p, int day_index) {
  switch (p) {
    case Profile::sunny:
      return data::DayLabel::sunny;
    case Profile::cloudy:
      return data::DayLabel::cloudy;
    case Profile::mixed:
      break;
  }
  return day_index % 2 == 0 ? data::DayLabel::sunny : data::DayLabel::cloudy;
}

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

}  // namespace

Profile parse_profile(std::string_view name) {
  if (name == "sunny") return Profile::sunny;
  if (name == "cloudy") return Profile::cloudy;
  if (name == "mixed") return Profile::mixed;
  throw UsageError("unknown profile '" + std::string(name) + "' (expected sunny, cloudy or mixed)");
}

void Options::validate() const {
  if (days < 1) throw RangeError("synthetic corpus needs at least one day");
  if (first_minute < 0 || last_minute >= 24 * 60 || last_minute <= first_minute) {
    throw RangeError("synthetic day span must lie inside one local day");
  }
  if (!(peak_kw > 0.0)) throw RangeError("peak power must be positive");
  meta.site.validate();
}

double CloudEvent::opacity(double minute) const {
  return depth * sigmoid((minute - start) / edge) * sigmoid((end - minute) / edge);
}

std::vector<double> clear_sky_kw(const std::vector<Timestamp>& times, const ephemeris::GeoLocation& site,
                                 double peak_kw) {
  std::vector<double> s(times.size());
  double top = 0.0;
  for (std::size_t i = 0; i < times.size(); ++i) {
    s[i] = std::max(0.0, std::sin(ephemeris::solar_angles(site, times[i]).elevation * std::numbers::pi / 180.0));
    top = std::max(top, s[i]);
  }
  for (auto& v : s) v = top > 0.0 ? peak_kw * v / top : 0.0;
  return s;
}

std::vector<CloudEvent> cloud_events(Rng& rng, std::size_t minutes, std::size_t noon_index) {
  const double n = static_cast<double>(minutes);
  std::vector<CloudEvent> out;
  CloudEvent forced;
  const double duration = uniform(rng, 20.0, 40.0);
  forced.start = std::clamp(std::floor(static_cast<double>(noon_index) + uniform(rng, -30.0, 10.0)), 1.0, n - 2.0) + 0.5;
  forced.end = std::min(forced.start + std::round(duration), n + 30.0);
  forced.depth = uniform(rng, 0.7, 0.8);
  forced.edge = 0.3;
  forced.direction = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  out.push_back(forced);

  double cursor = 0.0;
  while (true) {
    cursor += uniform(rng, 15.0, 90.0);
    const double len = uniform(rng, 8.0, 45.0);
    if (cursor + len > n) break;
    if (cursor - 10.0 < forced.end && forced.start < cursor + len + 10.0) {
      cursor = forced.end + 10.0;
      continue;
    }
    CloudEvent e;
    e.start = cursor;
    e.end = cursor + len;
    e.depth = uniform(rng, 0.3, 0.8);
    e.edge = uniform(rng, 0.5, 4.0);
    e.direction = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    out.push_back(e);
    cursor = e.end;
  }
  return out;
}

Day make_day(const Options& o, int day_index) {
  Day day;
  const Timestamp midnight = day_start(o, day_index);
  day.date = midnight.local_date();
  day.label = label_for(o.profile, day_index);
  for (int m = o.first_minute; m <= o.last_minute; ++m) day.times.push_back(midnight + std::chrono::minutes(m));
  day.clear_kw = clear_sky_kw(day.times, o.meta.site, o.peak_kw);
  const std::size_t noon =
      static_cast<std::size_t>(std::max_element(day.clear_kw.begin(), day.clear_kw.end()) - day.clear_kw.begin());
  if (day.label == data::DayLabel::cloudy) {
    Rng rng(mix(o.seed, static_cast<std::uint64_t>(day_index), 1));
    day.events = cloud_events(rng, day.times.size(), noon);
  }
  for (std::size_t i = 0; i < day.times.size(); ++i) {
    double t = 1.0;
    for (const auto& e : day.events) t *= 1.0 - e.opacity(static_cast<double>(i));
    t = std::clamp(t, 0.2, 1.0);
    day.transmission.push_back(t);
    day.pv_kw.push_back(day.clear_kw[i] * t);
  }
  return day;
}

Tensor<std::uint8_t> render_day(const Day& day, const Options& o, Rng& rng) {
  constexpr std::size_t S = data::kImageSide;
  constexpr double kSpeed = 1.2;  // cloud drift, pixels per minute
  constexpr double kCloudRadius = 7.0;
  const auto params = ephemeris::ProjectionParams::for_image_side(static_cast<double>(S));
  const std::size_t frames = day.times.size();
  Tensor<std::uint8_t> out({frames, 3, S, S});

  struct Blob {
    double x, y, vx, vy, radius;
  };
  std::vector<Blob> blobs;
  if (day.label == data::DayLabel::cloudy) {
    for (int b = 0; b < 3; ++b) {
      blobs.push_back({uniform(rng, 0, 64), uniform(rng, 0, 64), uniform(rng, -0.3, 0.3), uniform(rng, -0.3, 0.3),
                       uniform(rng, 5, 9)});
    }
  }

  std::vector<double> px(3 * S * S);
  for (std::size_t f = 0; f < frames; ++f) {
    const double minute = static_cast<double>(f);
    const double bright = 0.35 + 0.65 * day.clear_kw[f] / o.peak_kw;
    const auto sun = ephemeris::solar_angles(o.meta.site, day.times[f]);
    const bool visible = sun.elevation >= 0.0;
    ephemeris::ImageCoords sp;
    if (visible) {
      sp = ephemeris::project_sun({ephemeris::relative_azimuth(sun.azimuth, o.meta.site.camera_azimuth), sun.elevation},
                                  params);
    }

    for (std::size_t y = 0; y < S; ++y) {
      for (std::size_t x = 0; x < S; ++x) {
        const double dx = static_cast<double>(x) + 0.5 - params.center, dy = static_cast<double>(y) + 0.5 - params.center;
        const double r = std::sqrt(dx * dx + dy * dy) / params.max_radius;
        double c[3] = {0.0, 0.0, 0.0};
        if (r <= 1.0) {
          c[0] = bright * (60.0 + 50.0 * r);
          c[1] = bright * (120.0 + 40.0 * r);
          c[2] = bright * 215.0;
          if (visible) {
            const double ds = std::hypot(static_cast<double>(x) + 0.5 - sp.x, static_cast<double>(y) + 0.5 - sp.y);
            const double glow = std::exp(-(ds / 4.5) * (ds / 4.5));
            c[0] += (255.0 - c[0]) * glow;
            c[1] += (250.0 - c[1]) * glow;
            c[2] += (235.0 - c[2]) * glow;
          }
          auto cover = [&](double cx, double cy, double radius, double alpha) {
            const double d = std::hypot(static_cast<double>(x) + 0.5 - cx, static_cast<double>(y) + 0.5 - cy);
            const double a = alpha * sigmoid((radius - d) / 1.2);
            const double grey = 160.0 * (0.6 + 0.4 * bright);
            for (double& ch : c) ch += (grey - ch) * a;
          };
          for (const auto& b : blobs) {
            cover(std::fmod(b.x + b.vx * minute + 640.0, 64.0), std::fmod(b.y + b.vy * minute + 640.0, 64.0), b.radius,
                  0.35);
          }
          if (visible) {
            for (const auto& e : day.events) {
              if (minute < e.start - 20.0 || minute > e.end + 20.0) continue;
              double off = 0.0, dir = e.direction;
              if (minute < e.start) {
                off = kSpeed * (e.start - minute);
              } else if (minute > e.end) {
                off = kSpeed * (minute - e.end);
                dir += std::numbers::pi;
              }
              cover(sp.x + off * std::cos(dir), sp.y + off * std::sin(dir), kCloudRadius, e.depth);
            }
          }
        }
        for (std::size_t ch = 0; ch < 3; ++ch) px[(ch * S + y) * S + x] = c[ch];
      }
    }
    std::uint8_t* dst = out.raw() + f * 3 * S * S;
    for (std::size_t i = 0; i < px.size(); ++i) dst[i] = to_byte(px[i] + uniform(rng, -2.0, 2.0));
  }
  return out;
}

std::map<std::string, met::MetSeries> make_met(const std::vector<Day>& days, const Options& o) {
  using std::chrono::hours;
  using std::chrono::minutes;
  const Timestamp first = days.front().times.front().with_offset(minutes(0));
  const Timestamp last = days.back().times.back().with_offset(minutes(0));
  const auto hour_floor = [](const Timestamp& t) {
    const auto s = t.unix_seconds();
    return t + std::chrono::seconds(-(((s % 3600) + 3600) % 3600));
  };
  const Timestamp start = hour_floor(first - hours(12));
  const Timestamp stop = hour_floor(last + hours(13));
  Rng rng(mix(o.seed, 0xfeed, 3));

  // Cloud cover around UTC hour ending at t.
  auto cover_at = [&](const Timestamp& t) {
    const std::string local = t.with_offset(minutes(o.meta.utc_offset_minutes)).local_date();
    for (const auto& d : days) {
      if (d.date != local) continue;
      double base = d.label == data::DayLabel::cloudy ? 0.55 : 0.03;
      double sum = 0.0;
      int count = 0;
      for (std::size_t i = 0; i < d.times.size(); ++i) {
        if (t - hours(1) < d.times[i] && d.times[i] <= t) {
          sum += 1.0 - d.transmission[i];
          ++count;
        }
      }
      return std::clamp(base + (count ? 0.8 * sum / count : 0.0), 0.0, 1.0);
    }
    return 0.1;
  };
  auto sin_elev = [&](const Timestamp& t) {
    const auto s = ephemeris::solar_angles(o.meta.site, t - minutes(30));
    return std::max(0.0, std::sin(s.elevation * std::numbers::pi / 180.0));
  };
  auto jitter = [&](double v, std::size_t g) {
    return v * (1.0 + 0.02 * (static_cast<double>(g) - 1.5)) * (1.0 + uniform(rng, -0.005, 0.005));
  };

  std::map<std::string, met::MetSeries> out;
  for (const auto& spec : met::catalogue()) out[spec.code] = met::MetSeries{spec, {}};

  for (Timestamp t = start; t <= stop; t = t + hours(1)) {
    const double c = cover_at(t);
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(t.unix_seconds() % 86400) / 86400.0;
    const double analysis[4] = {c, 3.0 + 2.0 * std::sin(phase) + 2.0 * c, -1.0 + 1.5 * std::cos(phase) - c,
                                101300.0 - 600.0 * c + 100.0 * std::sin(phase)};
    const char* codes[4] = {"tcc", "100u", "100v", "sp"};
    for (int k = 0; k < 4; ++k) {
      met::MetRow row{t, {}, std::nullopt};
      for (std::size_t g = 0; g < 4; ++g) row.values[g] = jitter(analysis[k], g);
      if (k == 0) {
        for (auto& v : row.values) v = std::clamp(v, 0.0, 1.0);
      }
      out[codes[k]].rows.push_back(row);
    }
  }

  const auto base_of = [](const Timestamp& t) {
    const auto h = ((t.unix_seconds() / 3600) % 24 + 24) % 24;
    return t - hours(h < 6 ? h + 6 : h < 18 ? h - 6 : h - 18);
  };
  for (Timestamp base = base_of(start - hours(1)); base < stop; base = base + hours(12)) {
    met::GridQuad acc[5] = {};
    const char* acc_codes[5] = {"ssrd", "fdir", "tsr", "strd", "str"};
    for (int step = 1; step <= 12; ++step) {
      const Timestamp valid = base + hours(step);
      const double c = cover_at(valid), se = sin_elev(valid);
      const double power[5] = {1000.0 * se * (1.0 - 0.75 * c), 850.0 * se * (1.0 - c) * (1.0 - c),
                               1250.0 * se * (1.0 - 0.6 * c), 310.0 + 90.0 * c, 90.0 - 60.0 * c};
      for (int k = 0; k < 5; ++k) {
        met::MetRow row{valid, {}, met::ForecastOrigin{base, step}};
        for (std::size_t g = 0; g < 4; ++g) {
          acc[k][g] += jitter(power[k], g) * 3600.0;
          row.values[g] = acc[k][g];
        }
        out[acc_codes[k]].rows.push_back(row);
      }
      met::MetRow gust{valid, {}, met::ForecastOrigin{base, step}};
      for (std::size_t g = 0; g < 4; ++g) gust.values[g] = jitter(4.0 + 6.0 * c + 1.5 * std::sin(0.7 * step), g);
      out["i10fg"].rows.push_back(gust);
    }
  }
  return out;
}

Corpus generate(const Options& o) {
  constexpr int kMinDaysForEval = 4;
  o.validate();
  Corpus c;
  for (int d = 0; d < o.days; ++d) {
    c.days.push_back(make_day(o, d));
    Rng render_rng(mix(o.seed, static_cast<std::uint64_t>(d), 2));
    c.images.push_back(render_day(c.days.back(), o, render_rng));
    const auto& day = c.days.back();
    c.index.set_label(day.date, day.label);
    for (std::size_t i = 0; i < day.times.size(); ++i) {
      c.index.add({day.times[i], day.pv_kw[i], std::string(data::CorpusPaths::kImages) + "/" + day.date + ".htns", i});
    }
  }
  c.met = make_met(c.days, o);
  for (auto it = c.days.rbegin(); o.days >= kMinDaysForEval && it != c.days.rend(); ++it) {
    if (!c.eval_days.contains(it->date) &&
        std::none_of(c.eval_days.begin(), c.eval_days.end(), [&](const auto& kv) { return kv.second == it->label; })) {
      c.eval_days[it->date] = it->label;
    }
  }
  return c;
}

void write_corpus(const Corpus& c, const Options& o, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / data::CorpusPaths::kImages);
  for (std::size_t d = 0; d < c.days.size(); ++d) {
    data::ImageStore::write_day((fs::path(dir) / data::CorpusPaths::kImages / (c.days[d].date + ".htns")).string(),
                                c.images[d]);
  }
  auto open = [&](const char* name) {
    std::ofstream f(fs::path(dir) / name, std::ios::binary);
    if (!f) throw IoError("cannot write " + (fs::path(dir) / name).string());
    return f;
  };
  {
    auto f = open(data::CorpusPaths::kIndex);
    c.index.write_csv(f);
  }
  {
    auto f = open(data::CorpusPaths::kMeta);
    f << o.meta.to_json();
  }
  {
    auto f = open(data::CorpusPaths::kMet);
    met::write_raw_csv(f, c.met);
  }
  {
    auto f = open(data::CorpusPaths::kEvalDays);
    data::write_day_labels(f, c.eval_days);
  }
}

}  // namespace helio::synth
