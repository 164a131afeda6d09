// Brute-force reference implementations of the preprocessing steps, written
// independently of the library for equivalence testing.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "helio/metpipe.hpp"
#include "helio/random.hpp"

namespace helio::oracle {

/// Rates by scanning every row for its predecessor in the same run.
inline std::vector<met::GridQuad> rates(const met::MetSeries& s) {
  std::vector<met::GridQuad> out;
  for (const auto& row : s.rows) {
    const met::MetRow* prev = nullptr;
    for (const auto& other : s.rows) {
      if (other.origin->base == row.origin->base && other.origin->step_hours < row.origin->step_hours &&
          (!prev || other.origin->step_hours > prev->origin->step_hours)) {
        prev = &other;
      }
    }
    met::GridQuad q{};
    const int span = row.origin->step_hours - (prev ? prev->origin->step_hours : 0);
    for (int g = 0; g < 4; ++g) q[g] = (row.values[g] - (prev ? prev->values[g] : 0.0)) / (3600.0 * span);
    out.push_back(q);
  }
  return out;
}

/// Value at `t` by searching the bracketing source rows.
inline double fill_at(const met::MetSeries& s, const Timestamp& t, int g) {
  double v = s.rows.front().values[g];
  for (const auto& row : s.rows) {
    if (row.time <= t) v = row.values[g];
  }
  return v;
}

inline double interpolate_at(const met::MetSeries& s, const Timestamp& t, int g) {
  if (t <= s.rows.front().time) return s.rows.front().values[g];
  if (t >= s.rows.back().time) return s.rows.back().values[g];
  for (std::size_t i = 0; i + 1 < s.rows.size(); ++i) {
    const auto& a = s.rows[i];
    const auto& b = s.rows[i + 1];
    if (a.time <= t && t <= b.time) {
      const double w = static_cast<double>((t - a.time).count()) / static_cast<double>((b.time - a.time).count());
      return a.values[g] + w * (b.values[g] - a.values[g]);
    }
  }
  return NAN;
}

struct MeanStd {
  double mean;
  double std;
};

/// Two-pass mean and population standard deviation, floored to 1 when zero.
inline MeanStd mean_std(const met::MetSeries& s, const std::vector<bool>& mask, int g) {
  long double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    if (mask[i]) {
      sum += s.rows[i].values[g];
      ++n;
    }
  }
  const double mean = static_cast<double>(sum / n);
  long double ss = 0.0;
  bool constant = true;
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    if (mask[i]) {
      ss += (s.rows[i].values[g] - mean) * (s.rows[i].values[g] - mean);
      if (s.rows[i].values[g] != s.rows[0].values[g]) constant = false;
    }
  }
  const double sd = std::sqrt(static_cast<double>(ss / n));
  return {mean, constant || sd == 0.0 ? 1.0 : sd};
}

/// Random accumulation series: `runs` forecast runs of `steps` hourly steps.
inline met::MetSeries random_accumulation(Rng& rng, int runs, int steps, const Timestamp& first_base) {
  met::MetSeries s{met::lookup("ssrd"), {}};
  for (int r = 0; r < runs; ++r) {
    const Timestamp base = first_base + std::chrono::hours(12 * r);
    met::GridQuad acc{};
    for (int k = 1; k <= steps; ++k) {
      for (auto& a : acc) a += uniform(rng, 0.0, 3.0e6);
      s.rows.push_back({base + std::chrono::hours(k), acc, met::ForecastOrigin{base, k}});
    }
  }
  return s;
}

/// Random instantaneous series on irregular hourly-ish times.
inline met::MetSeries random_instantaneous(Rng& rng, int rows, const Timestamp& start, bool constant_point) {
  met::MetSeries s{met::lookup("tcc"), {}};
  Timestamp t = start;
  for (int i = 0; i < rows; ++i) {
    met::GridQuad q{};
    for (auto& v : q) v = uniform(rng, -5.0, 5.0);
    if (constant_point) q[2] = 0.75;
    s.rows.push_back({t, q, std::nullopt});
    t = t + std::chrono::minutes(30 + static_cast<int>(below(rng, 60)));
  }
  return s;
}

}  // namespace helio::oracle
