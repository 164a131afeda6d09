#include "helio/metpipe.hpp"

#include <algorithm>
#include <cmath>
#include <json.hpp>

#include "helio/error.hpp"

namespace helio::met {

const std::vector<VariableSpec>& catalogue() {
  static const std::vector<VariableSpec> specs{
      {"tcc", "Total Cloud Cover", Source::analysis, false, Kind::instantaneous, "Fraction (0-1)"},
      {"i10fg", "10m Wind Gust", Source::forecast, true, Kind::instantaneous, "m/s"},
      {"100u", "U component of wind at 100m", Source::analysis, false, Kind::instantaneous, "m/s"},
      {"100v", "V component of wind at 100m", Source::analysis, false, Kind::instantaneous, "m/s"},
      {"sp", "Surface Pressure", Source::analysis, false, Kind::instantaneous, "Pa"},
      {"strd", "Surface Thermal Radiation Downwards", Source::forecast, true, Kind::accumulative, "J/m2"},
      {"ssrd", "Surface Solar Radiation Downwards", Source::forecast, true, Kind::accumulative, "J/m2"},
      {"str", "Surface Net Thermal Radiation", Source::forecast, true, Kind::accumulative, "J/m2"},
      {"tsr", "Top Net Solar Radiation", Source::forecast, true, Kind::accumulative, "J/m2"},
      {"fdir", "Surface Solar Direct Radiation", Source::forecast, true, Kind::accumulative, "J/m2"},
  };
  return specs;
}

const VariableSpec& lookup(std::string_view code) {
  for (const auto& spec : catalogue()) {
    if (spec.code == code) return spec;
  }
  throw UsageError("unknown variable '" + std::string(code) + "'");
}

std::size_t grid_index(std::string_view name) {
  for (std::size_t i = 0; i < kGridPointNames.size(); ++i) {
    if (kGridPointNames[i] == name) return i;
  }
  throw UsageError("unknown grid point '" + std::string(name) + "'");
}

void MetSeries::check_strictly_increasing() const {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i - 1].time < rows[i].time)) {
      throw IntegrityError(variable.code + ": timestamps not strictly increasing at " + rows[i].time.to_string());
    }
  }
}

MetSeries reconstruct_timestamps(MetSeries series) {
  for (auto& row : series.rows) {
    if (!row.origin) throw IntegrityError(series.variable.code + ": forecast row without base time and step");
    row.time = row.origin->base + std::chrono::hours{row.origin->step_hours};
  }
  std::stable_sort(series.rows.begin(), series.rows.end(),
                   [](const MetRow& a, const MetRow& b) { return a.time < b.time; });
  for (std::size_t i = 1; i < series.rows.size(); ++i) {
    if (series.rows[i - 1].time == series.rows[i].time) {
      throw IntegrityError(series.variable.code + ": duplicate valid time " + series.rows[i].time.to_string() +
                           " (base " + series.rows[i - 1].origin->base.to_string() + " step " +
                           std::to_string(series.rows[i - 1].origin->step_hours) + "h and base " +
                           series.rows[i].origin->base.to_string() + " step " +
                           std::to_string(series.rows[i].origin->step_hours) + "h)");
    }
  }
  return series;
}

MetSeries cumulative_to_rate(const MetSeries& series) {
  // Group row indices by forecast run, each run ordered by step.
  std::map<Timestamp, std::vector<std::size_t>> runs;
  for (std::size_t i = 0; i < series.rows.size(); ++i) {
    const auto& row = series.rows[i];
    if (!row.origin) throw IntegrityError(series.variable.code + ": accumulated row without forecast origin");
    runs[row.origin->base].push_back(i);
  }

  MetSeries out{series.variable, {}};
  out.rows.reserve(series.rows.size());
  for (auto& [base, idx] : runs) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      return series.rows[a].origin->step_hours < series.rows[b].origin->step_hours;
    });
    for (std::size_t g = 0; g < 4; ++g) {
      double run_max = 0.0;
      for (std::size_t i : idx) run_max = std::max(run_max, std::abs(series.rows[i].values[g]));
      const double tol = 1e-6 * run_max;
      double prev = 0.0;
      for (std::size_t i : idx) {
        const double inc = series.rows[i].values[g] - prev;
        if (inc < -tol) {
          throw IntegrityError(series.variable.code + ": negative accumulation increment " + std::to_string(inc) +
                               " at " + series.rows[i].time.to_string() + " grid point " +
                               std::string(kGridPointNames[g]));
        }
        prev = series.rows[i].values[g];
      }
    }
    int prev_step = 0;
    GridQuad prev_values{};
    for (std::size_t i : idx) {
      const auto& row = series.rows[i];
      const int span = row.origin->step_hours - prev_step;
      if (span <= 0) throw IntegrityError(series.variable.code + ": non-positive step span in run " + base.to_string());
      MetRow rate{row.time, {}, row.origin};
      for (std::size_t g = 0; g < 4; ++g) rate.values[g] = (row.values[g] - prev_values[g]) / (3600.0 * span);
      out.rows.push_back(rate);
      prev_step = row.origin->step_hours;
      prev_values = row.values;
    }
  }
  std::stable_sort(out.rows.begin(), out.rows.end(),
                   [](const MetRow& a, const MetRow& b) { return a.time < b.time; });
  out.check_strictly_increasing();
  return out;
}

MetSeries align_to_minutes(const MetSeries& series, std::span<const Timestamp> grid, AlignMode mode) {
  if (series.rows.empty()) throw IntegrityError(series.variable.code + ": cannot align an empty series");
  series.check_strictly_increasing();
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i - 1] < grid[i])) throw IntegrityError("minute grid not strictly increasing");
  }
  const auto& rows = series.rows;
  MetSeries out{series.variable, {}};
  out.rows.reserve(grid.size());
  for (const auto& t : grid) {
    // First source row strictly after t.
    const auto after = std::upper_bound(rows.begin(), rows.end(), t,
                                        [](const Timestamp& v, const MetRow& r) { return v < r.time; });
    MetRow row{t, {}, std::nullopt};
    if (after == rows.begin()) {
      row.values = rows.front().values;
    } else if (after == rows.end()) {
      row.values = rows.back().values;
    } else {
      const MetRow& lo = *(after - 1);
      if (mode == AlignMode::fill || lo.time == t) {
        row.values = lo.values;
      } else {
        const double span = static_cast<double>((after->time - lo.time).count());
        const double frac = static_cast<double>((t - lo.time).count()) / span;
        for (std::size_t g = 0; g < 4; ++g) {
          row.values[g] = lo.values[g] + frac * (after->values[g] - lo.values[g]);
        }
      }
    }
    out.rows.push_back(row);
  }
  return out;
}

AlignMode alignment_for(const VariableSpec& spec) {
  return spec.kind == Kind::accumulative ? AlignMode::interpolate : AlignMode::fill;
}

const std::array<PointStats, 4>& NormStats::at(const std::string& code) const {
  const auto it = stats_.find(code);
  if (it == stats_.end()) throw UsageError("no normalization stats for variable '" + code + "'");
  return it->second;
}

std::string NormStats::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [code, points] : stats_) {
    auto& v = j[code];
    for (std::size_t g = 0; g < 4; ++g) {
      v[std::string(kGridPointNames[g])] = {{"mean", points[g].mean}, {"std", points[g].std}};
    }
  }
  return j.dump(2);
}

NormStats NormStats::from_json(std::string_view text) {
  NormStats out;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& [code, v] : j.items()) {
      std::array<PointStats, 4> points{};
      for (std::size_t g = 0; g < 4; ++g) {
        const auto& p = v.at(std::string(kGridPointNames[g]));
        points[g] = {p.at("mean").get<double>(), p.at("std").get<double>()};
      }
      out.set(code, points);
    }
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed normalization stats: ") + e.what());
  }
  return out;
}

NormStats fit_norm_stats(const MetSeries& series, const std::vector<bool>& mask) {
  if (mask.size() != series.rows.size()) throw ShapeError("mask length differs from series length");
  const auto selected = static_cast<std::size_t>(std::count(mask.begin(), mask.end(), true));
  if (selected < 2) throw RangeError(series.variable.code + ": normalization needs at least 2 rows");

  std::array<PointStats, 4> stats{};
  for (std::size_t g = 0; g < 4; ++g) {
    double sum = 0.0;
    double first = 0.0;
    bool have_first = false;
    bool constant = true;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      const double v = series.rows[i].values[g];
      if (!have_first) {
        first = v;
        have_first = true;
      } else if (v != first) {
        constant = false;
      }
      sum += v;
    }
    if (constant) {
      stats[g] = {first, 1.0};
      continue;
    }
    const double mean = sum / static_cast<double>(selected);
    double ss = 0.0;
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (!mask[i]) continue;
      const double d = series.rows[i].values[g] - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(selected));
    stats[g] = {mean, sd == 0.0 ? 1.0 : sd};
  }
  NormStats out;
  out.set(series.variable.code, stats);
  return out;
}

MetSeries normalize(const MetSeries& series, const NormStats& stats) {
  const auto& s = stats.at(series.variable.code);
  MetSeries out = series;
  for (auto& row : out.rows) {
    for (std::size_t g = 0; g < 4; ++g) row.values[g] = (row.values[g] - s[g].mean) / s[g].std;
  }
  return out;
}

MetSeries denormalize(const MetSeries& series, const NormStats& stats) {
  const auto& s = stats.at(series.variable.code);
  MetSeries out = series;
  for (auto& row : out.rows) {
    for (std::size_t g = 0; g < 4; ++g) row.values[g] = row.values[g] * s[g].std + s[g].mean;
  }
  return out;
}

PreprocessOutput preprocess(const std::map<std::string, MetSeries>& raw, std::span<const std::string> codes,
                            std::span<const Timestamp> grid, const Timestamp& train_end) {
  std::vector<bool> mask(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) mask[i] = grid[i] <= train_end;

  PreprocessOutput out;
  for (const auto& code : expand_variables(codes)) {
    const auto it = raw.find(code);
    if (it == raw.end()) throw IoError("variable '" + code + "' missing from raw input");
    MetSeries series = it->second;
    const VariableSpec& spec = lookup(code);
    series.variable = spec;
    if (spec.has_step) series = reconstruct_timestamps(std::move(series));
    if (spec.kind == Kind::accumulative) series = cumulative_to_rate(series);
    const MetSeries aligned = align_to_minutes(series, grid, alignment_for(spec));
    const NormStats fitted = fit_norm_stats(aligned, mask);
    out.stats.set(code, fitted.at(code));
    out.normalized.emplace(code, normalize(aligned, fitted));
  }
  return out;
}

std::vector<std::string> expand_variables(std::span<const std::string> names) {
  std::vector<std::string> out;
  for (const auto& name : names) {
    if (name == kWind100) {
      out.emplace_back("100u");
      out.emplace_back("100v");
    } else {
      out.push_back(lookup(name).code);
    }
  }
  return out;
}

std::size_t FeatureSelection::length() const {
  return 4 * expand_variables(variables).size() + (sun_position ? 2 : 0);
}

std::string FeatureSelection::label() const {
  if (variables.empty() && !sun_position) return "MSUNSET";
  std::string out;
  for (const auto& v : variables) out += "+" + v;
  if (sun_position) out += "+sun position";
  return out;
}

FeatureSelection FeatureSelection::parse_label(std::string_view label) {
  FeatureSelection sel;
  if (label == "MSUNSET" || label.empty()) return sel;
  if (label.front() != '+') throw UsageError("feature label must start with '+': '" + std::string(label) + "'");
  std::size_t pos = 1;
  while (pos <= label.size()) {
    const auto next = label.find('+', pos);
    const auto token = label.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
    if (token == "sun position") {
      sel.sun_position = true;
    } else {
      if (token != kWind100) lookup(token);
      sel.variables.emplace_back(token);
    }
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return sel;
}

void FeatureStore::add(MetSeries series) {
  const std::string code = series.variable.code;
  series_.insert_or_assign(code, std::move(series));
}

std::vector<double> FeatureStore::build_feature_vector(const FeatureSelection& selection, const Timestamp& when,
                                                       std::optional<std::pair<double, double>> sun) const {
  std::vector<double> out;
  out.reserve(selection.length());
  for (const auto& code : expand_variables(selection.variables)) {
    const auto it = series_.find(code);
    if (it == series_.end()) throw UsageError("variable '" + code + "' has not been preprocessed");
    const auto& rows = it->second.rows;
    const auto pos = std::lower_bound(rows.begin(), rows.end(), when,
                                      [](const MetRow& r, const Timestamp& v) { return r.time < v; });
    if (pos == rows.end() || !(pos->time == when)) {
      throw RangeError(code + ": " + when.to_string() + " is outside the preprocessed minute grid");
    }
    out.insert(out.end(), pos->values.begin(), pos->values.end());
  }
  if (selection.sun_position) {
    if (!sun) throw UsageError("sun position requested but not supplied");
    out.push_back(sun->first);
    out.push_back(sun->second);
  }
  return out;
}

}  // namespace helio::met
