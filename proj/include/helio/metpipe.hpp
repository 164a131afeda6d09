// Meteorological reanalysis preprocessing: variable catalogue, forecast
// de-accumulation, minute alignment, normalization and feature assembly.
#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "helio/time.hpp"

namespace helio::met {

enum class Source { analysis, forecast };
enum class Kind { instantaneous, accumulative };

struct VariableSpec {
  std::string code;
  std::string full_name;
  Source source = Source::analysis;
  bool has_step = false;
  Kind kind = Kind::instantaneous;
  std::string units;
};

/// The ten supported reanalysis variables in catalogue order.
const std::vector<VariableSpec>& catalogue();

/// Looks up a variable by short code. Throws UsageError naming the code.
const VariableSpec& lookup(std::string_view code);

/// Pseudo-variable expanding to the 100 m wind components.
inline constexpr std::string_view kWind100 = "Wind100";

/// Grid points around the site, always stored in this order.
enum class GridPoint : std::size_t { nw = 0, ne = 1, sw = 2, se = 3 };
inline constexpr std::array<std::string_view, 4> kGridPointNames{"NW", "NE", "SW", "SE"};
std::size_t grid_index(std::string_view name);

using GridQuad = std::array<double, 4>;

/// Forecast run a row was read from.
struct ForecastOrigin {
  Timestamp base;
  int step_hours = 0;
};

struct MetRow {
  Timestamp time;
  GridQuad values{};
  std::optional<ForecastOrigin> origin;
};

struct MetSeries {
  VariableSpec variable;
  std::vector<MetRow> rows;

  /// Throws IntegrityError unless timestamps are strictly increasing.
  void check_strictly_increasing() const;
};

/// Re-keys forecast rows to valid time = base + step and sorts them.
/// Throws IntegrityError naming the first colliding valid time.
MetSeries reconstruct_timestamps(MetSeries series);

/// Per-run differencing of accumulations (J/m^2) into mean power (W/m^2).
/// Runs are delimited by forecast base time; the first step of a run uses the
/// raw accumulation. Throws IntegrityError on a negative increment larger
/// than 1e-6 of the run maximum.
MetSeries cumulative_to_rate(const MetSeries& series);

enum class AlignMode { fill, interpolate };

/// Resamples onto `grid`. `fill` holds the latest value (backward-filling
/// before the first source row); `interpolate` is piecewise linear, clamped
/// to the end values outside the source span.
MetSeries align_to_minutes(const MetSeries& series, std::span<const Timestamp> grid, AlignMode mode);

/// Alignment mode used for a variable class.
AlignMode alignment_for(const VariableSpec& spec);

struct PointStats {
  double mean = 0.0;
  double std = 1.0;
};

/// Per-variable, per-grid-point normalization constants. Immutable once fitted.
class NormStats {
 public:
  void set(const std::string& code, const std::array<PointStats, 4>& stats) { stats_[code] = stats; }
  bool contains(const std::string& code) const { return stats_.contains(code); }
  /// Throws UsageError when the variable has no fitted stats.
  const std::array<PointStats, 4>& at(const std::string& code) const;
  const std::map<std::string, std::array<PointStats, 4>>& all() const { return stats_; }

  /// {variable -> {grid_point -> {mean, std}}}
  std::string to_json() const;
  static NormStats from_json(std::string_view text);

 private:
  std::map<std::string, std::array<PointStats, 4>> stats_;
};

/// Mean and population standard deviation over rows with mask[i] set.
/// A zero standard deviation is stored as exactly 1.0.
NormStats fit_norm_stats(const MetSeries& series, const std::vector<bool>& mask);

MetSeries normalize(const MetSeries& series, const NormStats& stats);
MetSeries denormalize(const MetSeries& series, const NormStats& stats);

/// Full per-variable chain: reconstruct, de-accumulate, align, fit, normalize.
struct PreprocessOutput {
  std::map<std::string, MetSeries> normalized;
  NormStats stats;
};

/// Stats are fitted on grid rows at or before `train_end`.
PreprocessOutput preprocess(const std::map<std::string, MetSeries>& raw, std::span<const std::string> codes,
                            std::span<const Timestamp> grid, const Timestamp& train_end);

/// Validates names and expands Wind100 into 100u, 100v. Order is preserved.
std::vector<std::string> expand_variables(std::span<const std::string> names);

/// A model input configuration, e.g. "+i10fg+Wind100+sun position".
struct FeatureSelection {
  std::vector<std::string> variables;  ///< as written, Wind100 unexpanded
  bool sun_position = false;

  std::size_t length() const;
  /// Table label; "MSUNSET" for the image-only baseline.
  std::string label() const;
  static FeatureSelection parse_label(std::string_view label);
};

/// Normalized, minute-aligned series keyed by variable code.
class FeatureStore {
 public:
  FeatureStore() = default;
  explicit FeatureStore(std::map<std::string, MetSeries> series) : series_(std::move(series)) {}

  void add(MetSeries series);
  bool contains(const std::string& code) const { return series_.contains(code); }

  /// Concatenates each selected variable's NW, NE, SW, SE values at `when`,
  /// then the sun pair when the selection asks for it. Throws RangeError if
  /// `when` is not on the preprocessed grid.
  std::vector<double> build_feature_vector(const FeatureSelection& selection, const Timestamp& when,
                                           std::optional<std::pair<double, double>> sun) const;

 private:
  std::map<std::string, MetSeries> series_;
};

}  // namespace helio::met
