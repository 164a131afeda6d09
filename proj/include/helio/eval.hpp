// RMSE/MAE per sky condition, report serialization and day curves.
#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "helio/dataset.hpp"
#include "helio/time.hpp"

namespace helio::eval {

/// Throws ShapeError on a length mismatch and RangeError when empty.
double rmse(std::span<const double> truth, std::span<const double> prediction);
double mae(std::span<const double> truth, std::span<const double> prediction);

struct Metrics {
  double rmse = 0.0;  ///< kW
  double mae = 0.0;   ///< kW
  std::size_t count = 0;
};

/// One scored instant. For forecasts `time` is the target time.
struct Prediction {
  Timestamp time;
  double truth = 0.0;
  double prediction = 0.0;
};

/// Metrics per sky condition. A condition with no samples is absent, not
/// zero. `overall` pools every sample, unlabeled days included.
struct EvalReport {
  std::string model_id;
  std::string label;  ///< variable-set row label, e.g. "+i10fg+Wind100+sun position"
  std::optional<Metrics> sunny;
  std::optional<Metrics> cloudy;
  Metrics overall;

  std::string to_json() const;
  static EvalReport from_json(std::string_view text);
};

Metrics metrics(std::span<const Prediction> rows);

/// Groups rows by the local date of their time. Throws RangeError when empty.
EvalReport evaluate(std::span<const Prediction> rows, const data::DayLabels& labels, std::string model_id,
                    std::string label);

/// Aligned text table: one row per report, RMSE and MAE as
/// "sunny / cloudy / overall", "n/a" for an absent condition.
std::string format_table(std::span<const EvalReport> reports);

/// "timestamp,truth_kw,prediction_kw" rows. Throws IntegrityError unless
/// times are strictly increasing.
void write_curve_csv(std::ostream& out, std::span<const Prediction> rows);

}  // namespace helio::eval
