// CSV readers and writers for meteorological series.
#pragma once

#include <iosfwd>
#include <map>
#include <string>

#include "helio/metpipe.hpp"

namespace helio::met {

/// Header of the long-form raw export.
inline constexpr const char* kRawCsvHeader = "timestamp,base_time,step_hours,variable,grid_point,value";

/// Reads the long-form raw export. Analysis rows key on `timestamp`;
/// forecast rows carry `base_time` and `step_hours`. Every key needs all
/// four grid points.
std::map<std::string, MetSeries> read_raw_csv(std::istream& in);
std::map<std::string, MetSeries> read_raw_csv_file(const std::string& path);

/// Writes one row per (key, grid point). Forecast rows also get their
/// valid time in the `timestamp` column.
void write_raw_csv(std::ostream& out, const std::map<std::string, MetSeries>& series);

/// Wide per-variable form: timestamp,NW,NE,SW,SE.
void write_series_csv(std::ostream& out, const MetSeries& series);
MetSeries read_series_csv(std::istream& in, const VariableSpec& spec);

/// Shortest decimal that round-trips a double.
std::string format_double(double v);

}  // namespace helio::met
