#include "helio/met_csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <tuple>
#include <vector>

#include "helio/error.hpp"
#include "helio/text.hpp"

namespace helio::met {

using text::split;
using text::trim_cr;

namespace {

double parse_double(std::string_view s, std::size_t line_no) { return text::parse_number<double>(s, line_no); }

}  // namespace

std::string format_double(double v) { return text::format_double(v); }

std::map<std::string, MetSeries> read_raw_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim_cr(line) != kRawCsvHeader) {
    throw IoError(std::string("raw meteorology CSV must start with header '") + kRawCsvHeader + "'");
  }
  struct Pending {
    MetRow row;
    unsigned seen = 0;
  };
  // (variable, key) -> row under construction; key is the valid time for
  // analysis rows and (base, step) for forecast rows.
  using Key = std::tuple<std::int64_t, std::int64_t, int>;
  std::map<std::string, std::map<Key, Pending>> pending;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim_cr(line);
    if (text.empty()) continue;
    const auto f = split(text);
    if (f.size() != 6) throw IoError("line " + std::to_string(line_no) + ": expected 6 fields");
    const VariableSpec& spec = lookup(f[3]);
    const std::size_t g = grid_index(f[4]);
    const double value = parse_double(f[5], line_no);
    MetRow row;
    Key key;
    if (spec.has_step) {
      if (f[1].empty() || f[2].empty()) {
        throw IoError("line " + std::to_string(line_no) + ": forecast variable " + spec.code +
                      " needs base_time and step_hours");
      }
      const Timestamp base = Timestamp::parse(f[1]);
      const int step = static_cast<int>(parse_double(f[2], line_no));
      row.origin = ForecastOrigin{base, step};
      row.time = base + std::chrono::hours{step};
      key = {1, base.unix_seconds(), step};
    } else {
      if (f[0].empty()) throw IoError("line " + std::to_string(line_no) + ": analysis row without timestamp");
      row.time = Timestamp::parse(f[0]);
      key = {0, row.time.unix_seconds(), 0};
    }
    auto& slot = pending[spec.code][key];
    if (slot.seen == 0) slot.row = row;
    const unsigned bit = 1u << g;
    if (slot.seen & bit) {
      throw IntegrityError("line " + std::to_string(line_no) + ": duplicate " + spec.code + " value for grid point " +
                           std::string(kGridPointNames[g]));
    }
    slot.seen |= bit;
    slot.row.values[g] = value;
  }

  std::map<std::string, MetSeries> out;
  for (auto& [code, rows] : pending) {
    MetSeries series{lookup(code), {}};
    for (auto& [key, p] : rows) {
      if (p.seen != 0xF) {
        throw IntegrityError(code + ": incomplete grid quad at " + p.row.time.to_string());
      }
      series.rows.push_back(p.row);
    }
    std::stable_sort(series.rows.begin(), series.rows.end(),
                     [](const MetRow& a, const MetRow& b) { return a.time < b.time; });
    out.emplace(code, std::move(series));
  }
  return out;
}

std::map<std::string, MetSeries> read_raw_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_raw_csv(in);
}

void write_raw_csv(std::ostream& out, const std::map<std::string, MetSeries>& series) {
  out << kRawCsvHeader << '\n';
  for (const auto& spec : catalogue()) {
    const auto it = series.find(spec.code);
    if (it == series.end()) continue;
    for (const auto& row : it->second.rows) {
      for (std::size_t g = 0; g < 4; ++g) {
        out << row.time.to_string() << ',';
        if (row.origin) out << row.origin->base.to_string() << ',' << row.origin->step_hours;
        else out << ',';
        out << ',' << spec.code << ',' << kGridPointNames[g] << ',' << format_double(row.values[g]) << '\n';
      }
    }
  }
}

void write_series_csv(std::ostream& out, const MetSeries& series) {
  out << "timestamp,NW,NE,SW,SE\n";
  for (const auto& row : series.rows) {
    out << row.time.to_string();
    for (double v : row.values) out << ',' << format_double(v);
    out << '\n';
  }
}

MetSeries read_series_csv(std::istream& in, const VariableSpec& spec) {
  std::string line;
  if (!std::getline(in, line) || trim_cr(line) != "timestamp,NW,NE,SW,SE") {
    throw IoError(spec.code + ": series CSV must start with 'timestamp,NW,NE,SW,SE'");
  }
  MetSeries series{spec, {}};
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim_cr(line);
    if (text.empty()) continue;
    const auto f = split(text);
    if (f.size() != 5) throw IoError(spec.code + " line " + std::to_string(line_no) + ": expected 5 fields");
    MetRow row{Timestamp::parse(f[0]), {}, std::nullopt};
    for (std::size_t g = 0; g < 4; ++g) row.values[g] = parse_double(f[g + 1], line_no);
    series.rows.push_back(row);
  }
  series.check_strictly_increasing();
  return series;
}

}  // namespace helio::met
