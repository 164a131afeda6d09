#include "helio/eval.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "helio/error.hpp"
#include "helio/text.hpp"

namespace helio::eval {

namespace {

void check_pair(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("metric inputs differ in length: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  if (a.empty()) throw RangeError("metrics need at least one sample");
}

nlohmann::ordered_json metrics_json(const std::optional<Metrics>& m) {
  if (!m) return nullptr;
  return {{"rmse", m->rmse}, {"mae", m->mae}, {"count", m->count}};
}

std::optional<Metrics> metrics_from(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return Metrics{j.at("rmse").get<double>(), j.at("mae").get<double>(), j.at("count").get<std::size_t>()};
}

std::string cell(const std::optional<Metrics>& m, double Metrics::*field) {
  if (!m) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", (*m).*field);
  return buf;
}

}  // namespace

double rmse(std::span<const double> truth, std::span<const double> prediction) {
  check_pair(truth, prediction);
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth[i] - prediction[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(truth.size()));
}

double mae(std::span<const double> truth, std::span<const double> prediction) {
  check_pair(truth, prediction);
  double sum = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) sum += std::abs(truth[i] - prediction[i]);
  return sum / static_cast<double>(truth.size());
}

Metrics metrics(std::span<const Prediction> rows) {
  std::vector<double> y, p;
  y.reserve(rows.size());
  p.reserve(rows.size());
  for (const auto& r : rows) {
    y.push_back(r.truth);
    p.push_back(r.prediction);
  }
  return {rmse(y, p), mae(y, p), rows.size()};
}

EvalReport evaluate(std::span<const Prediction> rows, const data::DayLabels& labels, std::string model_id,
                    std::string label) {
  if (rows.empty()) throw RangeError("cannot evaluate an empty test set");
  std::vector<Prediction> sunny, cloudy;
  for (const auto& r : rows) {
    const auto it = labels.find(r.time.local_date());
    if (it == labels.end()) continue;
    if (it->second == data::DayLabel::sunny) sunny.push_back(r);
    if (it->second == data::DayLabel::cloudy) cloudy.push_back(r);
  }
  EvalReport report;
  report.model_id = std::move(model_id);
  report.label = std::move(label);
  if (!sunny.empty()) report.sunny = metrics(sunny);
  if (!cloudy.empty()) report.cloudy = metrics(cloudy);
  report.overall = metrics(rows);
  return report;
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = model_id;
  j["label"] = label;
  j["sunny"] = metrics_json(sunny);
  j["cloudy"] = metrics_json(cloudy);
  j["overall"] = metrics_json(overall);
  return j.dump(2) + "\n";
}

EvalReport EvalReport::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    EvalReport r;
    r.model_id = j.at("model").get<std::string>();
    r.label = j.at("label").get<std::string>();
    r.sunny = metrics_from(j.at("sunny"));
    r.cloudy = metrics_from(j.at("cloudy"));
    const auto overall = metrics_from(j.at("overall"));
    if (!overall) throw IoError("report has no overall metrics");
    r.overall = *overall;
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("evaluation report: ") + e.what());
  }
}

std::string format_table(std::span<const EvalReport> reports) {
  std::vector<std::array<std::string, 3>> rows{
      {"Model", "RMSE (sunny / cloudy / overall)", "MAE (sunny / cloudy / overall)"}};
  for (const auto& r : reports) {
    const std::optional<Metrics> all = r.overall;
    auto triple = [&](double Metrics::*f) {
      return cell(r.sunny, f) + " / " + cell(r.cloudy, f) + " / " + cell(all, f);
    };
    rows.push_back({r.label.empty() ? r.model_id : r.label, triple(&Metrics::rmse), triple(&Metrics::mae)});
  }
  std::array<std::size_t, 3> width{};
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < 3; ++c) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream out;
  auto line = [&](const std::array<std::string, 3>& row) {
    out << row[0] << std::string(width[0] - row[0].size(), ' ') << " | " << row[1]
        << std::string(width[1] - row[1].size(), ' ') << " | " << row[2] << '\n';
  };
  line(rows[0]);
  out << std::string(width[0], '-') << "-+-" << std::string(width[1], '-') << "-+-" << std::string(width[2], '-')
      << '\n';
  for (std::size_t i = 1; i < rows.size(); ++i) line(rows[i]);
  return out.str();
}

void write_curve_csv(std::ostream& out, std::span<const Prediction> rows) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i - 1].time < rows[i].time)) {
      throw IntegrityError("day curve times must increase at " + rows[i].time.to_string());
    }
  }
  out << "timestamp,truth_kw,prediction_kw\n";
  for (const auto& r : rows) {
    out << r.time.to_string() << ',' << text::format_double(r.truth) << ',' << text::format_double(r.prediction)
        << '\n';
  }
}

}  // namespace helio::eval
