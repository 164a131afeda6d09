#include "helio/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include <json.hpp>

#include "helio/error.hpp"
#include "helio/htns.hpp"
#include "helio/text.hpp"

namespace helio::data {

std::string label_name(DayLabel label) {
  switch (label) {
    case DayLabel::sunny:
      return "sunny";
    case DayLabel::cloudy:
      return "cloudy";
    case DayLabel::unlabeled:
      break;
  }
  return "unlabeled";
}

DayLabel parse_day_label(std::string_view text) {
  if (text == "sunny") return DayLabel::sunny;
  if (text == "cloudy") return DayLabel::cloudy;
  if (text == "unlabeled" || text.empty()) return DayLabel::unlabeled;
  throw UsageError("unknown day label '" + std::string(text) + "' (expected sunny, cloudy or unlabeled)");
}

DayLabels read_day_labels(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || text::trim_cr(line) != "day,label") {
    throw IoError("day label file must start with header 'day,label'");
  }
  DayLabels out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto l = text::trim_cr(line);
    if (l.empty()) continue;
    const auto f = text::split(l);
    if (f.size() != 2) throw IoError("day labels line " + std::to_string(line_no) + ": expected 2 fields");
    out[std::string(f[0])] = parse_day_label(f[1]);
  }
  return out;
}

DayLabels read_day_labels_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open day label file '" + path + "'");
  return read_day_labels(in);
}

void write_day_labels(std::ostream& out, const DayLabels& labels) {
  out << "day,label\n";
  for (const auto& [day, label] : labels) out << day << ',' << label_name(label) << '\n';
}

std::string CorpusMeta::to_json() const {
  nlohmann::ordered_json j;
  j["site"] = {{"latitude", site.latitude}, {"longitude", site.longitude}, {"camera_azimuth", site.camera_azimuth}};
  j["utc_offset_minutes"] = utc_offset_minutes;
  j["image_side"] = image_side;
  return j.dump(2) + "\n";
}

CorpusMeta CorpusMeta::from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    CorpusMeta m;
    m.site = {j.at("site").at("latitude").get<double>(), j.at("site").at("longitude").get<double>(),
              j.at("site").at("camera_azimuth").get<double>()};
    m.site.validate();
    m.utc_offset_minutes = j.at("utc_offset_minutes").get<int>();
    m.image_side = j.at("image_side").get<std::size_t>();
    if (m.image_side != kImageSide) throw IoError("corpus image side must be 64");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("corpus metadata: ") + e.what());
  }
}

// ------------------------------------------------------------- CorpusIndex

void CorpusIndex::add(CorpusEntry entry) {
  if (!entries_.empty() && !(entries_.back().time < entry.time)) {
    throw IntegrityError("corpus timestamps must be unique and increasing at " + entry.time.to_string());
  }
  if (!(entry.pv_kw >= 0.0) || !std::isfinite(entry.pv_kw)) {
    throw IntegrityError("corpus PV power must be finite and non-negative at " + entry.time.to_string());
  }
  entries_.push_back(std::move(entry));
}

DayLabel CorpusIndex::label(const std::string& day) const {
  const auto it = labels_.find(day);
  return it == labels_.end() ? DayLabel::unlabeled : it->second;
}

std::optional<std::size_t> CorpusIndex::find(const Timestamp& when) const {
  const auto it = std::lower_bound(entries_.begin(), entries_.end(), when,
                                   [](const CorpusEntry& e, const Timestamp& t) { return e.time < t; });
  if (it == entries_.end() || !(it->time == when)) return std::nullopt;
  return static_cast<std::size_t>(it - entries_.begin());
}

std::vector<std::string> CorpusIndex::days() const {
  std::vector<std::string> out;
  for (const auto& e : entries_) {
    auto d = e.time.local_date();
    if (out.empty() || out.back() != d) out.push_back(std::move(d));
  }
  return out;
}

std::pair<std::size_t, std::size_t> CorpusIndex::day_range(const std::string& day) const {
  std::size_t first = entries_.size(), last = entries_.size();
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    if (entries_[i].time.local_date() == day) {
      if (first == entries_.size()) first = i;
      last = i + 1;
    } else if (first != entries_.size()) {
      break;
    }
  }
  if (first == entries_.size()) throw UsageError("day " + day + " is not in the corpus");
  return {first, last};
}

void CorpusIndex::write_csv(std::ostream& out) const {
  out << kIndexHeader << '\n';
  for (const auto& e : entries_) {
    out << e.time.to_string() << ',' << label_name(label(e.time.local_date())) << ',' << text::format_double(e.pv_kw)
        << ',' << e.tensor_file << ',' << e.frame_index << '\n';
  }
}

CorpusIndex CorpusIndex::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || text::trim_cr(line) != kIndexHeader) {
    throw IoError(std::string("corpus index must start with header '") + kIndexHeader + "'");
  }
  CorpusIndex index;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto l = text::trim_cr(line);
    if (l.empty()) continue;
    const auto f = text::split(l);
    if (f.size() != 5) throw IoError("corpus index line " + std::to_string(line_no) + ": expected 5 fields");
    CorpusEntry e;
    e.time = Timestamp::parse(f[0]);
    e.pv_kw = text::parse_number<double>(f[2], line_no);
    e.tensor_file = std::string(f[3]);
    e.frame_index = text::parse_number<std::size_t>(f[4], line_no);
    const auto label = parse_day_label(f[1]);
    const auto day = e.time.local_date();
    if (label != DayLabel::unlabeled) index.set_label(day, label);
    index.add(std::move(e));
  }
  return index;
}

// -------------------------------------------------------------- ImageStore

void ImageStore::load_all(const CorpusIndex& index) {
  for (const auto& e : index.entries()) {
    if (stacks_.contains(e.tensor_file)) continue;
    const auto c = htns::Container::load(root_ + "/" + e.tensor_file);
    auto stack = c.get<std::uint8_t>("images");
    if (stack.rank() != 4 || stack.dim(1) != kImageChannels || stack.dim(2) != kImageSide ||
        stack.dim(3) != kImageSide) {
      throw ShapeError(e.tensor_file + ": expected images [frames,3,64,64], got " + shape_string(stack.dims()));
    }
    stacks_.emplace(e.tensor_file, std::move(stack));
  }
}

std::span<const std::uint8_t> ImageStore::image(const CorpusEntry& entry) const {
  const auto it = stacks_.find(entry.tensor_file);
  if (it == stacks_.end()) throw StateError("image file '" + entry.tensor_file + "' has not been loaded");
  if (entry.frame_index >= it->second.dim(0)) {
    throw IntegrityError(entry.tensor_file + ": frame " + std::to_string(entry.frame_index) + " out of range");
  }
  return {it->second.raw() + entry.frame_index * kImageBytes, kImageBytes};
}

void ImageStore::write_day(const std::string& path, const Tensor<std::uint8_t>& stack) {
  htns::Container c(htns::DType::u8);
  c.add("images", stack);
  c.save(path);
}

// ------------------------------------------------------------------ splits

namespace {

void check_split_args(const CorpusIndex& corpus, double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) throw RangeError("split fraction must lie strictly between 0 and 1");
  if (corpus.size() < 2) throw RangeError("corpus needs at least 2 samples to split");
}

bool is_eval_day(const DayLabels& eval_days, const Timestamp& t) { return eval_days.contains(t.local_date()); }

}  // namespace

Split<Sample> build_nowcast(const CorpusIndex& corpus, double fraction, const DayLabels& eval_days,
                            const FeatureFn& features) {
  check_split_args(corpus, fraction);
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(corpus.size()) * fraction));
  Split<Sample> out;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& e = corpus.entries()[i];
    Sample s{i, e.time, features ? features(e.time) : std::vector<double>{}, e.pv_kw};
    if (!is_eval_day(eval_days, e.time) && out.train.size() < n_train) {
      out.train.push_back(std::move(s));
    } else {
      out.test.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<SequenceSample> day_sequences(const CorpusIndex& corpus, const std::string& day,
                                          const ForecastWindow& window) {
  std::vector<SequenceSample> out;
  const auto days = corpus.days();
  if (std::find(days.begin(), days.end(), day) == days.end()) return out;
  const auto [first, last] = corpus.day_range(day);
  const Timestamp day_start = corpus.entries()[first].time;
  const Timestamp day_end = corpus.entries()[last - 1].time;
  const std::chrono::minutes history(window.history_minutes), spacing(window.frame_spacing_minutes),
      horizon(window.horizon_minutes), interval(window.anchor_interval_minutes);
  const std::size_t frames = static_cast<std::size_t>(window.history_minutes / window.frame_spacing_minutes) + 1;

  for (Timestamp anchor = day_start + history; anchor + horizon <= day_end; anchor = anchor + interval) {
    SequenceSample s;
    s.anchor = anchor;
    s.target_time = anchor + horizon;
    bool complete = true;
    for (std::size_t k = 0; k < frames && complete; ++k) {
      const auto idx = corpus.find(anchor - history + spacing * static_cast<int>(k));
      if (!idx) {
        complete = false;
        break;
      }
      s.frames.push_back(*idx);
      s.pv_history.push_back(corpus.entries()[*idx].pv_kw);
    }
    const auto target = corpus.find(s.target_time);
    if (!complete || !target) continue;
    s.target_entry = *target;
    s.target_kw = corpus.entries()[*target].pv_kw;
    out.push_back(std::move(s));
  }
  return out;
}

Split<SequenceSample> build_forecast(const CorpusIndex& corpus, double fraction, const DayLabels& eval_days,
                                     const FeatureFn& features, const ForecastWindow& window) {
  check_split_args(corpus, fraction);
  std::vector<SequenceSample> all;
  for (const auto& day : corpus.days()) {
    for (auto& s : day_sequences(corpus, day, window)) all.push_back(std::move(s));
  }
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(all.size()) * fraction));
  std::vector<SequenceSample> train, test;
  for (auto& s : all) {
    if (features) s.features = features(s.anchor);
    if (!is_eval_day(eval_days, s.anchor) && train.size() < n_train) {
      train.push_back(std::move(s));
    } else {
      test.push_back(std::move(s));
    }
  }
  // Purge training windows overlapping any test window.
  auto span_of = [&](const SequenceSample& s) {
    return std::pair{corpus.entries()[s.frames.front()].time, s.target_time};
  };
  std::vector<std::pair<Timestamp, Timestamp>> test_spans;
  for (const auto& s : test) test_spans.push_back(span_of(s));
  Split<SequenceSample> out;
  for (auto& s : train) {
    const auto [a, b] = span_of(s);
    bool overlaps = false;
    for (const auto& [c, d] : test_spans) {
      if (a <= d && c <= b) {
        overlaps = true;
        break;
      }
    }
    if (!overlaps) out.train.push_back(std::move(s));
  }
  out.test = std::move(test);
  return out;
}

// ----------------------------------------------------------------- sources

namespace {

void scale_image(std::span<const std::uint8_t> src, float* dst) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<float>(src[i]) / 255.0f;
}

}  // namespace

NowcastSource::NowcastSource(const CorpusIndex& corpus, const ImageStore& images, std::span<const Sample> samples)
    : corpus_(corpus), images_(images), samples_(samples) {
  if (!samples_.empty()) width_ = samples_.front().features.size();
  for (const auto& s : samples_) {
    if (s.features.size() != width_) throw ShapeError("nowcast samples have differing feature lengths");
  }
}

void NowcastSource::gather(std::span<const std::size_t> indices, float* images, float* extras,
                           float* targets) const {
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& s = samples_[indices[b]];
    scale_image(images_.image(corpus_.entries()[s.entry]), images + b * kImageBytes);
    for (std::size_t j = 0; j < width_; ++j) extras[b * width_ + j] = static_cast<float>(s.features[j]);
    targets[b] = static_cast<float>(s.target_kw);
  }
}

ForecastSource::ForecastSource(const CorpusIndex& corpus, const ImageStore& images,
                               std::span<const SequenceSample> samples)
    : corpus_(corpus), images_(images), samples_(samples) {
  if (!samples_.empty()) {
    frames_ = samples_.front().frames.size();
    width_ = samples_.front().pv_history.size() + samples_.front().features.size();
  }
  for (const auto& s : samples_) {
    if (s.frames.size() != frames_ || s.pv_history.size() + s.features.size() != width_) {
      throw ShapeError("forecast samples have differing layouts");
    }
  }
}

void ForecastSource::gather(std::span<const std::size_t> indices, float* images, float* extras,
                            float* targets) const {
  const std::size_t per_sample = frames_ * kImageBytes;
  for (std::size_t b = 0; b < indices.size(); ++b) {
    const auto& s = samples_[indices[b]];
    for (std::size_t k = 0; k < frames_; ++k) {
      scale_image(images_.image(corpus_.entries()[s.frames[k]]), images + b * per_sample + k * kImageBytes);
    }
    float* x = extras + b * width_;
    for (double v : s.pv_history) *x++ = static_cast<float>(v);
    for (double v : s.features) *x++ = static_cast<float>(v);
    targets[b] = static_cast<float>(s.target_kw);
  }
}

}  // namespace helio::data
