// Image/PV corpus, chronological splits and training-sample assembly.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "helio/ephemeris.hpp"
#include "helio/model.hpp"
#include "helio/tensor.hpp"
#include "helio/time.hpp"

namespace helio::data {

enum class DayLabel { sunny, cloudy, unlabeled };

std::string label_name(DayLabel label);
/// Throws UsageError for anything other than sunny, cloudy or unlabeled.
DayLabel parse_day_label(std::string_view text);

/// Day ("YYYY-MM-DD", local) -> sky condition.
using DayLabels = std::map<std::string, DayLabel>;

/// "day,label" rows with a header.
DayLabels read_day_labels(std::istream& in);
DayLabels read_day_labels_file(const std::string& path);
void write_day_labels(std::ostream& out, const DayLabels& labels);

inline constexpr std::size_t kImageSide = 64;
inline constexpr std::size_t kImageChannels = 3;
inline constexpr std::size_t kImageBytes = kImageChannels * kImageSide * kImageSide;

struct CorpusEntry {
  Timestamp time;  ///< local civil time
  double pv_kw = 0.0;
  std::string tensor_file;  ///< relative to the corpus directory
  std::size_t frame_index = 0;
};

inline constexpr const char* kIndexHeader = "timestamp,day_label,pv_kw,tensor_file,frame_index";

/// Minute-resolution corpus index. Entries are unique and sorted by time.
class CorpusIndex {
 public:
  /// Appends an entry later than every existing one. Throws IntegrityError on
  /// ordering or a negative power value.
  void add(CorpusEntry entry);
  const std::vector<CorpusEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  void set_label(const std::string& day, DayLabel label) { labels_[day] = label; }
  DayLabel label(const std::string& day) const;
  const DayLabels& labels() const { return labels_; }

  std::optional<std::size_t> find(const Timestamp& when) const;
  /// Distinct local dates in order.
  std::vector<std::string> days() const;
  /// Entry positions [first, last) of one local date.
  std::pair<std::size_t, std::size_t> day_range(const std::string& day) const;

  void write_csv(std::ostream& out) const;
  static CorpusIndex read_csv(std::istream& in);

 private:
  std::vector<CorpusEntry> entries_;
  DayLabels labels_;
};

/// Day image stacks: one u8 HTNS file per day holding [minutes, 3, 64, 64]
/// under the entry name "images".
class ImageStore {
 public:
  explicit ImageStore(std::string root) : root_(std::move(root)) {}

  /// Loads every tensor file referenced by the index.
  void load_all(const CorpusIndex& index);
  /// Pixels of one entry, channel-major, 0..255.
  std::span<const std::uint8_t> image(const CorpusEntry& entry) const;

  static void write_day(const std::string& path, const Tensor<std::uint8_t>& stack);

 private:
  std::string root_;
  std::map<std::string, Tensor<std::uint8_t>> stacks_;
};

/// Site and image geometry shared by every entry of a corpus.
struct CorpusMeta {
  ephemeris::GeoLocation site = ephemeris::GeoLocation::stanford();
  int utc_offset_minutes = -480;
  std::size_t image_side = kImageSide;

  std::string to_json() const;
  static CorpusMeta from_json(std::string_view text);
};

/// Corpus directory layout.
struct CorpusPaths {
  static constexpr const char* kIndex = "index.csv";
  static constexpr const char* kMeta = "corpus.json";
  static constexpr const char* kMet = "met.csv";
  static constexpr const char* kEvalDays = "eval_days.csv";
  static constexpr const char* kImages = "images";
};

/// Feature vector for an anchor time (meteorology, then the sun pair).
using FeatureFn = std::function<std::vector<double>(const Timestamp&)>;

/// Nowcast instance: the image at `time` and its PV value.
struct Sample {
  std::size_t entry = 0;
  Timestamp time;
  std::vector<double> features;
  double target_kw = 0.0;
};

/// Forecast instance: 16 frames ending at the anchor, their PV values, and
/// the PV value 15 minutes after the anchor.
struct SequenceSample {
  std::vector<std::size_t> frames;
  std::vector<double> pv_history;
  Timestamp anchor;
  Timestamp target_time;
  std::size_t target_entry = 0;
  std::vector<double> features;
  double target_kw = 0.0;
};

template <typename S>
struct Split {
  std::vector<S> train;
  std::vector<S> test;
};

/// Chronological split. Samples on `eval_days` always go to test; the first
/// floor(N * fraction) of the others (N counts every sample) go to train and
/// the rest to test. Throws RangeError unless 0 < fraction < 1 or when the
/// corpus has fewer than two entries.
Split<Sample> build_nowcast(const CorpusIndex& corpus, double fraction, const DayLabels& eval_days,
                            const FeatureFn& features = {});

struct ForecastWindow {
  int history_minutes = 15;
  int frame_spacing_minutes = 1;
  int horizon_minutes = 15;
  int anchor_interval_minutes = 2;
};

/// Anchor times of one day: first entry + history, every anchor interval,
/// keeping only anchors whose frames and target all exist.
std::vector<SequenceSample> day_sequences(const CorpusIndex& corpus, const std::string& day,
                                          const ForecastWindow& window = {});

/// Chronological forecast split with the same eval-day rule. Training
/// samples whose span (first frame to target) overlaps any test span are
/// dropped.
Split<SequenceSample> build_forecast(const CorpusIndex& corpus, double fraction, const DayLabels& eval_days,
                                     const FeatureFn& features = {}, const ForecastWindow& window = {});

/// Nowcast training view: images scaled to [0, 1], extras = features.
class NowcastSource final : public model::SampleSource {
 public:
  NowcastSource(const CorpusIndex& corpus, const ImageStore& images, std::span<const Sample> samples);
  std::size_t size() const override { return samples_.size(); }
  std::size_t image_channels() const override { return kImageChannels; }
  std::size_t image_side() const override { return kImageSide; }
  std::size_t extra_width() const override { return width_; }
  void gather(std::span<const std::size_t> indices, float* images, float* extras, float* targets) const override;

 private:
  const CorpusIndex& corpus_;
  const ImageStore& images_;
  std::span<const Sample> samples_;
  std::size_t width_ = 0;
};

/// Forecast training view: frames stacked on channels, extras = PV history
/// then features.
class ForecastSource final : public model::SampleSource {
 public:
  ForecastSource(const CorpusIndex& corpus, const ImageStore& images, std::span<const SequenceSample> samples);
  std::size_t size() const override { return samples_.size(); }
  std::size_t image_channels() const override { return frames_ * kImageChannels; }
  std::size_t image_side() const override { return kImageSide; }
  std::size_t extra_width() const override { return width_; }
  void gather(std::span<const std::size_t> indices, float* images, float* extras, float* targets) const override;

 private:
  const CorpusIndex& corpus_;
  const ImageStore& images_;
  std::span<const SequenceSample> samples_;
  std::size_t frames_ = 0;
  std::size_t width_ = 0;
};

}  // namespace helio::data
