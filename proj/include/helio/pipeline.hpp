// File-level workflow shared by the CLI and the acceptance suite:
// preprocess -> make-dataset -> train -> eval / day-curve / predict.
#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "helio/dataset.hpp"
#include "helio/eval.hpp"
#include "helio/metpipe.hpp"
#include "helio/model.hpp"

namespace helio::pipeline {

// ------------------------------------------------------------- preprocess

struct PreprocessRequest {
  std::string raw_csv;                 ///< long-form raw meteorology
  std::vector<std::string> variables;  ///< codes or Wind100; empty selects all ten
  std::string out_dir;
  Timestamp train_end;  ///< stats are fitted on grid rows at or before this
  /// Corpus whose minute timestamps form the output grid. Without it the grid
  /// is every minute between the earliest and latest valid times.
  std::optional<std::string> corpus_dir;
};

/// Writes <code>.csv per variable and norm_stats.json. Returns the codes.
std::vector<std::string> preprocess(const PreprocessRequest& request);

inline constexpr const char* kNormStatsFile = "norm_stats.json";

// ------------------------------------------------------------- datasets

struct DatasetRequest {
  model::Task task = model::Task::nowcast;
  std::string corpus_dir;
  std::string out_dir;
  std::optional<double> fraction;  ///< default 0.96 nowcast, 0.9425 forecast
  std::optional<std::string> labels_file;  ///< evaluation days; default: corpus eval_days.csv if present
  std::optional<std::string> met_dir;      ///< preprocess output for meteorological features
};

struct DatasetSummary {
  std::size_t train = 0;
  std::size_t test = 0;
};

/// Writes dataset.json, train.csv, test.csv and eval_days.csv.
DatasetSummary make_dataset(const DatasetRequest& request);

/// A dataset directory opened for training or evaluation.
class Dataset {
 public:
  static Dataset open(const std::string& dir);

  model::Task task() const { return task_; }
  const data::CorpusIndex& corpus() const { return corpus_; }
  const data::CorpusMeta& meta() const { return meta_; }
  const data::ImageStore& images() const { return *images_; }
  const data::DayLabels& eval_days() const { return eval_days_; }
  bool has_met() const { return met_.has_value(); }

  /// Feature function for a selection. Throws UsageError when meteorology is
  /// requested but the dataset has none, or a variable was not preprocessed.
  data::FeatureFn features(const met::FeatureSelection& selection) const;

  /// Samples listed in train.csv / test.csv with features filled in.
  data::Split<data::Sample> nowcast_split(const data::FeatureFn& features) const;
  data::Split<data::SequenceSample> forecast_split(const data::FeatureFn& features) const;

 private:
  std::string dir_;
  model::Task task_ = model::Task::nowcast;
  data::CorpusIndex corpus_;
  data::CorpusMeta meta_;
  std::shared_ptr<data::ImageStore> images_;
  std::optional<met::FeatureStore> met_;
  data::DayLabels eval_days_;
};

// ------------------------------------------------------------- training

/// Training config JSON: {task, variables, sun_position, epochs, batch_size,
/// seed, lr} plus optional dense_units and subsample (keep every k-th
/// training sample).
struct TrainConfig {
  model::Task task = model::Task::nowcast;
  met::FeatureSelection features;
  std::size_t epochs = 100;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  double lr = 3e-6;
  std::size_t dense_units = 1024;
  std::size_t subsample = 1;

  /// Throws UsageError naming the first bad field or variable.
  static TrainConfig from_json(std::string_view text);
  std::string to_json() const;
};

struct TrainSummary {
  std::size_t samples = 0;
  std::vector<double> loss_trace;
};

/// Writes the checkpoint, "<out>.json" (config and loss trace) and
/// "<out>.adam" (optimizer state, f64).
TrainSummary train(const TrainConfig& config, const std::string& dataset_dir, const std::string& out,
                   const model::EpochCallback& on_epoch = {});

/// A trained network restored from its checkpoint and sidecar.
struct LoadedModel {
  TrainConfig config;
  model::ModelConfig model;
  std::string id;  ///< checkpoint file name
  std::unique_ptr<model::Network<float>> net;

  static LoadedModel load(const std::string& checkpoint);
};

// ------------------------------------------------------------- evaluation

/// Predictions over the dataset's test split, in time order.
std::vector<eval::Prediction> predict_test(LoadedModel& model, const Dataset& dataset);

/// Scores the test split. Labels default to the corpus day labels.
eval::EvalReport evaluate(LoadedModel& model, const Dataset& dataset, const std::optional<data::DayLabels>& labels);

/// Every valid instant of one corpus day: each entry for nowcast, each
/// complete anchor (timed at its target) for forecast. Throws UsageError
/// for an unknown day.
std::vector<eval::Prediction> day_curve(LoadedModel& model, const Dataset& dataset, const std::string& day);

/// One prediction at a corpus time (the anchor for forecast).
eval::Prediction predict_at(LoadedModel& model, const Dataset& dataset, const Timestamp& when);

/// Writes text to a file, throwing IoError on failure.
void write_text(const std::string& path, std::string_view text);
std::string read_text(const std::string& path);

}  // namespace helio::pipeline
