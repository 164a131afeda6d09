#include "helio/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <map>
#include <set>
#include <sstream>

#include "helio/error.hpp"
#include "helio/htns.hpp"
#include "helio/met_csv.hpp"
#include "helio/text.hpp"

namespace helio::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

constexpr const char* kDatasetFile = "dataset.json";
constexpr const char* kTrainFile = "train.csv";
constexpr const char* kTestFile = "test.csv";
constexpr const char* kEvalDaysFile = "eval_days.csv";
constexpr const char* kNowcastHeader = "timestamp,pv_kw";
constexpr const char* kForecastHeader = "anchor,target_time,target_kw";

std::ifstream open_in(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IoError("cannot open '" + p.string() + "'");
  return in;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write '" + p.string() + "'");
  return out;
}

json parse_json(const fs::path& p) {
  try {
    return json::parse(read_text(p.string()));
  } catch (const json::exception& e) {
    throw IoError(p.string() + ": " + e.what());
  }
}

data::CorpusIndex read_corpus_index(const fs::path& dir) {
  auto in = open_in(dir / data::CorpusPaths::kIndex);
  return data::CorpusIndex::read_csv(in);
}

std::vector<Timestamp> read_times(const fs::path& p, const char* header) {
  auto in = open_in(p);
  std::string line;
  if (!std::getline(in, line) || text::trim_cr(line) != header) {
    throw IoError(p.string() + " must start with '" + header + "'");
  }
  std::vector<Timestamp> out;
  while (std::getline(in, line)) {
    line = text::trim_cr(line);
    if (line.empty()) continue;
    out.push_back(Timestamp::parse(text::split(line, ',').at(0)));
  }
  return out;
}

std::string checkpoint_sidecar(const std::string& path) { return path + ".json"; }
std::string adam_sidecar(const std::string& path) { return path + ".adam"; }

model::ModelConfig model_config(const TrainConfig& c) {
  model::ModelConfig m;
  m.task = c.task;
  m.config.base.dense_units = c.dense_units;
  m.config.base.feature_length = c.features.length();
  m.config.validate();
  return m;
}

template <typename S>
std::vector<S> every_kth(std::vector<S> in, std::size_t k) {
  if (k <= 1) return in;
  std::vector<S> out;
  for (std::size_t i = 0; i < in.size(); i += k) out.push_back(std::move(in[i]));
  return out;
}

}  // namespace

void write_text(const std::string& path, std::string_view text) {
  auto out = open_out(path);
  out << text;
  if (!out) throw IoError("failed writing '" + path + "'");
}

std::string read_text(const std::string& path) {
  auto in = open_in(path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// ------------------------------------------------------------- preprocess

std::vector<std::string> preprocess(const PreprocessRequest& request) {
  std::vector<std::string> names = request.variables;
  if (names.empty()) {
    for (const auto& v : met::catalogue()) names.push_back(v.code);
  }
  const auto codes = met::expand_variables(names);
  const auto raw = met::read_raw_csv_file(request.raw_csv);
  for (const auto& code : codes) {
    if (!raw.contains(code)) throw UsageError("variable " + code + " is not in " + request.raw_csv);
  }

  std::vector<Timestamp> grid;
  if (request.corpus_dir) {
    const auto corpus = read_corpus_index(*request.corpus_dir);
    for (const auto& e : corpus.entries()) grid.push_back(e.time);
  } else {
    std::optional<Timestamp> lo, hi;
    for (const auto& code : codes) {
      const auto& input = raw.at(code);
      const auto series = input.variable.has_step ? met::reconstruct_timestamps(input) : input;
      if (series.rows.empty()) continue;
      if (!lo || series.rows.front().time < *lo) lo = series.rows.front().time;
      if (!hi || *hi < series.rows.back().time) hi = series.rows.back().time;
    }
    if (!lo) throw IntegrityError("raw meteorology has no rows");
    for (Timestamp t = *lo; t <= *hi; t = t + std::chrono::minutes(1)) grid.push_back(t);
  }

  const auto out = met::preprocess(raw, codes, grid, request.train_end);
  fs::create_directories(request.out_dir);
  for (const auto& code : codes) {
    auto f = open_out(fs::path(request.out_dir) / (code + ".csv"));
    met::write_series_csv(f, out.normalized.at(code));
  }
  write_text((fs::path(request.out_dir) / kNormStatsFile).string(), out.stats.to_json());
  return codes;
}

// ------------------------------------------------------------- datasets

DatasetSummary make_dataset(const DatasetRequest& request) {
  const fs::path corpus_dir(request.corpus_dir);
  const auto corpus = read_corpus_index(corpus_dir);
  const double fraction = request.fraction.value_or(request.task == model::Task::nowcast ? 0.96 : 0.9425);

  data::DayLabels eval_days;
  if (request.labels_file) {
    eval_days = data::read_day_labels_file(*request.labels_file);
  } else if (fs::exists(corpus_dir / data::CorpusPaths::kEvalDays)) {
    eval_days = data::read_day_labels_file((corpus_dir / data::CorpusPaths::kEvalDays).string());
  }

  const fs::path out_dir(request.out_dir);
  fs::create_directories(out_dir);
  DatasetSummary summary;
  auto write_split = [&](const auto& split, const char* header, auto&& row) {
    for (const auto& [name, samples] : {std::pair{kTrainFile, &split.train}, std::pair{kTestFile, &split.test}}) {
      auto f = open_out(out_dir / name);
      f << header << '\n';
      for (const auto& s : *samples) f << row(s) << '\n';
    }
    summary.train = split.train.size();
    summary.test = split.test.size();
  };
  if (request.task == model::Task::nowcast) {
    write_split(data::build_nowcast(corpus, fraction, eval_days), kNowcastHeader, [](const data::Sample& s) {
      return s.time.to_string() + "," + text::format_double(s.target_kw);
    });
  } else {
    write_split(data::build_forecast(corpus, fraction, eval_days), kForecastHeader,
                [](const data::SequenceSample& s) {
                  return s.anchor.to_string() + "," + s.target_time.to_string() + "," +
                         text::format_double(s.target_kw);
                });
  }
  {
    auto f = open_out(out_dir / kEvalDaysFile);
    data::write_day_labels(f, eval_days);
  }

  const auto out_abs = fs::absolute(out_dir);
  ordered_json j;
  j["task"] = model::task_name(request.task);
  j["corpus"] = fs::proximate(fs::absolute(corpus_dir), out_abs).generic_string();
  j["met_dir"] = request.met_dir ? json(fs::proximate(fs::absolute(*request.met_dir), out_abs).generic_string())
                                 : json(nullptr);
  j["fraction"] = fraction;
  j["train"] = summary.train;
  j["test"] = summary.test;
  write_text((out_dir / kDatasetFile).string(), j.dump(2) + "\n");
  return summary;
}

Dataset Dataset::open(const std::string& dir) {
  Dataset d;
  d.dir_ = dir;
  const fs::path root(dir);
  const auto j = parse_json(root / kDatasetFile);
  try {
    d.task_ = model::parse_task(j.at("task").get<std::string>());
    const fs::path corpus_dir = root / j.at("corpus").get<std::string>();
    d.corpus_ = read_corpus_index(corpus_dir);
    d.meta_ = data::CorpusMeta::from_json(read_text((corpus_dir / data::CorpusPaths::kMeta).string()));
    d.images_ = std::make_shared<data::ImageStore>(corpus_dir.string());
    d.images_->load_all(d.corpus_);
    if (!j.at("met_dir").is_null()) {
      const fs::path met_dir = root / j.at("met_dir").get<std::string>();
      met::FeatureStore store;
      for (const auto& spec : met::catalogue()) {
        const auto p = met_dir / (spec.code + ".csv");
        if (!fs::exists(p)) continue;
        auto in = open_in(p);
        store.add(met::read_series_csv(in, spec));
      }
      d.met_ = std::move(store);
    }
  } catch (const json::exception& e) {
    throw IoError(std::string(kDatasetFile) + ": " + e.what());
  }
  d.eval_days_ = data::read_day_labels_file((root / kEvalDaysFile).string());
  return d;
}

data::FeatureFn Dataset::features(const met::FeatureSelection& selection) const {
  const auto codes = met::expand_variables(selection.variables);
  if (!codes.empty()) {
    if (!met_) throw UsageError("config selects meteorological variables but the dataset has no met_dir");
    for (const auto& c : codes) {
      if (!met_->contains(c)) throw UsageError("variable " + c + " was not preprocessed for this dataset");
    }
  }
  if (codes.empty() && !selection.sun_position) return {};
  const auto site = meta_.site;
  const auto side = static_cast<double>(meta_.image_side);
  const auto* store = met_ ? &*met_ : nullptr;
  return [selection, site, side, store](const Timestamp& t) {
    std::optional<std::pair<double, double>> sun;
    if (selection.sun_position) {
      sun = ephemeris::sun_feature(site, t, ephemeris::ProjectionParams::for_image_side(side), side);
    }
    static const met::FeatureStore empty;
    return (store ? *store : empty).build_feature_vector(selection, t, sun);
  };
}

data::Split<data::Sample> Dataset::nowcast_split(const data::FeatureFn& features) const {
  if (task_ != model::Task::nowcast) throw UsageError("dataset was built for the forecast task");
  data::Split<data::Sample> out;
  for (auto [file, dst] : {std::pair{kTrainFile, &out.train}, std::pair{kTestFile, &out.test}}) {
    for (const auto& t : read_times(fs::path(dir_) / file, kNowcastHeader)) {
      const auto idx = corpus_.find(t);
      if (!idx) throw IntegrityError(std::string(file) + ": " + t.to_string() + " is not in the corpus");
      const auto& e = corpus_.entries()[*idx];
      dst->push_back({*idx, e.time, features ? features(e.time) : std::vector<double>{}, e.pv_kw});
    }
  }
  return out;
}

data::Split<data::SequenceSample> Dataset::forecast_split(const data::FeatureFn& features) const {
  if (task_ != model::Task::forecast) throw UsageError("dataset was built for the nowcast task");
  std::map<Timestamp, data::SequenceSample> by_anchor;
  for (const auto& day : corpus_.days()) {
    for (auto& s : data::day_sequences(corpus_, day)) by_anchor.emplace(s.anchor, std::move(s));
  }
  data::Split<data::SequenceSample> out;
  for (auto [file, dst] : {std::pair{kTrainFile, &out.train}, std::pair{kTestFile, &out.test}}) {
    for (const auto& t : read_times(fs::path(dir_) / file, kForecastHeader)) {
      const auto it = by_anchor.find(t);
      if (it == by_anchor.end()) throw IntegrityError(std::string(file) + ": no complete window at " + t.to_string());
      auto s = it->second;
      if (features) s.features = features(s.anchor);
      dst->push_back(std::move(s));
    }
  }
  return out;
}

// ------------------------------------------------------------- training

TrainConfig TrainConfig::from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw UsageError(std::string("training config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw UsageError("training config must be a JSON object");
  static const std::set<std::string> known{"task",    "variables", "sun_position", "epochs",   "batch_size",
                                           "seed",    "lr",        "dense_units",  "subsample"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw UsageError("unknown training config field '" + key + "'");
  }
  TrainConfig c;
  try {
    if (j.contains("task")) c.task = model::parse_task(j["task"].get<std::string>());
    if (j.contains("variables")) c.features.variables = j["variables"].get<std::vector<std::string>>();
    if (j.contains("sun_position")) c.features.sun_position = j["sun_position"].get<bool>();
    if (j.contains("epochs")) c.epochs = j["epochs"].get<std::size_t>();
    if (j.contains("batch_size")) c.batch_size = j["batch_size"].get<std::size_t>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("lr")) c.lr = j["lr"].get<double>();
    if (j.contains("dense_units")) c.dense_units = j["dense_units"].get<std::size_t>();
    if (j.contains("subsample")) c.subsample = j["subsample"].get<std::size_t>();
  } catch (const json::exception& e) {
    throw UsageError(std::string("training config: ") + e.what());
  }
  met::expand_variables(c.features.variables);
  if (c.epochs == 0) throw UsageError("training config: epochs must be positive");
  if (c.batch_size < 2) throw UsageError("training config: batch_size must be at least 2");
  if (!(c.lr >= 0.0)) throw UsageError("training config: lr must be non-negative");
  if (c.dense_units == 0) throw UsageError("training config: dense_units must be positive");
  if (c.subsample == 0) throw UsageError("training config: subsample must be positive");
  return c;
}

std::string TrainConfig::to_json() const {
  ordered_json j;
  j["task"] = model::task_name(task);
  j["variables"] = features.variables;
  j["sun_position"] = features.sun_position;
  j["epochs"] = epochs;
  j["batch_size"] = batch_size;
  j["seed"] = seed;
  j["lr"] = lr;
  j["dense_units"] = dense_units;
  j["subsample"] = subsample;
  return j.dump(2) + "\n";
}

TrainSummary train(const TrainConfig& config, const std::string& dataset_dir, const std::string& out,
                   const model::EpochCallback& on_epoch) {
  const auto dataset = Dataset::open(dataset_dir);
  if (dataset.task() != config.task) {
    throw UsageError("config task " + model::task_name(config.task) + " does not match dataset task " +
                     model::task_name(dataset.task()));
  }
  const auto mc = model_config(config);
  model::Network<float> net(model::network_shape(mc), config.seed);
  const auto features = dataset.features(config.features);
  const model::TrainOptions options{config.epochs, config.batch_size, config.seed, config.lr};

  TrainSummary summary;
  std::optional<model::TrainResult<float>> result;
  if (config.task == model::Task::nowcast) {
    const auto samples = every_kth(dataset.nowcast_split(features).train, config.subsample);
    data::NowcastSource source(dataset.corpus(), dataset.images(), samples);
    summary.samples = source.size();
    result = model::train(net, source, options, on_epoch);
  } else {
    const auto samples = every_kth(dataset.forecast_split(features).train, config.subsample);
    data::ForecastSource source(dataset.corpus(), dataset.images(), samples);
    summary.samples = source.size();
    result = model::train(net, source, options, on_epoch);
  }
  summary.loss_trace = result->loss_trace;

  if (const auto parent = fs::path(out).parent_path(); !parent.empty()) fs::create_directories(parent);
  net.to_container(htns::DType::f32).save(out);
  model::adam_to_container(result->optimizer, htns::DType::f64).save(adam_sidecar(out));
  ordered_json side;
  side["config"] = json::parse(config.to_json());
  side["label"] = config.features.label();
  side["feature_length"] = config.features.length();
  side["train_samples"] = summary.samples;
  side["loss_trace"] = summary.loss_trace;
  write_text(checkpoint_sidecar(out), side.dump(2) + "\n");
  return summary;
}

LoadedModel LoadedModel::load(const std::string& checkpoint) {
  LoadedModel m;
  const auto side = parse_json(checkpoint_sidecar(checkpoint));
  try {
    m.config = TrainConfig::from_json(side.at("config").dump());
  } catch (const json::exception& e) {
    throw IoError(checkpoint_sidecar(checkpoint) + ": " + e.what());
  }
  m.model = model_config(m.config);
  m.id = fs::path(checkpoint).filename().string();
  m.net = std::make_unique<model::Network<float>>(model::network_shape(m.model), m.config.seed);
  m.net->load(htns::Container::load(checkpoint));
  return m;
}

// ------------------------------------------------------------- evaluation

namespace {

void check_task(const LoadedModel& model, const Dataset& dataset) {
  if (model.config.task != dataset.task()) {
    throw UsageError("checkpoint task " + model::task_name(model.config.task) + " does not match dataset task " +
                     model::task_name(dataset.task()));
  }
}

std::vector<eval::Prediction> score(LoadedModel& model, const Dataset& dataset,
                                    const std::vector<data::Sample>& samples) {
  data::NowcastSource source(dataset.corpus(), dataset.images(), samples);
  const auto p = model::predict_all(*model.net, source);
  std::vector<eval::Prediction> out;
  for (std::size_t i = 0; i < samples.size(); ++i) out.push_back({samples[i].time, samples[i].target_kw, p[i]});
  return out;
}

std::vector<eval::Prediction> score(LoadedModel& model, const Dataset& dataset,
                                    const std::vector<data::SequenceSample>& samples) {
  data::ForecastSource source(dataset.corpus(), dataset.images(), samples);
  const auto p = model::predict_all(*model.net, source);
  std::vector<eval::Prediction> out;
  for (std::size_t i = 0; i < samples.size(); ++i) out.push_back({samples[i].target_time, samples[i].target_kw, p[i]});
  return out;
}

}  // namespace

std::vector<eval::Prediction> predict_test(LoadedModel& model, const Dataset& dataset) {
  check_task(model, dataset);
  const auto features = dataset.features(model.config.features);
  auto out = model.config.task == model::Task::nowcast ? score(model, dataset, dataset.nowcast_split(features).test)
                                                        : score(model, dataset, dataset.forecast_split(features).test);
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.time < b.time; });
  return out;
}

eval::EvalReport evaluate(LoadedModel& model, const Dataset& dataset, const std::optional<data::DayLabels>& labels) {
  const auto rows = predict_test(model, dataset);
  return eval::evaluate(rows, labels ? *labels : dataset.corpus().labels(), model.id, model.config.features.label());
}

std::vector<eval::Prediction> day_curve(LoadedModel& model, const Dataset& dataset, const std::string& day) {
  check_task(model, dataset);
  const auto days = dataset.corpus().days();
  if (std::find(days.begin(), days.end(), day) == days.end()) throw UsageError("day " + day + " is not in the corpus");
  const auto features = dataset.features(model.config.features);
  if (model.config.task == model::Task::nowcast) {
    std::vector<data::Sample> samples;
    const auto [first, last] = dataset.corpus().day_range(day);
    for (std::size_t i = first; i < last; ++i) {
      const auto& e = dataset.corpus().entries()[i];
      samples.push_back({i, e.time, features ? features(e.time) : std::vector<double>{}, e.pv_kw});
    }
    return score(model, dataset, samples);
  }
  auto samples = data::day_sequences(dataset.corpus(), day);
  if (features) {
    for (auto& s : samples) s.features = features(s.anchor);
  }
  return score(model, dataset, samples);
}

eval::Prediction predict_at(LoadedModel& model, const Dataset& dataset, const Timestamp& when) {
  check_task(model, dataset);
  const auto features = dataset.features(model.config.features);
  if (model.config.task == model::Task::nowcast) {
    const auto idx = dataset.corpus().find(when);
    if (!idx) throw UsageError(when.to_string() + " is not in the corpus");
    const auto& e = dataset.corpus().entries()[*idx];
    return score(model, dataset, {{*idx, e.time, features ? features(e.time) : std::vector<double>{}, e.pv_kw}})
        .front();
  }
  const auto day = when.with_offset(std::chrono::minutes(dataset.meta().utc_offset_minutes)).local_date();
  for (auto& s : data::day_sequences(dataset.corpus(), day)) {
    if (s.anchor != when) continue;
    if (features) s.features = features(s.anchor);
    return score(model, dataset, std::vector<data::SequenceSample>{s}).front();
  }
  throw UsageError("no complete forecast window is anchored at " + when.to_string());
}

}  // namespace helio::pipeline
