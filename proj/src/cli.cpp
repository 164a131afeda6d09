#include "helio/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <Eigen/Core>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "helio/error.hpp"
#include "helio/ephemeris.hpp"
#include "helio/eval.hpp"
#include "helio/pipeline.hpp"
#include "helio/synth.hpp"
#include "helio/text.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace helio::cli {

namespace {

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  for (auto& item : text::split(s, ',')) {
    if (item.empty()) throw UsageError("empty name in list '" + s + "'");
    out.emplace_back(item);
  }
  return out;
}

void write_rows(const std::string& path, const std::vector<eval::Prediction>& rows) {
  if (const auto parent = std::filesystem::path(path).parent_path(); !parent.empty()) {
    std::filesystem::create_directories(parent);
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path + "'");
  eval::write_curve_csv(f, rows);
}

}  // namespace

void apply_thread_cap() {
  const char* env = std::getenv("HELIO_THREADS");
  if (env == nullptr || *env == '\0') return;
  int n = 0;
  try {
    n = text::parse_number<int>(env, 0);
  } catch (const Error&) {
    n = 0;
  }
  if (n <= 0) throw UsageError(std::string("HELIO_THREADS must be a positive integer, got '") + env + "'");
  Eigen::setNbThreads(n);
#ifdef _OPENMP
  omp_set_num_threads(n);
#endif
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sky-image and meteorology PV power prediction", "helio"};
  app.require_subcommand(1);

  // sun-position
  auto* sun = app.add_subcommand("sun-position", "Solar angles and fisheye image position for one instant");
  ephemeris::GeoLocation site = ephemeris::GeoLocation::stanford();
  ephemeris::ProjectionParams params;
  double image_side = 64.0;
  std::string when;
  sun->add_option("--lat", site.latitude, "Latitude, degrees north")->required();
  sun->add_option("--lon", site.longitude, "Longitude, degrees east")->required();
  sun->add_option("--cam-azimuth", site.camera_azimuth, "Camera azimuth, degrees")->capture_default_str();
  sun->add_option("--time", when, "Timestamp with offset, e.g. 2017-05-01T12:00:00-08:00")->required();
  sun->add_option("--image-side", image_side, "Image side, pixels")->capture_default_str();
  sun->add_option("--gamma", params.gamma, "Radial exponent")->capture_default_str();
  sun->add_option("--y0", params.y_offset_base, "Vertical offset base, pixels")->capture_default_str();
  sun->add_option("--slope", params.y_offset_slope, "Vertical offset slope, pixels per degree")
      ->capture_default_str();

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Normalize raw reanalysis CSV onto a minute grid");
  std::string vars, grid_csv, out_dir, train_end;
  std::optional<std::string> corpus_opt;
  pre->add_option("--vars", vars, "Comma-separated codes (Wind100 allowed); default all");
  pre->add_option("--grid-csv", grid_csv, "Raw long-form meteorology CSV")->required();
  pre->add_option("--out-dir", out_dir, "Output directory")->required();
  pre->add_option("--train-end", train_end, "Last timestamp used for normalization stats")->required();
  pre->add_option("--corpus", corpus_opt, "Corpus directory whose timestamps form the grid");

  // synth
  auto* syn = app.add_subcommand("synth", "Generate a seeded synthetic corpus");
  synth::Options synth_opts;
  std::string profile = "sunny", synth_out;
  syn->add_option("--days", synth_opts.days, "Number of days")->capture_default_str();
  syn->add_option("--profile", profile, "sunny, cloudy or mixed")->capture_default_str();
  syn->add_option("--seed", synth_opts.seed, "Random seed")->capture_default_str();
  syn->add_option("--start-date", synth_opts.start_date, "First local day")->capture_default_str();
  syn->add_option("--out", synth_out, "Output corpus directory")->required();

  // make-dataset
  auto* mk = app.add_subcommand("make-dataset", "Split a corpus into training and test samples");
  std::string task = "nowcast", corpus, ds_out;
  std::optional<double> fraction;
  std::optional<std::string> labels_opt, met_dir;
  mk->add_option("--task", task, "nowcast or forecast")->capture_default_str();
  mk->add_option("--corpus", corpus, "Corpus directory")->required();
  mk->add_option("--out", ds_out, "Dataset directory")->required();
  mk->add_option("--fraction", fraction, "Training fraction (default 0.96 nowcast, 0.9425 forecast)");
  mk->add_option("--labels", labels_opt, "Evaluation days CSV (day,label)");
  mk->add_option("--met-dir", met_dir, "Preprocessed meteorology directory");

  // train
  auto* tr = app.add_subcommand("train", "Train a model");
  std::string config_path, data_dir, checkpoint;
  bool verbose = false;
  tr->add_option("--config", config_path, "Training config JSON")->required();
  tr->add_option("--data-dir", data_dir, "Dataset directory")->required();
  tr->add_option("--out", checkpoint, "Checkpoint path")->required();
  tr->add_flag("--verbose", verbose, "Print the loss after every epoch");

  // eval
  auto* ev = app.add_subcommand("eval", "Score a checkpoint on the test split");
  std::string report_out;
  ev->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
  ev->add_option("--data-dir", data_dir, "Dataset directory")->required();
  ev->add_option("--labels", labels_opt, "Day labels CSV (default: corpus labels)");
  ev->add_option("--out", report_out, "Report JSON path")->required();

  // day-curve
  auto* dc = app.add_subcommand("day-curve", "Truth and prediction for every instant of one day");
  std::string day, curve_out;
  dc->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
  dc->add_option("--data-dir", data_dir, "Dataset directory")->required();
  dc->add_option("--day", day, "Local date YYYY-MM-DD")->required();
  dc->add_option("--out", curve_out, "Curve CSV path")->required();

  // predict
  auto* pr = app.add_subcommand("predict", "Prediction for one corpus instant");
  pr->add_option("--checkpoint", checkpoint, "Checkpoint path")->required();
  pr->add_option("--data-dir", data_dir, "Dataset directory")->required();
  pr->add_option("--time", when, "Corpus timestamp (forecast: the anchor)")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "helio: " << msg << "\n";
    return kUsageError;
  }

  try {
    apply_thread_cap();
    if (sun->parsed()) {
      const auto t = Timestamp::parse(when);
      site.validate();
      params = [&] {
        auto p = ephemeris::ProjectionParams::for_image_side(image_side);
        p.gamma = params.gamma;
        p.y_offset_base = params.y_offset_base;
        p.y_offset_slope = params.y_offset_slope;
        return p;
      }();
      params.validate();
      const auto angles = ephemeris::solar_angles(site, t);
      out << fixed(angles.azimuth) << ',' << fixed(angles.elevation) << ',';
      if (angles.elevation >= 0.0) {
        const auto p = ephemeris::project_sun(
            {ephemeris::relative_azimuth(angles.azimuth, site.camera_azimuth), angles.elevation}, params);
        out << fixed(p.x) << ',' << fixed(p.y) << ',' << fixed(p.x / image_side) << ',' << fixed(p.y / image_side);
      } else {
        out << ",," << fixed(ephemeris::kBelowHorizon.first) << ',' << fixed(ephemeris::kBelowHorizon.second);
      }
      out << "\n";
    } else if (pre->parsed()) {
      pipeline::PreprocessRequest r{grid_csv, split_list(vars), out_dir, Timestamp::parse(train_end), corpus_opt};
      const auto codes = pipeline::preprocess(r);
      out << "preprocessed " << codes.size() << " variables into " << out_dir << "\n";
    } else if (syn->parsed()) {
      synth_opts.profile = synth::parse_profile(profile);
      const auto c = synth::generate(synth_opts);
      synth::write_corpus(c, synth_opts, synth_out);
      out << "wrote " << c.index.size() << " frames over " << c.days.size() << " days to " << synth_out << "\n";
    } else if (mk->parsed()) {
      pipeline::DatasetRequest r{model::parse_task(task), corpus, ds_out, fraction, labels_opt, met_dir};
      const auto s = pipeline::make_dataset(r);
      out << "train " << s.train << " test " << s.test << "\n";
    } else if (tr->parsed()) {
      const auto config = pipeline::TrainConfig::from_json(pipeline::read_text(config_path));
      model::EpochCallback cb;
      if (verbose) cb = [&](std::size_t epoch, double loss) { out << "epoch " << epoch + 1 << " loss " << loss << "\n"; };
      const auto s = pipeline::train(config, data_dir, checkpoint, cb);
      out << "trained on " << s.samples << " samples, final loss " << s.loss_trace.back() << "\n";
    } else if (ev->parsed()) {
      auto m = pipeline::LoadedModel::load(checkpoint);
      const auto dataset = pipeline::Dataset::open(data_dir);
      std::optional<data::DayLabels> labels;
      if (labels_opt) labels = data::read_day_labels_file(*labels_opt);
      const auto report = pipeline::evaluate(m, dataset, labels);
      if (const auto parent = std::filesystem::path(report_out).parent_path(); !parent.empty()) {
        std::filesystem::create_directories(parent);
      }
      pipeline::write_text(report_out, report.to_json());
      out << eval::format_table(std::vector<eval::EvalReport>{report});
    } else if (dc->parsed()) {
      auto m = pipeline::LoadedModel::load(checkpoint);
      const auto dataset = pipeline::Dataset::open(data_dir);
      write_rows(curve_out, pipeline::day_curve(m, dataset, day));
    } else if (pr->parsed()) {
      auto m = pipeline::LoadedModel::load(checkpoint);
      const auto dataset = pipeline::Dataset::open(data_dir);
      const auto p = pipeline::predict_at(m, dataset, Timestamp::parse(when));
      eval::write_curve_csv(out, std::vector<eval::Prediction>{p});
    }
  } catch (const UsageError& e) {
    err << "helio: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "helio: " << msg << "\n";
    return kRuntimeError;
  }
  return kOk;
}

}  // namespace helio::cli
