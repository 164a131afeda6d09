#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helio/cli.hpp"
#include "helio/ephemeris.hpp"
#include "helio/eval.hpp"
#include "helio/pipeline.hpp"
#include "helio/text.hpp"

using namespace helio;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void put(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

/// Scratch directory removed on destruction.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& rel) const { return (path / rel).string(); }
};

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  auto r = run({});
  EXPECT_EQ(r.code, 2);
  r = run({"frobnicate"});
  EXPECT_EQ(r.code, 2);
  r = run({"synth", "--out", "x", "--bogus"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("--bogus"), std::string::npos);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
  r = run({"sun-position", "--lat", "37", "--lon", "-122", "--time", "yesterday"});
  EXPECT_EQ(r.code, 2);
  r = run({"synth", "--out", "x", "--profile", "foggy"});
  EXPECT_EQ(r.code, 2);
}

TEST(Cli, HelpExitsZero) {
  auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("sun-position"), std::string::npos);
  r = run({"train", "--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("--config"), std::string::npos);
}

TEST(Cli, SunPositionRow) {
  auto r = run({"sun-position", "--lat", "37.427", "--lon", "-122.174", "--cam-azimuth", "194", "--time",
                "2017-05-01T12:00:00-08:00"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto site = ephemeris::GeoLocation::stanford();
  const auto t = Timestamp::parse("2017-05-01T12:00:00-08:00");
  const auto a = ephemeris::solar_angles(site, t);
  const auto p = ephemeris::project_sun({ephemeris::relative_azimuth(a.azimuth, 194.0), a.elevation},
                                        ephemeris::ProjectionParams{});
  const std::string row = r.out.substr(0, r.out.find('\n'));
  const auto f = text::split(row, ',');
  ASSERT_EQ(f.size(), 6u);
  EXPECT_NEAR(text::parse_number<double>(f[0], 1), a.azimuth, 1e-6);
  EXPECT_NEAR(text::parse_number<double>(f[1], 1), a.elevation, 1e-6);
  EXPECT_NEAR(text::parse_number<double>(f[2], 1), p.x, 1e-6);
  EXPECT_NEAR(text::parse_number<double>(f[3], 1), p.y, 1e-6);
  EXPECT_NEAR(text::parse_number<double>(f[4], 1), p.x / 64.0, 1e-6);
  EXPECT_NEAR(text::parse_number<double>(f[5], 1), p.y / 64.0, 1e-6);
}

TEST(Cli, SunPositionAtNightUsesSentinel) {
  auto r = run({"sun-position", "--lat", "37.427", "--lon", "-122.174", "--time", "2017-05-01T00:00:00-08:00"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find(",,-1.000000,-1.000000"), std::string::npos) << r.out;
}

TEST(Cli, SunPositionOutOfRangeYearIsRuntimeError) {
  auto r = run({"sun-position", "--lat", "37.427", "--lon", "-122.174", "--time", "2077-05-01T00:00:00Z"});
  EXPECT_EQ(r.code, 1);
}

TEST(Cli, ThreadCapValidation) {
  ::setenv("HELIO_THREADS", "zero", 1);
  auto r = run({"sun-position", "--lat", "37.427", "--lon", "-122.174", "--time", "2017-05-01T12:00:00-08:00"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("HELIO_THREADS"), std::string::npos);
  ::setenv("HELIO_THREADS", "1", 1);
  r = run({"sun-position", "--lat", "37.427", "--lon", "-122.174", "--time", "2017-05-01T12:00:00-08:00"});
  EXPECT_EQ(r.code, 0);
  ::unsetenv("HELIO_THREADS");
}

TEST(Cli, SynthTwiceIsByteIdentical) {
  TempDir tmp("helio_cli_synth");
  for (const char* d : {"a", "b"}) {
    auto r = run({"synth", "--days", "2", "--profile", "cloudy", "--seed", "7", "--out", tmp / d});
    ASSERT_EQ(r.code, 0) << r.err;
  }
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(tmp.path / "a")) {
    if (!e.is_regular_file()) continue;
    EXPECT_EQ(slurp(e.path()), slurp(tmp.path / "b" / fs::relative(e.path(), tmp.path / "a")));
    ++files;
  }
  EXPECT_EQ(files, 6u);
}

TEST(Cli, BadVariableInConfigNamesIt) {
  TempDir tmp("helio_cli_badvar");
  put(tmp.path / "c.json", R"({"task":"nowcast","variables":["tcc","badvar"],"sun_position":false})");
  auto r = run({"train", "--config", tmp / "c.json", "--data-dir", tmp / "missing", "--out", tmp / "m.htns"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("badvar"), std::string::npos);
  put(tmp.path / "d.json", R"({"task":"nowcast","epochz":3})");
  r = run({"train", "--config", tmp / "d.json", "--data-dir", tmp / "missing", "--out", tmp / "m.htns"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("epochz"), std::string::npos);
}

TEST(Cli, PreprocessRejectsUnknownVariable) {
  TempDir tmp("helio_cli_prevar");
  auto r = run({"preprocess", "--vars", "tcc,nope", "--grid-csv", tmp / "x.csv", "--out-dir", tmp / "o",
                "--train-end", "2017-05-01T00:00:00Z"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("nope"), std::string::npos);
}

TEST(Cli, MissingInputIsRuntimeError) {
  TempDir tmp("helio_cli_missing");
  auto r = run({"make-dataset", "--corpus", tmp / "none", "--out", tmp / "ds"});
  EXPECT_EQ(r.code, 1);
  EXPECT_EQ(std::count(r.err.begin(), r.err.end(), '\n'), 1);
}

TEST(Cli, PipelineOnTwoDays) {
  TempDir tmp("helio_cli_pipeline");
  ASSERT_EQ(run({"synth", "--days", "2", "--profile", "mixed", "--seed", "3", "--out", tmp / "corpus"}).code, 0);
  auto r = run({"preprocess", "--vars", "i10fg,Wind100", "--grid-csv", tmp / "corpus/met.csv", "--corpus",
                tmp / "corpus", "--train-end", "2017-05-02T12:00:00-08:00", "--out-dir", tmp / "met"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"i10fg.csv", "100u.csv", "100v.csv", "norm_stats.json"}) EXPECT_TRUE(fs::exists(tmp.path / "met" / f));

  for (const char* task : {"nowcast", "forecast"}) {
    const std::string ds = tmp / (std::string("ds_") + task);
    r = run({"make-dataset", "--task", task, "--corpus", tmp / "corpus", "--met-dir", tmp / "met", "--out", ds});
    ASSERT_EQ(r.code, 0) << r.err;
    put(tmp.path / "cfg.json", std::string(R"({"task":")") + task +
                                   R"(","variables":["i10fg","Wind100"],"sun_position":true,"epochs":1,)"
                                   R"("batch_size":4,"seed":5,"lr":0.0003,"dense_units":16,"subsample":150})");
    const std::string ckpt = tmp / (std::string("ckpt/") + task + ".htns");
    r = run({"train", "--config", tmp / "cfg.json", "--data-dir", ds, "--out", ckpt});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(fs::exists(ckpt + ".json"));
    EXPECT_TRUE(fs::exists(ckpt + ".adam"));

    const std::string report = tmp / (std::string("rep/") + task + ".json");
    r = run({"eval", "--checkpoint", ckpt, "--data-dir", ds, "--out", report});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto text = slurp(report);
    EXPECT_EQ(text.find(tmp.path.string()), std::string::npos) << "report leaks an absolute path";
    const auto parsed = eval::EvalReport::from_json(text);
    EXPECT_EQ(parsed.label, "+i10fg+Wind100+sun position");
    EXPECT_NE(r.out.find("RMSE (sunny / cloudy / overall)"), std::string::npos);

    const std::string curve = tmp / (std::string("curve_") + task + ".csv");
    r = run({"day-curve", "--checkpoint", ckpt, "--data-dir", ds, "--day", "2017-05-01", "--out", curve});
    ASSERT_EQ(r.code, 0) << r.err;
    auto dataset = pipeline::Dataset::open(ds);
    const std::size_t expected = std::string(task) == "nowcast"
                                     ? 841u
                                     : data::day_sequences(dataset.corpus(), "2017-05-01").size();
    EXPECT_EQ(line_count(curve), expected + 1);

    r = run({"day-curve", "--checkpoint", ckpt, "--data-dir", ds, "--day", "2019-01-01", "--out", curve});
    EXPECT_EQ(r.code, 2);
    r = run({"predict", "--checkpoint", ckpt, "--data-dir", ds, "--time", "2017-05-01T12:01:00-08:00"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("timestamp,truth_kw,prediction_kw\n", 0), 0u);
  }
}
