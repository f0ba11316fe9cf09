#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "snapdrive/error.hpp"
#include "snapdrive/pipeline.hpp"

using namespace snapdrive;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::kOk;
}

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("snapdrive-test-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kSmallSynth = R"({
  "seed": 9,
  "out_dir": "gen",
  "synth": {"n_cities": 3, "records_per_city": 1500, "annotated_items": 300, "regression_cities": 40}
})";

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("config parsing") {
    const auto cfg = parse_config(R"({"seed": 3, "k": 2, "voting": {"rule": "threshold", "threshold": 70},
      "cities": [{"id": "a", "tz_id": "UTC", "region": {"bbox": [0, 0, 0.05, 0.05]}}]})",
                                  "/tmp/base");
    CHECK(cfg.seed == 3);
    CHECK(cfg.k == 2);
    CHECK(cfg.rule.name() == "threshold70");
    REQUIRE(cfg.cities.size() == 1);
    CHECK(cfg.cities[0].id == "a");
    CHECK(cfg.out_dir == fs::path("/tmp/base/results"));

    CHECK(code_of([] { parse_config(R"({"sed": 3})", "."); }) == ErrorCode::kConfig);
    CHECK(code_of([] { parse_config("{not json", "."); }) == ErrorCode::kConfig);
    CHECK(code_of([] { parse_config(R"({"voting": {"rule": "threshold", "threshold": 40}})", "."); }) ==
          ErrorCode::kConfig);
    CHECK(code_of([] { parse_config(R"({"cities": [{"id": "a", "tz_id": "Nowhere/City",
      "region": {"bbox": [0, 0, 1, 1]}}]})", "."); }) == ErrorCode::kConfig);
    CHECK(code_of([] { load_config("/nonexistent/config.json"); }) == ErrorCode::kIo);
  }

  TEST_CASE("unknown subcommand") {
    const auto cfg = parse_config("{}", ".");
    CHECK(code_of([&] { run_subcommand("frobnicate", cfg); }) == ErrorCode::kUsage);
    CHECK(subcommand_names().size() == 11);
  }

  TEST_CASE("extent with no driving posts") {
    TempDir tmp;
    std::ofstream(tmp.path / "snaps.jsonl")
        << R"({"id":"1","ts_utc":"2019-03-16T00:00:00Z","lat":0.01,"lon":0.01,"city_id":"a","duration_s":3,"label":"non_driving"})"
        << "\n"
        << R"({"id":"2","ts_utc":"2019-03-16T01:00:00Z","lat":0.02,"lon":0.02,"city_id":"a","duration_s":3,"label":"non_driving"})"
        << "\n";
    std::ofstream(tmp.path / "config.json") << R"({"inputs": {"snaps": "snaps.jsonl"},
      "cities": [{"id": "a", "tz_id": "UTC", "region": {"bbox": [0, 0, 0.05, 0.05]}}]})";
    const auto cfg = load_config(tmp.path / "config.json");
    const auto files = run_subcommand("extent", cfg);
    REQUIRE(files.size() == 1);
    const std::string csv = slurp(files[0]);
    CHECK(csv.find("\n1,a,0,2,0\n") != std::string::npos);
    CHECK(csv.find("\n,ALL,0,2,0\n") != std::string::npos);
  }

  TEST_CASE("synth then report") {
    TempDir tmp;
    std::ofstream(tmp.path / "synth.json") << kSmallSynth;
    const auto scfg = load_config(tmp.path / "synth.json");
    const auto made = run_subcommand("synth", scfg);
    CHECK(fs::exists(tmp.path / "gen" / "manifest.json"));
    CHECK(fs::exists(tmp.path / "gen" / "config.json"));
    CHECK(made.size() >= 7);

    const auto cfg = load_config(tmp.path / "gen" / "config.json");
    CHECK(cfg.cities.size() == 3);
    const auto files = run_subcommand("report", cfg);
    const fs::path results = tmp.path / "gen" / "results";
    for (const char* f : {"extent.csv", "spatial_fits.json", "temporal.json", "clusters.json", "regression.json",
                          "agreement.json", "evaluation.json", "report.md"}) {
      CHECK_MESSAGE(fs::exists(results / f), f);
    }
    const std::string report = slurp(results / "report.md");
    CHECK(report.find("Extent") != std::string::npos);

    // Running again leaves every output byte-identical.
    std::vector<std::string> first;
    for (const auto& p : files) first.push_back(slurp(p));
    const auto again = run_subcommand("report", cfg);
    REQUIRE(again.size() == files.size());
    for (std::size_t i = 0; i < again.size(); ++i) CHECK(slurp(again[i]) == first[i]);

    auto jobs = cfg;
    jobs.jobs = 3;
    jobs.out_dir = tmp.path / "parallel";
    const auto par = run_subcommand("report", jobs);
    REQUIRE(par.size() == files.size());
    for (std::size_t i = 0; i < par.size(); ++i) {
      CHECK(par[i].filename() == files[i].filename());
      CHECK(slurp(par[i]) == first[i]);
    }
  }
}
