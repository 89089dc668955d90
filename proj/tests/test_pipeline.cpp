#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "nlohmann/json.hpp"
#include "tvp/pipeline.hpp"
#include "tvp/synth.hpp"

using namespace tvp;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

int line_count(const std::string& text) {
  int n = 0;
  for (char c : text)
    if (c == '\n') ++n;
  return n;
}

// Small deterministic city written under a scratch dir; returns the config.
PipelineConfig make_city(const fs::path& dir, uint64_t seed = 42,
                         int trajs = 60) {
  SynthSpec spec;
  spec.rows = 4;
  spec.cols = 4;
  spec.traj_count = trajs;
  spec.seed = seed;
  const SynthResult r = generate_synthetic(spec);
  write_synthetic(r, dir.string());

  PipelineConfig cfg;
  cfg.network_path = (dir / "network.txt").string();
  cfg.trajectories_path = (dir / "trajectories.csv").string();
  cfg.signs_path = (dir / "signs.jsonl").string();
  cfg.limits_path = (dir / "limits.csv").string();
  cfg.output_dir = (dir / "out").string();
  cfg.seed = seed;
  cfg.validate();
  return cfg;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = parse_config(
      "# comment\n"
      "network = net.txt\n"
      "trajectories = t.csv\n"
      "output_dir = o\n"
      "workers = 4\n"
      "zeta_m = 35.5\n"
      "detector_endpoint = http://localhost:9\n",
      "mem");
  CHECK(cfg.network_path == "net.txt");
  CHECK(cfg.trajectories_path == "t.csv");
  CHECK(cfg.output_dir == "o");
  CHECK(cfg.workers == 4);
  CHECK(cfg.zeta_m == 35.5);
  CHECK(cfg.detector_endpoint == "http://localhost:9");

  CHECK_THROWS_WITH_AS(parse_config("nonsense_key = 1\n", "mem"),
                       doctest::Contains("line 1"), std::runtime_error);
  CHECK_THROWS(parse_config("workers cuatro\n", "mem"));
  CHECK_THROWS(parse_config("workers = four\n", "mem"));
  CHECK_THROWS(load_config("no_such_config.cfg"));

  PipelineConfig bad = cfg;
  bad.cluster_radius_m = -1.0;
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.workers = 0;
  CHECK_THROWS(bad.validate());
  bad = cfg;
  bad.pose_count = 0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("synthetic generation is deterministic per seed") {
  SynthSpec spec;
  spec.traj_count = 20;
  const auto a = generate_synthetic(spec);
  const auto b = generate_synthetic(spec);
  CHECK(a.network_text == b.network_text);
  CHECK(a.trajectories_csv == b.trajectories_csv);
  CHECK(a.signs_jsonl == b.signs_jsonl);
  CHECK(a.limits_csv == b.limits_csv);
  CHECK(a.truth.size() == b.truth.size());

  spec.seed = 43;
  const auto c = generate_synthetic(spec);
  CHECK(a.trajectories_csv != c.trajectories_csv);

  SynthSpec tiny;
  tiny.rows = 1;
  CHECK_THROWS(generate_synthetic(tiny));
}

TEST_CASE("trajectory loader groups and sorts fixes") {
  const fs::path dir = fs::temp_directory_path() / "tvp_loader_test";
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "t.csv");
    out << "traj_id,timestamp,lat,lng\n"
        << "b,100,24.45,118.05\n"
        << "a,50,24.45,118.05\n"
        << "b,90,24.4501,118.05\n"
        << "a,60,24.4501,118.05\n";
  }
  const auto trajs = load_trajectories_csv((dir / "t.csv").string());
  REQUIRE(trajs.size() == 2);
  for (const auto& t : trajs) {
    REQUIRE(t.fixes.size() == 2);
    CHECK(t.fixes[0].t < t.fixes[1].t);
  }

  {
    std::ofstream out(dir / "bad.csv");
    out << "traj_id,timestamp,lat,lng\n"
        << "a,notanumber,24.45,118.05\n";
  }
  CHECK_THROWS(load_trajectories_csv((dir / "bad.csv").string()));
  CHECK_THROWS(load_trajectories_csv((dir / "missing.csv").string()));
  fs::remove_all(dir);
}

TEST_CASE("full pipeline run produces every artifact with sane counts") {
  const fs::path dir = fs::temp_directory_path() / "tvp_pipeline_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const auto cfg = make_city(dir);

  Pipeline p(cfg);
  const RunReport report = p.run_all();
  REQUIRE(report.stages.size() == 7);
  CHECK(report.match_points_per_s > 0.0);

  std::map<std::string, StageReport> by_name;
  for (const auto& s : report.stages) by_name[s.name] = s;
  CHECK(by_name.at("match").counts.at("trajectories") > 0);
  CHECK(by_name.at("behaviors").counts.at("turnings") > 0);
  CHECK(by_name.at("behaviors").counts.at("speed_samples") > 0);
  CHECK(by_name.at("perspective").counts.at("bunches") > 0);
  CHECK(by_name.at("restrict").counts.at("rules") > 0);
  CHECK(by_name.at("violations").counts.at("illegal_turns") > 0);
  CHECK(by_name.at("infer").counts.at("violations") > 0);
  CHECK(by_name.at("infer").counts.at("prone_locations") > 0);

  const fs::path out = cfg.output_dir;
  for (const char* f :
       {"matched.csv", "turnings.csv", "parkings.csv", "speeds.csv",
        "bunches.csv", "poses.jsonl", "turns_bunched.csv", "rules.csv",
        "zones.csv", "limits_validated.csv", "violations.csv", "profiles.csv",
        "typical.csv", "thresholds.csv", "prone.geojson", "report.json"})
    CHECK(fs::exists(out / f));

  SUBCASE("report json is well-formed") {
    const auto j = nlohmann::json::parse(slurp(out / "report.json"));
    CHECK(j.at("stages").size() == 7);
    CHECK(j.at("match_points_per_s").get<double>() > 0.0);
  }

  SUBCASE("prone geojson is a point feature collection") {
    const auto j = nlohmann::json::parse(slurp(out / "prone.geojson"));
    CHECK(j.at("type") == "FeatureCollection");
    REQUIRE(!j.at("features").empty());
    for (const auto& f : j.at("features")) {
      CHECK(f.at("type") == "Feature");
      CHECK(f.at("geometry").at("type") == "Point");
      const auto& coords = f.at("geometry").at("coordinates");
      REQUIRE(coords.size() == 2);
      // lng first
      CHECK(coords[0].get<double>() == doctest::Approx(118.05).epsilon(0.01));
      CHECK(coords[1].get<double>() == doctest::Approx(24.45).epsilon(0.01));
      const auto& props = f.at("properties");
      CHECK(props.contains("kind"));
      CHECK(props.contains("location_ref"));
      REQUIRE(props.contains("prone_hours"));
      for (const auto& h : props.at("prone_hours")) {
        const int hour = h.at("hour").get<int>();
        CHECK(hour >= 0);
        CHECK(hour < 24);
        CHECK(h.at("typical").get<double>() >
              h.at("threshold").get<double>());
      }
    }
  }

  SUBCASE("rerunning a stage from persisted inputs is stable") {
    const std::string before = slurp(out / "violations.csv");
    Pipeline p2(cfg);
    p2.stage_violations();
    CHECK(slurp(out / "violations.csv") == before);
  }

  SUBCASE("hour filter keeps a subset of features") {
    const auto all = nlohmann::json::parse(slurp(out / "prone.geojson"));
    int prone_hour = all.at("features")[0]
                         .at("properties")
                         .at("prone_hours")[0]
                         .at("hour")
                         .get<int>();
    Pipeline p2(cfg);
    p2.stage_export(prone_hour);
    const fs::path hf = out / ("prone_hour" + std::to_string(prone_hour) +
                               ".geojson");
    REQUIRE(fs::exists(hf));
    const auto filtered = nlohmann::json::parse(slurp(hf));
    CHECK(filtered.at("features").size() <= all.at("features").size());
    CHECK(!filtered.at("features").empty());
    for (const auto& f : filtered.at("features")) {
      bool has_hour = false;
      for (const auto& h : f.at("properties").at("prone_hours"))
        if (h.at("hour").get<int>() == prone_hour) has_hour = true;
      CHECK(has_hour);
    }
  }

  SUBCASE("matched csv reloads against the network") {
    const RoadNetwork net = load_network_any(cfg.network_path);
    const auto matched =
        load_matched_csv((out / "matched.csv").string(), net);
    CHECK(!matched.empty());
    for (const auto& m : matched) {
      CHECK(!m.matched.empty());
      for (const auto& mp : m.matched)
        CHECK(net.segment(mp.projection.segment_id) != nullptr);
    }
  }

  SUBCASE("worker pool output matches single-threaded matching") {
    const std::string single = slurp(out / "matched.csv");
    PipelineConfig cfg4 = cfg;
    cfg4.workers = 4;
    cfg4.output_dir = (dir / "out4").string();
    Pipeline p4(cfg4);
    p4.stage_match();
    CHECK(slurp(fs::path(cfg4.output_dir) / "matched.csv") == single);
  }

  fs::remove_all(dir);
}

TEST_CASE("stage errors surface as exceptions") {
  const fs::path dir = fs::temp_directory_path() / "tvp_pipeline_err";
  fs::remove_all(dir);
  fs::create_directories(dir);
  PipelineConfig cfg;
  cfg.network_path = (dir / "absent.txt").string();
  cfg.trajectories_path = (dir / "absent.csv").string();
  cfg.output_dir = (dir / "out").string();
  Pipeline p(cfg);
  CHECK_THROWS(p.stage_match());
  // behaviors without a prior match stage has no matched.csv to read
  CHECK_THROWS(p.stage_behaviors());
  fs::remove_all(dir);
}
