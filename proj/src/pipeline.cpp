#include "tvp/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "nlohmann/json.hpp"
#include "tvp/io.hpp"
#include "tvp/mapmatch.hpp"
#include "tvp/perspective.hpp"
#include "tvp/synth.hpp"

namespace tvp {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::string fmtd(double v, int prec = 9) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", prec, v);
  return buf;
}

}  // namespace

std::string RunReport::to_json() const {
  nlohmann::json j;
  j["stages"] = nlohmann::json::array();
  for (const auto& s : stages) {
    nlohmann::json js;
    js["name"] = s.name;
    js["ms"] = s.ms;
    for (const auto& [k, v] : s.counts) js["counts"][k] = v;
    j["stages"].push_back(js);
  }
  j["match_points_per_s"] = match_points_per_s;
  return j.dump(2);
}

RoadNetwork load_network_any(const std::string& path) {
  if (path.size() > 8 && path.substr(path.size() - 8) == ".geojson")
    return RoadNetwork::load_geojson(path);
  return RoadNetwork::load_file(path);
}

std::vector<PointTrajectory> load_trajectories_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trajectories: " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("empty trajectory file: " + path);
  std::vector<PointTrajectory> out;
  std::unordered_map<std::string, size_t> index;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 4)
      throw std::runtime_error(path + ": malformed row at line " +
                               std::to_string(lineno));
    GpsFix fix;
    fix.traj_id = f[0];
    fix.t = parse_timestamp(f[1]);
    fix.location = {std::stod(f[2]), std::stod(f[3])};
    if (!valid_coords(fix.location))
      throw std::runtime_error(path + ": coordinates out of range at line " +
                               std::to_string(lineno));
    auto it = index.find(fix.traj_id);
    if (it == index.end()) {
      index.emplace(fix.traj_id, out.size());
      out.push_back({fix.traj_id, {fix}});
    } else {
      out[it->second].fixes.push_back(fix);
    }
  }
  for (auto& t : out)
    std::stable_sort(t.fixes.begin(), t.fixes.end(),
                     [](const GpsFix& a, const GpsFix& b) { return a.t < b.t; });
  return out;
}

std::vector<MatchedTrajectory> load_matched_csv(const std::string& path,
                                                const RoadNetwork& net) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open matched file: " + path);
  std::string line;
  std::getline(in, line);  // header
  std::vector<MatchedTrajectory> out;
  std::unordered_map<std::string, size_t> index;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 8)
      throw std::runtime_error(path + ": malformed matched row: " + line);
    MatchedPoint mp;
    mp.fix.traj_id = f[0];
    mp.fix.t = parse_timestamp(f[1]);
    mp.fix.location = {std::stod(f[2]), std::stod(f[3])};
    mp.projection.segment_id = f[4];
    mp.projection.offset = std::stod(f[5]);
    mp.projection.point = {std::stod(f[6]), std::stod(f[7])};
    mp.projection.distance =
        direct_distance(mp.fix.location, mp.projection.point);
    auto it = index.find(mp.fix.traj_id);
    if (it == index.end()) {
      index.emplace(mp.fix.traj_id, out.size());
      out.push_back({mp.fix.traj_id, {mp}, {}});
    } else {
      out[it->second].matched.push_back(mp);
    }
  }
  for (auto& m : out) m.segment_route = complete_segment_route(m.matched, net);
  return out;
}

std::vector<TurningBehavior> load_turnings_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open turnings: " + path);
  std::string line;
  std::getline(in, line);
  std::vector<TurningBehavior> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    if (f.size() != 8)
      throw std::runtime_error(path + ": malformed turning row: " + line);
    TurningBehavior tb;
    tb.type = turn_type_from_name(f[0]);
    tb.traj_id = f[1];
    tb.location = {std::stod(f[2]), std::stod(f[3])};
    tb.t = parse_timestamp(f[4]);
    tb.bb = std::stod(f[5]);
    tb.ba = std::stod(f[6]);
    tb.conf = std::stod(f[7]);
    out.push_back(std::move(tb));
  }
  return out;
}

StageReport Pipeline::stage_match() {
  const auto t0 = Clock::now();
  StageReport rep;
  rep.name = "match";
  if (cfg_.network_path.empty() || cfg_.trajectories_path.empty())
    throw std::runtime_error("match stage needs network and trajectories paths");
  const RoadNetwork net = load_network_any(cfg_.network_path);
  auto trajs = load_trajectories_csv(cfg_.trajectories_path);

  HmmParams base;
  base.emission_cutoff = cfg_.emission_cutoff_m;
  base.transition_cutoff = cfg_.transition_cutoff_m;
  base.speed_cutoff = cfg_.speed_cutoff_kmh;
  base.sigma_floor = cfg_.sigma_floor_m;
  base.beta_floor = cfg_.beta_floor_m;

  // bootstrap sigma from raw nearest residuals, then preprocess, then beta
  HmmParams params = estimate_params(trajs, net, base);
  std::vector<PointTrajectory> clean;
  for (const auto& t : trajs) {
    try {
      clean.push_back(preprocess(t, params.sigma_z, params.speed_cutoff));
    } catch (const std::exception&) {
      // fully-degenerate trajectory, skip
    }
  }
  params = estimate_params(clean, net, params);

  std::vector<std::vector<MatchedTrajectory>> results(clean.size());
  int64_t total_points = 0;
  for (const auto& t : clean) total_points += static_cast<int64_t>(t.fixes.size());

  const auto m0 = Clock::now();
  const int workers = std::max(1, cfg_.workers);
  if (workers == 1) {
    for (size_t i = 0; i < clean.size(); ++i)
      results[i] = match(clean[i], net, params);
  } else {
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&]() {
        for (size_t i = next.fetch_add(1); i < clean.size();
             i = next.fetch_add(1))
          results[i] = match(clean[i], net, params);
      });
    for (auto& th : pool) th.join();
  }
  const double match_s = ms_since(m0) / 1000.0;
  match_points_per_s_ = match_s > 0 ? total_points / match_s : 0.0;

  std::filesystem::create_directories(cfg_.output_dir);
  std::ostringstream out;
  out << "traj_id,timestamp,lat,lng,segment_id,offset_m,match_lat,match_lng\n";
  int64_t matched_points = 0, parts = 0;
  for (const auto& parts_of : results) {
    for (const auto& mt : parts_of) {
      ++parts;
      for (const auto& mp : mt.matched) {
        ++matched_points;
        out << mp.fix.traj_id << "," << mp.fix.t << ","
            << fmtd(mp.fix.location.lat) << "," << fmtd(mp.fix.location.lng)
            << "," << mp.projection.segment_id << ","
            << fmtd(mp.projection.offset, 3) << ","
            << fmtd(mp.projection.point.lat) << ","
            << fmtd(mp.projection.point.lng) << "\n";
      }
    }
  }
  write_file(cfg_.output_dir + "/matched.csv", out.str());
  rep.counts["trajectories"] = static_cast<int64_t>(clean.size());
  rep.counts["input_points"] = total_points;
  rep.counts["matched_points"] = matched_points;
  rep.counts["parts"] = parts;
  rep.counts["points_per_s"] = static_cast<int64_t>(match_points_per_s_);
  rep.ms = ms_since(t0);
  return rep;
}

StageReport Pipeline::stage_behaviors() {
  const auto t0 = Clock::now();
  StageReport rep;
  rep.name = "behaviors";
  const RoadNetwork net = load_network_any(cfg_.network_path);
  auto matched = load_matched_csv(cfg_.output_dir + "/matched.csv", net);

  ParkingParams pparams{cfg_.parking_delta_mps, cfg_.parking_min_duration_s};
  std::ostringstream turns_out, parks_out, speeds_out;
  turns_out << "type,traj_id,lat,lng,t,bb,ba,conf\n";
  parks_out << "traj_id,lat,lng,st,et\n";
  speeds_out << "traj_id,road_name,v_kmh,t\n";
  int64_t n_turns = 0, n_parks = 0, n_speeds = 0;
  VelocityDiagnostics diag;
  for (const auto& m : matched) {
    for (const auto& tb : extract_turnings(m, net)) {
      ++n_turns;
      turns_out << turn_type_name(tb.type) << "," << tb.traj_id << ","
                << fmtd(tb.location.lat) << "," << fmtd(tb.location.lng) << ","
                << tb.t << "," << fmtd(tb.bb, 6) << "," << fmtd(tb.ba, 6)
                << "," << fmtd(tb.conf, 3) << "\n";
    }
    for (const auto& pk : extract_parkings(m, pparams, net)) {
      ++n_parks;
      parks_out << pk.traj_id << "," << fmtd(pk.location.lat) << ","
                << fmtd(pk.location.lng) << "," << pk.st << "," << pk.et
                << "\n";
    }
    for (const auto& sp : extract_velocities(m, net, &diag)) {
      ++n_speeds;
      speeds_out << sp.traj_id << "," << sp.road_name << "," << fmtd(sp.v, 3)
                 << "," << sp.t << "\n";
    }
  }
  write_file(cfg_.output_dir + "/turnings.csv", turns_out.str());
  write_file(cfg_.output_dir + "/parkings.csv", parks_out.str());
  write_file(cfg_.output_dir + "/speeds.csv", speeds_out.str());
  rep.counts["turnings"] = n_turns;
  rep.counts["parkings"] = n_parks;
  rep.counts["speed_samples"] = n_speeds;
  rep.counts["skipped_zero_dt"] = diag.skipped_zero_dt;
  rep.ms = ms_since(t0);
  return rep;
}

StageReport Pipeline::stage_perspective() {
  const auto t0 = Clock::now();
  StageReport rep;
  rep.name = "perspective";
  const RoadNetwork net = load_network_any(cfg_.network_path);
  auto turns = load_turnings_csv(cfg_.output_dir + "/turnings.csv");
  auto matched = load_matched_csv(cfg_.output_dir + "/matched.csv", net);

  std::ostringstream bunches_out, poses_out, bunched_out;
  bunches_out << "bunch_id,cluster_id,lat,lng,bb\n";
  bunched_out << "type,traj_id,lat,lng,t,bb,ba,conf,bunch_id,cluster_ref\n";
  int64_t n_bunches = 0, n_poses = 0, n_skipped = 0;
  if (!turns.empty()) {
    auto clusters = detect_intersections(turns, cfg_.cluster_radius_m);
    rep.counts["clusters"] = static_cast<int64_t>(clusters.size());
    for (const auto& cluster : clusters) {
      auto bunches = group_bunches(turns, cluster, cfg_.bearing_bin_deg);
      for (const auto& bunch : bunches) {
        ++n_bunches;
        bunches_out << bunch.id << "," << bunch.cluster_id << ","
                    << fmtd(bunch.location.lat) << ","
                    << fmtd(bunch.location.lng) << "," << fmtd(bunch.bb, 6)
                    << "\n";
        const std::string cluster_ref =
            "int:" + std::to_string(bunch.cluster_id);
        for (size_t idx : bunch.members) {
          const auto& tb = turns[idx];
          bunched_out << turn_type_name(tb.type) << "," << tb.traj_id << ","
                      << fmtd(tb.location.lat) << "," << fmtd(tb.location.lng)
                      << "," << tb.t << "," << fmtd(tb.bb, 6) << ","
                      << fmtd(tb.ba, 6) << "," << fmtd(tb.conf, 3) << ","
                      << bunch.id << "," << cluster_ref << "\n";
        }
        try {
          auto pts = select_approach_points(bunch, cfg_.approach_theta_s,
                                            turns, matched);
          auto curve = fit_cubic(pts);
          auto poses = sample_view_poses(curve, cfg_.pose_count, net);
          for (size_t k = 0; k < poses.size(); ++k) {
            nlohmann::json j;
            j["bunch_id"] = bunch.id;
            j["lat"] = poses[k].location.lat;
            j["lng"] = poses[k].location.lng;
            j["heading"] = poses[k].heading;
            j["fov"] = poses[k].fov;
            j["seq"] = static_cast<int>(k);
            poses_out << j.dump() << "\n";
            ++n_poses;
          }
        } catch (const std::exception&) {
          ++n_skipped;  // insufficient data for this bunch
        }
      }
    }
  }
  write_file(cfg_.output_dir + "/bunches.csv", bunches_out.str());
  write_file(cfg_.output_dir + "/poses.jsonl", poses_out.str());
  write_file(cfg_.output_dir + "/turns_bunched.csv", bunched_out.str());
  rep.counts["bunches"] = n_bunches;
  rep.counts["poses"] = n_poses;
  rep.counts["bunches_without_curve"] = n_skipped;
  rep.ms = ms_since(t0);
  return rep;
}

namespace {

std::vector<ManifestPose> load_poses_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pose manifest: " + path);
  std::vector<ManifestPose> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto j = nlohmann::json::parse(line);
    ManifestPose p;
    p.bunch_id = j.at("bunch_id").get<std::string>();
    p.seq = j.at("seq").get<int>();
    p.location = {j.at("lat").get<double>(), j.at("lng").get<double>()};
    p.heading = j.at("heading").get<double>();
    p.fov = j.at("fov").get<double>();
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

StageReport Pipeline::stage_restrict() {
  const auto t0 = Clock::now();
  StageReport rep;
  rep.name = "restrict";
  const RoadNetwork net = load_network_any(cfg_.network_path);

  std::vector<SignRecord> signs;
  if (!cfg_.signs_path.empty()) signs = load_sign_inventory(cfg_.signs_path);
  auto poses = load_poses_jsonl(cfg_.output_dir + "/poses.jsonl");

  if (!cfg_.detector_endpoint.empty() && !poses.empty()) {
    DetectorStats stats;
    auto detected = query_detector(poses, cfg_.detector_endpoint, 3, 100,
                                   &stats);
    rep.counts["detector_signs"] = static_cast<int64_t>(detected.size());
    rep.counts["detector_retries"] = stats.retries;
    signs.insert(signs.end(), detected.begin(), detected.end());
  }

  std::vector<BunchPoses> bunch_poses;
  {
    std::map<std::string, size_t> by_id;
    for (const auto& p : poses) {
      auto it = by_id.find(p.bunch_id);
      if (it == by_id.end()) {
        by_id.emplace(p.bunch_id, bunch_poses.size());
        bunch_poses.push_back({p.bunch_id, {}});
        it = by_id.find(p.bunch_id);
      }
      bunch_poses[it->second].poses.push_back(
          {p.location, p.heading, p.fov});
    }
  }
  auto rules = associate_turn_signs(signs, bunch_poses, cfg_.assoc_radius_m,
                                    cfg_.heading_tol_deg);
  int skipped = 0;
  auto zones = build_no_parking_zones(signs, net, cfg_.sign_snap_max_m,
                                      &skipped);
  std::vector<SpeedLimit> limits;
  if (!cfg_.limits_path.empty()) limits = load_speed_limits(cfg_.limits_path);

  std::ostringstream rules_out, zones_out, limits_out;
  rules_out << "bunch_id,forbidden,evidence_count\n";
  for (const auto& r : rules)
    rules_out << r.bunch_id << "," << sign_type_name(r.forbidden) << ","
              << r.evidence.size() << "\n";
  zones_out << "segment_id,sign_lat,sign_lng\n";
  for (const auto& z : zones)
    zones_out << z.segment_id << "," << fmtd(z.sign.location.lat) << ","
              << fmtd(z.sign.location.lng) << "\n";
  limits_out << "road_name,limit_kmh\n";
  for (const auto& l : limits)
    limits_out << l.road_name << "," << fmtd(l.limit_kmh, 3) << "\n";
  write_file(cfg_.output_dir + "/rules.csv", rules_out.str());
  write_file(cfg_.output_dir + "/zones.csv", zones_out.str());
  write_file(cfg_.output_dir + "/limits_validated.csv", limits_out.str());
  rep.counts["signs"] = static_cast<int64_t>(signs.size());
  rep.counts["rules"] = static_cast<int64_t>(rules.size());
  rep.counts["zones"] = static_cast<int64_t>(zones.size());
  rep.counts["zone_signs_skipped"] = skipped;
  rep.counts["limits"] = static_cast<int64_t>(limits.size());
  rep.ms = ms_since(t0);
  return rep;
}

StageReport Pipeline::stage_violations() {
  const auto t0 = Clock::now();
  StageReport rep;
  rep.name = "violations";
  const RoadNetwork net = load_network_any(cfg_.network_path);

  // bunched turns
  std::vector<BunchedTurn> turns;
  {
    std::ifstream in(cfg_.output_dir + "/turns_bunched.csv");
    if (!in) throw std::runtime_error("missing turns_bunched.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto f = split_csv_line(line);
      if (f.size() != 10)
        throw std::runtime_error("malformed turns_bunched row: " + line);
      BunchedTurn bt;
      bt.turn.type = turn_type_from_name(f[0]);
      bt.turn.traj_id = f[1];
      bt.turn.location = {std::stod(f[2]), std::stod(f[3])};
      bt.turn.t = parse_timestamp(f[4]);
      bt.turn.bb = std::stod(f[5]);
      bt.turn.ba = std::stod(f[6]);
      bt.turn.conf = std::stod(f[7]);
      bt.bunch_id = f[8];
      bt.cluster_ref = f[9];
      turns.push_back(std::move(bt));
    }
  }
  // rules
  std::vector<NoTurnRule> rules;
  {
    std::ifstream in(cfg_.output_dir + "/rules.csv");
    if (!in) throw std::runtime_error("missing rules.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto f = split_csv_line(line);
      NoTurnRule r;
      r.bunch_id = f[0];
      r.forbidden = sign_type_from_name(f[1]);
      rules.push_back(std::move(r));
    }
  }
  // zones
  std::vector<NoParkingZone> zones;
  {
    std::ifstream in(cfg_.output_dir + "/zones.csv");
    if (!in) throw std::runtime_error("missing zones.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto f = split_csv_line(line);
      NoParkingZone z;
      z.segment_id = f[0];
      z.sign.sign_type = SignType::no_parking;
      z.sign.location = {std::stod(f[1]), std::stod(f[2])};
      zones.push_back(std::move(z));
    }
  }
  // parkings
  std::vector<ParkingBehavior> parkings;
  {
    std::ifstream in(cfg_.output_dir + "/parkings.csv");
    if (!in) throw std::runtime_error("missing parkings.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto f = split_csv_line(line);
      ParkingBehavior pk;
      pk.traj_id = f[0];
      pk.location = {std::stod(f[1]), std::stod(f[2])};
      pk.st = parse_timestamp(f[3]);
      pk.et = parse_timestamp(f[4]);
      parkings.push_back(std::move(pk));
    }
  }
  // speed samples
  std::vector<SpeedSample> samples;
  {
    std::ifstream in(cfg_.output_dir + "/speeds.csv");
    if (!in) throw std::runtime_error("missing speeds.csv");
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto f = split_csv_line(line);
      SpeedSample s;
      s.traj_id = f[0];
      s.road_name = f[1];
      s.v = std::stod(f[2]);
      s.t = parse_timestamp(f[3]);
      samples.push_back(std::move(s));
    }
  }
  std::vector<SpeedLimit> limits;
  if (!cfg_.limits_path.empty()) limits = load_speed_limits(cfg_.limits_path);

  auto v1 = detect_illegal_turns(turns, rules);
  auto v2 = detect_illegal_parking(parkings, zones, cfg_.zeta_m, net);
  int uncovered = 0;
  auto v3 = detect_speeding(samples, limits, &uncovered);

  std::ostringstream out;
  out << "kind,location_ref,timestamp,behavior_ref\n";
  auto dump = [&](const std::vector<Violation>& vs) {
    for (const auto& v : vs)
      out << violation_kind_name(v.kind) << "," << v.location_ref << ","
          << v.t << "," << v.behavior_ref << "\n";
  };
  dump(v1);
  dump(v2);
  dump(v3);
  write_file(cfg_.output_dir + "/violations.csv", out.str());
  rep.counts["illegal_turns"] = static_cast<int64_t>(v1.size());
  rep.counts["illegal_parkings"] = static_cast<int64_t>(v2.size());
  rep.counts["speeding"] = static_cast<int64_t>(v3.size());
  rep.counts["uncovered_roads_samples"] = uncovered;
  rep.ms = ms_since(t0);
  return rep;
}

namespace {

std::vector<Violation> load_violations_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing violations.csv");
  std::string line;
  std::getline(in, line);
  std::vector<Violation> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto f = split_csv_line(line);
    Violation v;
    v.kind = violation_kind_from_name(f[0]);
    v.location_ref = f[1];
    v.t = parse_timestamp(f[2]);
    v.behavior_ref = f.size() > 3 ? f[3] : "";
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

StageReport Pipeline::stage_infer() {
  const auto t0 = Clock::now();
  StageReport rep;
  rep.name = "infer";
  auto violations = load_violations_csv(cfg_.output_dir + "/violations.csv");

  // location geometry for the export
  LocationGeometry geometry;
  {
    std::ifstream in(cfg_.output_dir + "/bunches.csv");
    if (in) {
      std::string line;
      std::getline(in, line);
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto f = split_csv_line(line);
        geometry["int:" + f[1]] = {std::stod(f[2]), std::stod(f[3])};
      }
    }
    const RoadNetwork net = load_network_any(cfg_.network_path);
    for (const auto& s : net.segments()) {
      const auto& g = s.geometry;
      const GeoPoint mid = g[g.size() / 2];
      geometry["seg:" + s.id] = mid;
      if (!s.road_name.empty() &&
          !geometry.count("road:" + s.road_name))
        geometry["road:" + s.road_name] = mid;
    }
  }

  std::ostringstream profiles_out, typical_out, th_out;
  profiles_out << "location_ref,kind,hour_counts...\n";
  typical_out << "location_ref,kind,h0..h23\n";
  th_out << "kind,stat,h0..h23\n";
  std::vector<ProneLocation> prone_all;

  if (!violations.empty()) {
    int64_t span_start = violations.front().t, span_end = violations.front().t;
    for (const auto& v : violations) {
      span_start = std::min(span_start, v.t);
      span_end = std::max(span_end, v.t);
    }
    auto profiles =
        build_profiles(violations, span_start, span_end, cfg_.tz_offset_s);
    // the candidate population is every restricted location of each kind,
    // so locations with zero observed violations still enter mu and sigma
    {
      std::map<std::pair<int, std::string>, bool> have;
      size_t buckets = 0;
      for (const auto& p : profiles) {
        have[{static_cast<int>(p.kind), p.location_ref}] = true;
        buckets = p.counts.size();
      }
      auto pad = [&](ViolationKind kind, const std::string& ref) {
        if (have.count({static_cast<int>(kind), ref})) return;
        have[{static_cast<int>(kind), ref}] = true;
        TemporalProfile p;
        p.location_ref = ref;
        p.kind = kind;
        p.counts.assign(buckets, 0);
        profiles.push_back(std::move(p));
      };
      std::ifstream bin(cfg_.output_dir + "/bunches.csv");
      std::string line;
      std::getline(bin, line);
      while (std::getline(bin, line))
        if (!line.empty())
          pad(ViolationKind::illegal_turn,
              "int:" + split_csv_line(line)[1]);
      std::ifstream zin(cfg_.output_dir + "/zones.csv");
      std::getline(zin, line);
      while (std::getline(zin, line))
        if (!line.empty())
          pad(ViolationKind::illegal_parking,
              "seg:" + split_csv_line(line)[0]);
      if (!cfg_.limits_path.empty())
        for (const auto& l : load_speed_limits(cfg_.limits_path))
          pad(ViolationKind::speeding, "road:" + l.road_name);
    }
    std::map<int, std::vector<TypicalDayProfile>> by_kind;
    for (const auto& p : profiles) {
      profiles_out << p.location_ref << "," << violation_kind_name(p.kind);
      for (int c : p.counts) profiles_out << "," << c;
      profiles_out << "\n";
      auto td = typical_day(p, span_start, span_end, cfg_.tz_offset_s);
      typical_out << td.location_ref << "," << violation_kind_name(td.kind);
      for (double m : td.means) typical_out << "," << fmtd(m, 6);
      typical_out << "\n";
      by_kind[static_cast<int>(p.kind)].push_back(td);
    }
    // thresholds and proneness are computed within each violation kind so
    // candidate families with very different scales do not mask each other
    for (auto& [kind, typicals] : by_kind) {
      auto th = compute_thresholds(typicals);
      const char* kn = violation_kind_name(static_cast<ViolationKind>(kind));
      auto dump_row = [&](const char* stat, const double* vals) {
        th_out << kn << "," << stat;
        for (int h = 0; h < 24; ++h) th_out << "," << fmtd(vals[h], 6);
        th_out << "\n";
      };
      dump_row("mu", th.mu);
      dump_row("sigma", th.sigma);
      dump_row("th", th.th);
      auto prone = infer_prone_locations(typicals, th);
      prone_all.insert(prone_all.end(), prone.begin(), prone.end());
    }
  }
  write_file(cfg_.output_dir + "/profiles.csv", profiles_out.str());
  write_file(cfg_.output_dir + "/typical.csv", typical_out.str());
  write_file(cfg_.output_dir + "/thresholds.csv", th_out.str());
  write_file(cfg_.output_dir + "/prone.geojson",
             export_geojson(prone_all, geometry));
  rep.counts["violations"] = static_cast<int64_t>(violations.size());
  rep.counts["prone_locations"] = static_cast<int64_t>(prone_all.size());
  rep.ms = ms_since(t0);
  return rep;
}

std::string export_geojson(const std::vector<ProneLocation>& prone,
                           const LocationGeometry& geometry,
                           std::optional<int> hour_filter) {
  nlohmann::json doc;
  doc["type"] = "FeatureCollection";
  doc["features"] = nlohmann::json::array();
  for (const auto& pl : prone) {
    if (hour_filter) {
      bool at_hour = false;
      for (const auto& h : pl.hours)
        if (h.hour == *hour_filter) at_hour = true;
      if (!at_hour) continue;
    }
    nlohmann::json f;
    f["type"] = "Feature";
    GeoPoint loc{0, 0};
    auto it = geometry.find(pl.location_ref);
    if (it != geometry.end()) loc = it->second;
    f["geometry"] = {{"type", "Point"},
                     {"coordinates", {loc.lng, loc.lat}}};
    nlohmann::json props;
    props["kind"] = violation_kind_name(pl.kind);
    props["location_ref"] = pl.location_ref;
    props["prone_hours"] = nlohmann::json::array();
    for (const auto& h : pl.hours)
      props["prone_hours"].push_back({{"hour", h.hour},
                                      {"typical", h.typical},
                                      {"threshold", h.threshold}});
    f["properties"] = props;
    doc["features"].push_back(f);
  }
  return doc.dump(2);
}

StageReport Pipeline::stage_export(std::optional<int> hour_filter) {
  const auto t0 = Clock::now();
  StageReport rep;
  rep.name = "export";
  auto text = read_file(cfg_.output_dir + "/prone.geojson");
  if (hour_filter) {
    auto doc = nlohmann::json::parse(text);
    nlohmann::json filtered = nlohmann::json::array();
    for (const auto& f : doc.at("features")) {
      for (const auto& h : f.at("properties").at("prone_hours")) {
        if (h.at("hour").get<int>() == *hour_filter) {
          filtered.push_back(f);
          break;
        }
      }
    }
    doc["features"] = filtered;
    text = doc.dump(2);
    write_file(cfg_.output_dir + "/prone_hour" +
                   std::to_string(*hour_filter) + ".geojson",
               text);
  }
  rep.counts["features"] = static_cast<int64_t>(
      nlohmann::json::parse(text).at("features").size());
  rep.ms = ms_since(t0);
  return rep;
}

RunReport Pipeline::run_all() {
  RunReport report;
  report.stages.push_back(stage_match());
  report.stages.push_back(stage_behaviors());
  report.stages.push_back(stage_perspective());
  report.stages.push_back(stage_restrict());
  report.stages.push_back(stage_violations());
  report.stages.push_back(stage_infer());
  report.stages.push_back(stage_export());
  report.match_points_per_s = match_points_per_s_;
  write_file(cfg_.output_dir + "/report.json", report.to_json());
  return report;
}

}  // namespace tvp
