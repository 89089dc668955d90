#include "tvp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <sstream>

#include "nlohmann/json.hpp"
#include "tvp/io.hpp"

namespace tvp {

namespace {

constexpr int64_t kSpanBase = 1590969600;  // 2020-06-01T00:00:00Z

struct Edge {
  int a_node = 0;  // row * cols + col
  int b_node = 0;
  std::string seg_ab;  // lower twin id (a -> b)
  std::string seg_ba;
  std::string road;
  bool zoned = false;
  GeoPoint mid;
};

struct Grid {
  const SynthSpec* spec;
  double dlat, dlng;
  std::vector<GeoPoint> node_loc;
  std::vector<Edge> edges;
  // (from_node << 20 | to_node) -> edge index
  std::map<std::pair<int, int>, size_t> edge_by_pair;

  GeoPoint loc(int r, int c) const { return node_loc[r * spec->cols + c]; }
  int node_id(int r, int c) const { return r * spec->cols + c; }
};

Grid build_grid(const SynthSpec& spec) {
  Grid g;
  g.spec = &spec;
  g.dlat = spec.block_m / kMetersPerDegLat;
  g.dlng = spec.block_m /
           (kMetersPerDegLat * std::cos(spec.anchor_lat * kDegToRad));
  for (int r = 0; r < spec.rows; ++r)
    for (int c = 0; c < spec.cols; ++c)
      g.node_loc.push_back(
          {spec.anchor_lat + r * g.dlat, spec.anchor_lng + c * g.dlng});
  int counter = 0;
  auto add_edge = [&](int ra, int ca, int rb, int cb, const std::string& road) {
    Edge e;
    e.a_node = g.node_id(ra, ca);
    e.b_node = g.node_id(rb, cb);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%03d", counter++);
    e.seg_ab = std::string(buf) + "a";
    e.seg_ba = std::string(buf) + "b";
    e.road = road;
    const GeoPoint la = g.node_loc[e.a_node];
    const GeoPoint lb = g.node_loc[e.b_node];
    e.mid = {0.5 * (la.lat + lb.lat), 0.5 * (la.lng + lb.lng)};
    g.edge_by_pair[{e.a_node, e.b_node}] = g.edges.size();
    g.edge_by_pair[{e.b_node, e.a_node}] = g.edges.size();
    g.edges.push_back(std::move(e));
  };
  for (int r = 0; r < spec.rows; ++r)
    for (int c = 0; c + 1 < spec.cols; ++c)
      add_edge(r, c, r, c + 1, "H" + std::to_string(r));
  for (int c = 0; c < spec.cols; ++c)
    for (int r = 0; r + 1 < spec.rows; ++r)
      add_edge(r, c, r + 1, c, "V" + std::to_string(c));
  return g;
}

std::string directed_seg(const Grid& g, int from, int to) {
  const Edge& e = g.edges.at(g.edge_by_pair.at({from, to}));
  return from == e.a_node ? e.seg_ab : e.seg_ba;
}

// direction codes: 0 = +row (north), 1 = +col (east), 2 = -row, 3 = -col
constexpr int kDr[4] = {1, 0, -1, 0};
constexpr int kDc[4] = {0, 1, 0, -1};

}  // namespace

SynthResult generate_synthetic(const SynthSpec& spec) {
  if (spec.rows < 2 || spec.cols < 2)
    throw std::runtime_error("synthetic grid needs at least 2x2 intersections");
  Grid grid = build_grid(spec);
  SynthResult res;
  res.span_start = kSpanBase;
  res.span_end = kSpanBase + static_cast<int64_t>(spec.span_days) * 86400 - 1;

  // hotspot picks: interior intersection, a row-0 edge, the top horizontal road
  const int hot_r = std::clamp(spec.rows / 2, 1, spec.rows - 2);
  const int hot_c = std::clamp(spec.cols / 2, 1, spec.cols - 2);
  const int hot_node = grid.node_id(hot_r, hot_c);
  res.hot_turn_node = std::to_string(hot_node);
  res.hot_turn_location = grid.node_loc[hot_node];
  res.hot_road = "H" + std::to_string(spec.rows - 1);

  // zoned edges: spread deterministically, hot parking edge first (row 0)
  const size_t hot_edge_idx = grid.edge_by_pair.at(
      {grid.node_id(0, 0), grid.node_id(0, 1)});
  grid.edges[hot_edge_idx].zoned = true;
  res.hot_park_segment = grid.edges[hot_edge_idx].seg_ab;
  res.hot_park_location = grid.edges[hot_edge_idx].mid;
  {
    int want = std::max(1, spec.zoned_edge_count) - 1;
    const size_t stride = std::max<size_t>(1, grid.edges.size() / (want + 1));
    for (size_t i = stride; i < grid.edges.size() && want > 0; i += stride) {
      if (grid.edges[i].zoned) continue;
      grid.edges[i].zoned = true;
      --want;
    }
  }

  // ---- network file ----
  {
    std::ostringstream out;
    out << "# synthetic grid " << spec.rows << "x" << spec.cols << "\n";
    for (int n = 0; n < spec.rows * spec.cols; ++n) {
      char buf[96];
      std::snprintf(buf, sizeof(buf), "N,%d,%.9f,%.9f\n", n,
                    grid.node_loc[n].lat, grid.node_loc[n].lng);
      out << buf;
    }
    for (const auto& e : grid.edges) {
      const GeoPoint la = grid.node_loc[e.a_node];
      const GeoPoint lb = grid.node_loc[e.b_node];
      char buf[192];
      std::snprintf(buf, sizeof(buf), "S,%s,%d,%d,%.9f:%.9f;%.9f:%.9f,%s\n",
                    e.seg_ab.c_str(), e.a_node, e.b_node, la.lat, la.lng,
                    lb.lat, lb.lng, e.road.c_str());
      out << buf;
      std::snprintf(buf, sizeof(buf), "S,%s,%d,%d,%.9f:%.9f;%.9f:%.9f,%s\n",
                    e.seg_ba.c_str(), e.b_node, e.a_node, lb.lat, lb.lng,
                    la.lat, la.lng, e.road.c_str());
      out << buf;
    }
    res.network_text = out.str();
  }

  // ---- signs ----
  {
    std::ostringstream out;
    auto emit_sign = [&](const char* type, const GeoPoint& p, bool heading_null,
                         double heading) {
      nlohmann::json j;
      j["sign_type"] = type;
      j["lat"] = p.lat;
      j["lng"] = p.lng;
      if (heading_null)
        j["visible_heading"] = nullptr;
      else
        j["visible_heading"] = heading;
      j["confidence"] = 1.0;
      out << j.dump() << "\n";
    };
    // a no-left-turn sign on every approach of every intersection
    for (int r = 0; r < spec.rows; ++r)
      for (int c = 0; c < spec.cols; ++c)
        for (int d = 0; d < 4; ++d) {
          const int pr = r - kDr[d], pc = c - kDc[d];  // approach from behind
          if (pr < 0 || pr >= spec.rows || pc < 0 || pc >= spec.cols) continue;
          const GeoPoint node = grid.loc(r, c);
          const GeoPoint from = grid.loc(pr, pc);
          const double brg = bearing_deg(from, node);
          // 15 m before the intersection along the approach
          const EastNorth en = to_east_north(node, from);
          const double norm = std::hypot(en.east, en.north);
          const GeoPoint pos = from_east_north(
              node, {en.east / norm * 15.0, en.north / norm * 15.0});
          emit_sign("no_left_turn", pos, false, brg);
        }
    // no-parking signs 5 m off each zoned edge midpoint
    for (const auto& e : grid.edges) {
      if (!e.zoned) continue;
      const bool horizontal = e.road[0] == 'H';
      const GeoPoint pos = horizontal
          ? GeoPoint{e.mid.lat + 5.0 / kMetersPerDegLat, e.mid.lng}
          : from_east_north(e.mid, {5.0, 0.0});
      emit_sign("no_parking", pos, true, 0.0);
    }
    res.signs_jsonl = out.str();
  }

  // ---- speed limits: every road at 60 km/h ----
  {
    std::ostringstream out;
    out << "road_name,limit_kmh\n";
    for (int r = 0; r < spec.rows; ++r) out << "H" << r << ",60\n";
    for (int c = 0; c < spec.cols; ++c) out << "V" << c << ",60\n";
    res.limits_csv = out.str();
  }

  // ---- trajectories ----
  std::ostringstream traj_out;
  traj_out << "traj_id,timestamp,lat,lng\n";

  for (int k = 0; k < spec.traj_count; ++k) {
    std::mt19937_64 rng(spec.seed ^ (0x9E3779B97F4A7C15ULL * (k + 1)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma_m);
    const std::string tid = "t" + std::to_string(k);

    const int blocks = spec.route_blocks_min +
                       static_cast<int>(rng() % (spec.route_blocks_max -
                                                 spec.route_blocks_min + 1));
    const double base_speed = (35.0 + unit(rng) * 15.0) / 3.6;  // m/s

    // route construction: node sequence + per-arrival turn decisions
    int r = static_cast<int>(rng() % spec.rows);
    int c = static_cast<int>(rng() % spec.cols);
    int dir = -1;
    struct Step {
      int from_r, from_c, to_r, to_c;
      std::string road;
      double speed;
      bool park = false;
      bool speeding = false;
    };
    std::vector<Step> steps;
    std::vector<int> turn_violation_at;  // index into steps: violation at the
                                         // node entered by that step
    for (int b = 0; b < blocks; ++b) {
      std::vector<int> avail;
      for (int d = 0; d < 4; ++d) {
        const int nr = r + kDr[d], nc = c + kDc[d];
        if (nr < 0 || nr >= spec.rows || nc < 0 || nc >= spec.cols) continue;
        avail.push_back(d);
      }
      int chosen = -1;
      bool violated = false;
      if (dir < 0) {
        chosen = avail[rng() % avail.size()];
      } else {
        int left_d = -1;
        std::vector<std::pair<int, double>> lawful;  // (dir, weight)
        for (int d : avail) {
          const int rel = (d - dir + 4) % 4;
          if (rel == 3) {
            left_d = d;
          } else if (rel == 0) {
            lawful.push_back({d, 0.62});
          } else if (rel == 1) {
            lawful.push_back({d, 0.30});
          } else {
            lawful.push_back({d, 0.08});
          }
        }
        const bool hot = grid.node_id(r, c) == hot_node && spec.plant_hotspots;
        const double p_left =
            spec.turn_violation_rate * (hot ? spec.hot_multiplier : 1.0);
        if (left_d >= 0 && unit(rng) < p_left) {
          chosen = left_d;
          violated = true;
        } else if (!lawful.empty()) {
          double total = 0.0;
          for (auto& [d, w] : lawful) total += w;
          double pick = unit(rng) * total;
          for (auto& [d, w] : lawful) {
            pick -= w;
            if (pick <= 0.0) {
              chosen = d;
              break;
            }
          }
          if (chosen < 0) chosen = lawful.back().first;
        } else {
          chosen = left_d;  // boxed in: take the left without counting it
        }
      }
      if (violated) turn_violation_at.push_back(static_cast<int>(steps.size()));
      const int nr = r + kDr[chosen], nc = c + kDc[chosen];
      Step st;
      st.from_r = r;
      st.from_c = c;
      st.to_r = nr;
      st.to_c = nc;
      st.road = grid.edges[grid.edge_by_pair.at(
                               {grid.node_id(r, c), grid.node_id(nr, nc)})]
                    .road;
      st.speed = base_speed;
      steps.push_back(st);
      r = nr;
      c = nc;
      dir = chosen;
    }

    // speeding pass: maximal same-road runs of >= 2 blocks
    std::vector<std::pair<size_t, std::string>> speeding_marks;  // mid step
    for (size_t i = 0; i < steps.size();) {
      size_t j = i;
      while (j + 1 < steps.size() && steps[j + 1].road == steps[i].road) ++j;
      // a run is only observable when bracketed: an entry step before it and
      // a forward exit step after it (a trailing u-turn leaves the final
      // intersection pass unwitnessed)
      const bool bracketed =
          i >= 1 && j + 1 < steps.size() &&
          !(steps[j + 1].to_r == steps[j].from_r &&
            steps[j + 1].to_c == steps[j].from_c);
      if (j > i && bracketed) {
        const bool hot = steps[i].road == res.hot_road && spec.plant_hotspots;
        const double p =
            spec.speeding_rate * (hot ? spec.hot_multiplier : 1.0);
        if (unit(rng) < p) {
          const double fast = (75.0 + unit(rng) * 10.0) / 3.6;
          for (size_t s = i; s <= j; ++s) {
            steps[s].speed = fast;
            steps[s].speeding = true;
          }
          speeding_marks.push_back({(i + j) / 2, steps[i].road});
        }
      }
      i = j + 1;
    }

    // parking pass
    std::vector<std::pair<size_t, size_t>> park_marks;  // (step, edge index)
    for (size_t i = 0; i < steps.size(); ++i) {
      const auto& st = steps[i];
      const size_t ei = grid.edge_by_pair.at(
          {grid.node_id(st.from_r, st.from_c), grid.node_id(st.to_r, st.to_c)});
      if (!grid.edges[ei].zoned) continue;
      const bool hot = ei == hot_edge_idx && spec.plant_hotspots;
      const double p =
          spec.parking_violation_rate * (hot ? spec.hot_multiplier : 1.0);
      if (unit(rng) < p) {
        steps[i].park = true;
        park_marks.push_back({i, ei});
      }
    }

    // emission pass
    const int64_t day = static_cast<int64_t>(rng() % spec.span_days);
    const int64_t hour = 7 + static_cast<int64_t>(rng() % 15);
    double clock = static_cast<double>(res.span_start + day * 86400 +
                                       hour * 3600 +
                                       static_cast<int64_t>(rng() % 3600));
    int64_t last_t = -1;
    auto emit_fix = [&](const GeoPoint& exact, double at,
                        const std::string& seg) {
      int64_t t = std::llround(at);
      if (t <= last_t) t = last_t + 1;
      last_t = t;
      const GeoPoint p =
          from_east_north(exact, {noise(rng), noise(rng)});
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%s,%lld,%.9f,%.9f\n", tid.c_str(),
                    static_cast<long long>(t), p.lat, p.lng);
      traj_out << buf;
      res.truth_fixes.push_back({tid, t, seg});
    };

    for (size_t i = 0; i < steps.size(); ++i) {
      auto& st = steps[i];
      const GeoPoint a = grid.loc(st.from_r, st.from_c);
      const GeoPoint b = grid.loc(st.to_r, st.to_c);
      const std::string seg =
          directed_seg(grid, grid.node_id(st.from_r, st.from_c),
                       grid.node_id(st.to_r, st.to_c));
      const double L = spec.block_m;
      for (double s = 0.0; s < L; s += spec.fix_spacing_m) {
        const double f = s / L;
        const GeoPoint pos = {a.lat + f * (b.lat - a.lat),
                              a.lng + f * (b.lng - a.lng)};
        emit_fix(pos, clock + s / st.speed, seg);
        if (st.park && s >= 0.5 * L) {
          // dwell at the zoned edge midpoint
          const size_t ei = grid.edge_by_pair.at(
              {grid.node_id(st.from_r, st.from_c),
               grid.node_id(st.to_r, st.to_c)});
          const double dwell = 240.0 + unit(rng) * 300.0;
          const double dwell_start = clock + s / st.speed;
          for (double tt = 10.0; tt < dwell; tt += 30.0)
            emit_fix(pos, dwell_start + tt, seg);
          clock += dwell;
          res.truth.push_back({"illegal_parking", grid.edges[ei].seg_ab,
                               grid.edges[ei].mid, tid,
                               std::llround(dwell_start)});
          st.park = false;  // dwell only once per step
        }
      }
      clock += L / st.speed;
      // turn violation recorded at the node this step departs from
      for (int tv : turn_violation_at) {
        if (static_cast<size_t>(tv) == i) {
          const int node = grid.node_id(st.from_r, st.from_c);
          res.truth.push_back({"illegal_turn", std::to_string(node),
                               grid.node_loc[node], tid,
                               std::llround(clock - L / st.speed)});
        }
      }
      for (const auto& [mid, road] : speeding_marks) {
        if (mid == i) {
          const int node = grid.node_id(st.to_r, st.to_c);
          res.truth.push_back({"speeding", road, grid.node_loc[node], tid,
                               std::llround(clock)});
        }
      }
    }
  }
  res.trajectories_csv = traj_out.str();
  return res;
}

void write_synthetic(const SynthResult& r, const std::string& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir + "/network.txt", r.network_text);
  write_file(dir + "/trajectories.csv", r.trajectories_csv);
  write_file(dir + "/signs.jsonl", r.signs_jsonl);
  write_file(dir + "/limits.csv", r.limits_csv);
  {
    std::ostringstream out;
    out << "kind,ref,lat,lng,traj_id,t\n";
    for (const auto& v : r.truth) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%s,%s,%.9f,%.9f,%s,%lld\n",
                    v.kind.c_str(), v.ref.c_str(), v.location.lat,
                    v.location.lng, v.traj_id.c_str(),
                    static_cast<long long>(v.t));
      out << buf;
    }
    write_file(dir + "/truth.csv", out.str());
  }
  {
    std::ostringstream out;
    out << "traj_id,t,segment_id\n";
    for (const auto& f : r.truth_fixes)
      out << f.traj_id << "," << f.t << "," << f.segment_id << "\n";
    write_file(dir + "/truth_fixes.csv", out.str());
  }
}

}  // namespace tvp
