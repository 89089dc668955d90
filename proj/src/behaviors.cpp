#include "tvp/behaviors.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace tvp {

const char* turn_type_name(TurnType t) {
  switch (t) {
    case TurnType::straight: return "straight";
    case TurnType::right_turn: return "right_turn";
    case TurnType::u_turn: return "u_turn";
    case TurnType::left_turn: return "left_turn";
  }
  return "straight";
}

TurnType turn_type_from_name(const std::string& s) {
  if (s == "straight") return TurnType::straight;
  if (s == "right_turn") return TurnType::right_turn;
  if (s == "u_turn") return TurnType::u_turn;
  if (s == "left_turn") return TurnType::left_turn;
  throw std::runtime_error("unknown turn type: " + s);
}

TurnType classify_turn(double bb, double ba) {
  const double delta = normalize_deg(ba - bb);
  if (delta == 0.0) return TurnType::straight;
  if (delta < 160.0) return TurnType::right_turn;
  if (delta <= 200.0) return TurnType::u_turn;
  return TurnType::left_turn;
}

namespace {

// Forward travel bearing measured at the segment's end node.
double incoming_bearing(const RoadSegment& s) {
  const auto& g = s.geometry;
  return normalize_deg(bearing_deg(g.back(), g[g.size() - 2]) + 180.0);
}

// Forward travel bearing measured at the segment's start node.
double outgoing_bearing(const RoadSegment& s) {
  return bearing_deg(s.geometry.front(), s.geometry[1]);
}

}  // namespace

std::vector<TurningBehavior> extract_turnings(const MatchedTrajectory& m,
                                              const RoadNetwork& net,
                                              double straight_tol) {
  std::vector<TurningBehavior> out;
  if (m.matched.empty()) return out;

  // rebuild the route with its fix alignment, so a transition's timestamp
  // comes from its own visit even when the trajectory loops over the same
  // intersection several times
  std::vector<size_t> first_fix;
  const std::vector<std::string> route =
      complete_segment_route(m.matched, net, &first_fix);

  auto boundary_time = [&](size_t i, const GeoPoint& node) {
    // last fix at or before the transition vs first fix after it
    size_t after = kNoRouteFix;
    for (size_t p = i + 1; p < route.size() && after == kNoRouteFix; ++p)
      after = first_fix[p];
    if (after == kNoRouteFix) return m.matched.back().fix.t;
    if (after == 0) return m.matched.front().fix.t;
    const MatchedPoint& a = m.matched[after - 1];
    const MatchedPoint& b = m.matched[after];
    return direct_distance(a.projection.point, node) <=
                   direct_distance(b.projection.point, node)
               ? a.fix.t
               : b.fix.t;
  };

  for (size_t i = 0; i + 1 < route.size(); ++i) {
    const RoadSegment* s1 = net.segment(route[i]);
    const RoadSegment* s2 = net.segment(route[i + 1]);
    if (!s1 || !s2 || s1->to != s2->from) continue;
    const Intersection* node = net.node(s1->to);
    if (!node) continue;
    const double bb = incoming_bearing(*s1);
    const double ba = outgoing_bearing(*s2);
    const double delta = normalize_deg(ba - bb);
    if (delta <= straight_tol || delta >= 360.0 - straight_tol) continue;
    TurningBehavior tb;
    tb.type = classify_turn(bb, ba);
    tb.traj_id = m.traj_id;
    tb.intersection_id = node->id;
    tb.location = node->location;
    tb.t = boundary_time(i, node->location);
    tb.bb = bb;
    tb.ba = ba;
    tb.conf = 1.0;
    out.push_back(std::move(tb));
  }
  return out;
}

std::vector<ParkingBehavior> extract_parkings(const MatchedTrajectory& m,
                                              const ParkingParams& params,
                                              const RoadNetwork& net) {
  std::vector<ParkingBehavior> out;
  const auto& pts = m.matched;
  if (pts.size() < 2) return out;
  const size_t n = pts.size();
  std::vector<bool> slow(n - 1, false);
  for (size_t i = 0; i + 1 < n; ++i) {
    const double dt = static_cast<double>(pts[i + 1].fix.t - pts[i].fix.t);
    if (dt <= 0.0) continue;
    const double bound = params.delta * dt + 1.0;
    const double route =
        net.route_distance(pts[i].projection, pts[i + 1].projection, bound);
    if (route == kUnreachable) continue;
    slow[i] = route / dt < params.delta;
  }
  // maximal runs of consecutive slow pairs
  size_t i = 0;
  while (i + 1 < n) {
    if (!slow[i]) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j + 1 < n && slow[j]) ++j;  // window covers points [i, j]
    const int64_t st = pts[i].fix.t;
    const int64_t et = pts[j].fix.t;
    if (static_cast<double>(et - st) >= params.min_duration) {
      ParkingBehavior pk;
      pk.traj_id = m.traj_id;
      pk.st = st;
      pk.et = et;
      double lat = 0.0, lng = 0.0;
      for (size_t k = i; k <= j; ++k) {
        lat += pts[k].projection.point.lat;
        lng += pts[k].projection.point.lng;
      }
      const double cnt = static_cast<double>(j - i + 1);
      pk.location = {lat / cnt, lng / cnt};
      out.push_back(std::move(pk));
    }
    i = j;
  }
  return out;
}

std::vector<SpeedSample> extract_velocities(const MatchedTrajectory& m,
                                            const RoadNetwork& net,
                                            VelocityDiagnostics* diag) {
  std::vector<SpeedSample> out;
  if (m.matched.empty()) return out;

  // maximal runs of consecutive fixes on one known segment
  struct Run {
    size_t begin, end;  // [begin, end) into m.matched
    const RoadSegment* seg;
  };
  std::vector<Run> runs;
  for (size_t i = 0; i < m.matched.size();) {
    size_t j = i;
    while (j < m.matched.size() && m.matched[j].projection.segment_id ==
                                       m.matched[i].projection.segment_id)
      ++j;
    if (const RoadSegment* seg =
            net.segment(m.matched[i].projection.segment_id))
      runs.push_back({i, j, seg});
    i = j;
  }

  // node pass time between adjacent runs sharing an intersection,
  // interpolated between the boundary fixes so loops over the same node
  // stay local to their own visit
  struct Pass {
    size_t run;  // incoming run index
    double t;
  };
  std::vector<Pass> passes;
  for (size_t r = 0; r + 1 < runs.size(); ++r) {
    const RoadSegment* s1 = runs[r].seg;
    const RoadSegment* s2 = runs[r + 1].seg;
    if (s1->to != s2->from) continue;
    const MatchedPoint& p1 = m.matched[runs[r].end - 1];
    const MatchedPoint& p2 = m.matched[runs[r + 1].begin];
    const double rem = s1->length - p1.projection.offset;
    const double adv = p2.projection.offset;
    const double f = rem + adv > 0 ? rem / (rem + adv) : 0.5;
    passes.push_back(
        {r, static_cast<double>(p1.fix.t) + f * (p2.fix.t - p1.fix.t)});
  }

  for (size_t k = 0; k + 2 < passes.size(); ++k) {
    // three consecutive intersections joined by two same-road segments
    if (passes[k + 1].run != passes[k].run + 1 ||
        passes[k + 2].run != passes[k].run + 2)
      continue;
    const RoadSegment* a = runs[passes[k].run + 1].seg;
    const RoadSegment* b = runs[passes[k].run + 2].seg;
    if (a->road_name.empty() || a->road_name != b->road_name) continue;
    const double dt = passes[k + 2].t - passes[k].t;
    if (dt <= 0.0) {
      if (diag) ++diag->skipped_zero_dt;
      continue;
    }
    SpeedSample sp;
    sp.traj_id = m.traj_id;
    sp.road_name = a->road_name;
    sp.segment_ids = {a->id, b->id};
    sp.v = (a->length + b->length) / dt * 3.6;
    sp.t = std::llround((passes[k].t + passes[k + 2].t) / 2.0);
    out.push_back(std::move(sp));
  }
  return out;
}

}  // namespace tvp
