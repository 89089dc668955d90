#include "tvp/violations.hpp"

#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <unordered_map>

namespace tvp {

const char* violation_kind_name(ViolationKind k) {
  switch (k) {
    case ViolationKind::illegal_turn: return "illegal_turn";
    case ViolationKind::illegal_parking: return "illegal_parking";
    case ViolationKind::speeding: return "speeding";
  }
  return "illegal_turn";
}

ViolationKind violation_kind_from_name(const std::string& s) {
  if (s == "illegal_turn") return ViolationKind::illegal_turn;
  if (s == "illegal_parking") return ViolationKind::illegal_parking;
  if (s == "speeding") return ViolationKind::speeding;
  throw std::runtime_error("unknown violation kind: " + s);
}

std::vector<Violation> detect_illegal_turns(
    const std::vector<BunchedTurn>& turns,
    const std::vector<NoTurnRule>& rules) {
  std::set<std::pair<std::string, TurnType>> forbidden;
  for (const auto& r : rules)
    forbidden.insert({r.bunch_id, forbidden_turn(r.forbidden)});
  std::vector<Violation> out;
  for (size_t i = 0; i < turns.size(); ++i) {
    const auto& bt = turns[i];
    if (!forbidden.count({bt.bunch_id, bt.turn.type})) continue;
    Violation v;
    v.kind = ViolationKind::illegal_turn;
    v.location_ref = bt.cluster_ref;
    v.t = bt.turn.t;
    v.behavior_ref = bt.turn.traj_id + "#turn" + std::to_string(i);
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<Violation> detect_illegal_parking(
    const std::vector<ParkingBehavior>& parkings,
    const std::vector<NoParkingZone>& zones, double zeta,
    const RoadNetwork& net) {
  std::unordered_map<std::string, std::vector<const NoParkingZone*>> by_segment;
  for (const auto& z : zones) by_segment[z.segment_id].push_back(&z);
  std::vector<Violation> out;
  for (size_t i = 0; i < parkings.size(); ++i) {
    const auto& pk = parkings[i];
    auto proj = net.nearest_projection(pk.location, 200.0);
    if (!proj) continue;
    auto it = by_segment.find(proj->segment_id);
    if (it == by_segment.end()) continue;
    bool hit = false;
    for (const NoParkingZone* z : it->second) {
      if (direct_distance(z->sign.location, pk.location) < zeta) {
        hit = true;
        break;
      }
    }
    if (!hit) continue;
    Violation v;
    v.kind = ViolationKind::illegal_parking;
    v.location_ref = "seg:" + proj->segment_id;
    v.t = pk.st;
    v.behavior_ref = pk.traj_id + "#park" + std::to_string(i);
    out.push_back(std::move(v));
  }
  return out;
}

std::vector<Violation> detect_speeding(const std::vector<SpeedSample>& samples,
                                       const std::vector<SpeedLimit>& limits,
                                       int* uncovered) {
  std::unordered_map<std::string, double> limit_by_road;
  for (const auto& l : limits) limit_by_road[l.road_name] = l.limit_kmh;
  std::vector<Violation> out;
  for (size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    auto it = limit_by_road.find(s.road_name);
    if (it == limit_by_road.end()) {
      if (uncovered) ++*uncovered;
      continue;
    }
    if (!(s.v > it->second)) continue;  // strict
    Violation v;
    v.kind = ViolationKind::speeding;
    v.location_ref = "road:" + s.road_name;
    v.t = s.t;
    v.behavior_ref = s.traj_id + "#speed" + std::to_string(i);
    out.push_back(std::move(v));
  }
  return out;
}

namespace {

int64_t hour_index(int64_t t, int tz_offset_s) {
  // floor division for times before the epoch as well
  const int64_t shifted = t + tz_offset_s;
  return shifted >= 0 ? shifted / 3600 : (shifted - 3599) / 3600;
}

int hour_of_day(int64_t hour_idx) {
  const int64_t h = ((hour_idx % 24) + 24) % 24;
  return static_cast<int>(h);
}

}  // namespace

std::vector<TemporalProfile> build_profiles(
    const std::vector<Violation>& violations, int64_t span_start,
    int64_t span_end, int tz_offset_s) {
  if (span_end < span_start)
    throw std::runtime_error("profile span end precedes start");
  const int64_t h0 = hour_index(span_start, tz_offset_s);
  const int64_t h1 = hour_index(span_end, tz_offset_s);
  const size_t H = static_cast<size_t>(h1 - h0 + 1);

  std::map<std::pair<std::string, int>, TemporalProfile> profiles;
  for (const auto& v : violations) {
    if (v.t < span_start || v.t > span_end)
      throw std::runtime_error("violation outside profile span at " +
                               v.location_ref);
    auto key = std::make_pair(v.location_ref, static_cast<int>(v.kind));
    auto& p = profiles[key];
    if (p.counts.empty()) {
      p.location_ref = v.location_ref;
      p.kind = v.kind;
      p.counts.assign(H, 0);
    }
    ++p.counts[static_cast<size_t>(hour_index(v.t, tz_offset_s) - h0)];
  }
  std::vector<TemporalProfile> out;
  for (auto& [key, p] : profiles) out.push_back(std::move(p));
  return out;
}

TypicalDayProfile typical_day(const TemporalProfile& profile,
                              int64_t span_start, int64_t span_end,
                              int tz_offset_s) {
  const int64_t h0 = hour_index(span_start, tz_offset_s);
  TypicalDayProfile out;
  out.location_ref = profile.location_ref;
  out.kind = profile.kind;
  double sums[24] = {};
  int occurrences[24] = {};
  for (size_t j = 0; j < profile.counts.size(); ++j) {
    const int hod = hour_of_day(h0 + static_cast<int64_t>(j));
    sums[hod] += profile.counts[j];
    ++occurrences[hod];
  }
  for (int h = 0; h < 24; ++h)
    out.means[h] = occurrences[h] > 0 ? sums[h] / occurrences[h] : 0.0;
  return out;
}

ThresholdSet compute_thresholds(const std::vector<TypicalDayProfile>& typicals) {
  if (typicals.empty())
    throw std::runtime_error("cannot compute thresholds from zero candidates");
  ThresholdSet set;
  const double n = static_cast<double>(typicals.size());
  for (int h = 0; h < 24; ++h) {
    double sum = 0.0;
    for (const auto& t : typicals) sum += t.means[h];
    const double mu = sum / n;
    double var = 0.0;
    for (const auto& t : typicals) {
      const double d = t.means[h] - mu;
      var += d * d;
    }
    var /= n;  // population deviation, divide by N
    set.mu[h] = mu;
    set.sigma[h] = std::sqrt(var);
    set.th[h] = mu + 2.0 * set.sigma[h];
  }
  return set;
}

std::vector<ProneLocation> infer_prone_locations(
    const std::vector<TypicalDayProfile>& typicals, const ThresholdSet& th) {
  std::vector<ProneLocation> out;
  for (const auto& t : typicals) {
    ProneLocation pl;
    pl.location_ref = t.location_ref;
    pl.kind = t.kind;
    for (int h = 0; h < 24; ++h) {
      if (t.means[h] > th.th[h])  // strict
        pl.hours.push_back({h, t.means[h], th.th[h]});
    }
    if (!pl.hours.empty()) out.push_back(std::move(pl));
  }
  return out;
}

}  // namespace tvp
