#include "tvp/mapmatch.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace tvp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kRouteCompletionBound = 5000.0;  // meters

double median(std::vector<double> v) {
  if (v.empty()) throw std::runtime_error("median of empty list");
  const size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    double lo = *std::max_element(v.begin(), v.begin() + mid);
    m = 0.5 * (m + lo);
  }
  return m;
}

}  // namespace

PointTrajectory preprocess(const PointTrajectory& t, double sigma_z,
                           double speed_cutoff_kmh) {
  if (t.fixes.empty()) throw std::runtime_error("empty trajectory: " + t.traj_id);
  const double speed_cutoff_mps = speed_cutoff_kmh / 3.6;
  PointTrajectory out;
  out.traj_id = t.traj_id;
  for (const auto& f : t.fixes) {
    if (out.fixes.empty()) {
      out.fixes.push_back(f);
      continue;
    }
    const GpsFix& prev = out.fixes.back();
    if (f.t <= prev.t) continue;  // duplicate or out-of-order timestamp
    const double d = direct_distance(prev.location, f.location);
    const double dt = static_cast<double>(f.t - prev.t);
    if (d / dt > speed_cutoff_mps) continue;  // abnormal jump
    if (d <= 2.0 * sigma_z) continue;         // thinning
    out.fixes.push_back(f);
  }
  if (out.fixes.empty())
    throw std::runtime_error("all points removed by preprocessing: " + t.traj_id);
  return out;
}

double estimate_sigma(std::vector<double> residuals, double floor_m) {
  if (residuals.empty())
    throw std::runtime_error("cannot estimate sigma from empty residuals");
  return std::max(1.4826 * median(std::move(residuals)), floor_m);
}

double estimate_beta(std::vector<double> gaps, double floor_m) {
  if (gaps.empty())
    throw std::runtime_error("cannot estimate beta from empty gaps");
  return std::max(median(std::move(gaps)) / std::log(2.0), floor_m);
}

HmmParams estimate_params(const std::vector<PointTrajectory>& trajs,
                          const RoadNetwork& net, HmmParams base) {
  std::vector<double> residuals;
  std::vector<double> gaps;
  for (const auto& t : trajs) {
    std::vector<std::pair<size_t, Projection>> provisional;
    for (size_t i = 0; i < t.fixes.size(); ++i) {
      auto p = net.nearest_projection(t.fixes[i].location, base.emission_cutoff);
      if (!p) continue;
      residuals.push_back(p->distance);
      provisional.emplace_back(i, std::move(*p));
    }
    for (size_t k = 1; k < provisional.size(); ++k) {
      const auto& [i0, p0] = provisional[k - 1];
      const auto& [i1, p1] = provisional[k];
      if (i1 != i0 + 1) continue;
      const double direct =
          direct_distance(t.fixes[i0].location, t.fixes[i1].location);
      const double route =
          net.route_distance(p0, p1, direct + base.transition_cutoff);
      if (route == kUnreachable) continue;
      gaps.push_back(std::abs(route - direct));
    }
  }
  HmmParams params = base;
  if (!residuals.empty())
    params.sigma_z = estimate_sigma(std::move(residuals), base.sigma_floor);
  if (!gaps.empty())
    params.beta = estimate_beta(std::move(gaps), base.beta_floor);
  return params;
}

double emission_prob(double d, const HmmParams& params) {
  if (d > params.emission_cutoff) return 0.0;
  const double z = d / params.sigma_z;
  return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * kPi) * params.sigma_z);
}

double transition_prob(double d_t, const HmmParams& params,
                       double implied_speed_kmh) {
  if (d_t > params.transition_cutoff) return 0.0;
  if (implied_speed_kmh > params.speed_cutoff) return 0.0;
  return std::exp(-d_t / params.beta) / params.beta;
}

double log_emission(double d, const HmmParams& params) {
  if (d > params.emission_cutoff) return kNegInf;
  const double z = d / params.sigma_z;
  return -0.5 * z * z - std::log(std::sqrt(2.0 * kPi) * params.sigma_z);
}

double log_transition(double d_t, const HmmParams& params,
                      double implied_speed_kmh) {
  if (d_t > params.transition_cutoff) return kNegInf;
  if (implied_speed_kmh > params.speed_cutoff) return kNegInf;
  return -d_t / params.beta - std::log(params.beta);
}

// Completed, adjacency-collapsed segment route for a matched run.
namespace {

// A run of one matched fix projected onto a junction node carries no
// evidence the segment was actually traveled (fixes at nodes are equally
// explained by every adjacent segment); such stubs fabricate turns.
constexpr double kJunctionStubTol = 15.0;  // meters

bool is_junction_stub(const std::vector<MatchedPoint>& matched, size_t begin,
                      size_t end, const RoadNetwork& net) {
  if (end - begin != 1) return false;
  const RoadSegment* seg = net.segment(matched[begin].projection.segment_id);
  if (!seg) return false;
  const GeoPoint p = matched[begin].projection.point;
  const Intersection* a = net.node(seg->from);
  const Intersection* b = net.node(seg->to);
  return (a && direct_distance(p, a->location) < kJunctionStubTol) ||
         (b && direct_distance(p, b->location) < kJunctionStubTol);
}

}  // namespace

std::vector<std::string> complete_segment_route(
    const std::vector<MatchedPoint>& matched, const RoadNetwork& net,
    std::vector<size_t>* first_fix) {
  // maximal runs of consecutive fixes on one segment
  std::vector<std::pair<size_t, size_t>> runs;  // [begin, end)
  for (size_t i = 0; i < matched.size();) {
    size_t j = i;
    while (j < matched.size() && matched[j].projection.segment_id ==
                                     matched[i].projection.segment_id)
      ++j;
    runs.push_back({i, j});
    i = j;
  }
  std::vector<std::string> collapsed;
  std::vector<size_t> collapsed_fix;  // first matched index per entry
  for (size_t r = 0; r < runs.size(); ++r) {
    const std::string& sid = matched[runs[r].first].projection.segment_id;
    if (runs.size() > 1 && is_junction_stub(matched, runs[r].first,
                                            runs[r].second, net)) {
      const bool edge_run = r == 0 || r + 1 == runs.size();
      const bool bridges_same =
          r > 0 && r + 1 < runs.size() &&
          matched[runs[r - 1].first].projection.segment_id ==
              matched[runs[r + 1].first].projection.segment_id;
      if (edge_run || bridges_same) continue;
    }
    if (collapsed.empty() || collapsed.back() != sid) {
      collapsed.push_back(sid);
      collapsed_fix.push_back(runs[r].first);
    }
  }
  std::vector<std::string> route;
  std::vector<size_t> route_fix;
  for (size_t i = 0; i < collapsed.size(); ++i) {
    if (!route.empty()) {
      const RoadSegment* prev = net.segment(route.back());
      const RoadSegment* next = net.segment(collapsed[i]);
      if (prev && next && prev->to != next->from) {
        auto gap = net.node_path(prev->to, next->from, kRouteCompletionBound);
        if (gap)
          for (auto& sid : *gap)
            if (route.back() != sid) {
              route.push_back(sid);
              route_fix.push_back(kNoRouteFix);  // gap segment, no fixes
            }
      }
    }
    if (route.empty() || route.back() != collapsed[i]) {
      route.push_back(collapsed[i]);
      route_fix.push_back(collapsed_fix[i]);
    }
  }
  if (first_fix) *first_fix = std::move(route_fix);
  return route;
}

std::vector<MatchedTrajectory> match(const PointTrajectory& t,
                                     const RoadNetwork& net,
                                     const HmmParams& params) {
  if (t.fixes.empty()) throw std::runtime_error("empty trajectory: " + t.traj_id);
  const size_t n = t.fixes.size();

  std::vector<std::vector<Projection>> cands(n);
  for (size_t i = 0; i < n; ++i)
    cands[i] = net.nearest_segments(t.fixes[i].location, params.emission_cutoff);

  std::vector<MatchedTrajectory> parts;
  std::vector<double> dp, ndp;
  std::vector<std::vector<uint32_t>> back;  // back[k][j]: best prev candidate
  size_t run_start = 0;

  auto finalize = [&](size_t run_end) {
    // run covers fixes [run_start, run_end) — back has run_end-run_start rows
    if (run_end <= run_start) return;
    uint32_t best = 0;
    for (uint32_t j = 1; j < dp.size(); ++j)
      if (dp[j] > dp[best]) best = j;
    if (dp[best] == kNegInf) return;  // lone fix with no usable candidate
    std::vector<uint32_t> choice(run_end - run_start);
    choice.back() = best;
    for (size_t k = run_end - run_start; k-- > 1;)
      choice[k - 1] = back[k][choice[k]];
    MatchedTrajectory mt;
    mt.traj_id = t.traj_id;
    for (size_t k = 0; k < choice.size(); ++k) {
      const size_t i = run_start + k;
      mt.matched.push_back({t.fixes[i], cands[i][choice[k]]});
    }
    mt.segment_route = complete_segment_route(mt.matched, net);
    parts.push_back(std::move(mt));
  };

  size_t i = 0;
  while (i < n && cands[i].empty()) ++i;
  if (i == n) return parts;
  run_start = i;
  dp.assign(cands[i].size(), 0.0);
  for (size_t j = 0; j < cands[i].size(); ++j)
    dp[j] = log_emission(cands[i][j].distance, params);
  back.assign(1, std::vector<uint32_t>(cands[i].size(), 0));

  for (++i; i < n; ++i) {
    if (cands[i].empty()) {
      finalize(i);
      // skip the unmatched fix and restart at the next fix with candidates
      while (i < n && cands[i].empty()) ++i;
      if (i == n) return parts;
      run_start = i;
      dp.assign(cands[i].size(), 0.0);
      for (size_t j = 0; j < cands[i].size(); ++j)
        dp[j] = log_emission(cands[i][j].distance, params);
      back.assign(1, std::vector<uint32_t>(cands[i].size(), 0));
      continue;
    }
    const size_t prev_i = i - 1;
    const double direct = direct_distance(t.fixes[prev_i].location,
                                          t.fixes[i].location);
    const double dt = static_cast<double>(t.fixes[i].t - t.fixes[prev_i].t);
    const double bound = std::min(direct + params.transition_cutoff,
                                  params.speed_cutoff / 3.6 * dt) + 1.0;
    ndp.assign(cands[i].size(), kNegInf);
    std::vector<uint32_t> bp(cands[i].size(), 0);
    for (uint32_t a = 0; a < cands[prev_i].size(); ++a) {
      if (dp[a] == kNegInf) continue;
      for (uint32_t b = 0; b < cands[i].size(); ++b) {
        const double route =
            net.route_distance(cands[prev_i][a], cands[i][b], bound);
        if (route == kUnreachable) continue;
        const double speed_kmh = route / dt * 3.6;
        const double lt = log_transition(std::abs(route - direct), params,
                                         speed_kmh);
        if (lt == kNegInf) continue;
        const double score = dp[a] + lt;
        if (score > ndp[b]) {
          ndp[b] = score;
          bp[b] = a;
        }
      }
    }
    bool any = false;
    for (uint32_t b = 0; b < cands[i].size(); ++b) {
      if (ndp[b] != kNegInf) {
        ndp[b] += log_emission(cands[i][b].distance, params);
        any = true;
      }
    }
    if (!any) {
      // HMM break: split here and restart at this fix
      finalize(i);
      run_start = i;
      dp.assign(cands[i].size(), 0.0);
      for (size_t j = 0; j < cands[i].size(); ++j)
        dp[j] = log_emission(cands[i][j].distance, params);
      back.assign(1, std::vector<uint32_t>(cands[i].size(), 0));
      continue;
    }
    dp = ndp;
    back.push_back(std::move(bp));
  }
  finalize(n);
  return parts;
}

std::vector<std::string> to_segment_route(const MatchedTrajectory& m) {
  std::vector<std::string> out;
  for (const auto& mp : m.matched) {
    if (out.empty() || out.back() != mp.projection.segment_id)
      out.push_back(mp.projection.segment_id);
  }
  return out;
}

}  // namespace tvp
