#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "tvp/mapmatch.hpp"

using namespace tvp;

namespace {

// Small manhattan-style test network: 3x3 two-way grid, ~200 m blocks.
RoadNetwork grid_net() {
  std::vector<Intersection> nodes;
  std::vector<RoadSegment> segs;
  auto id = [](int r, int c) { return std::to_string(r * 3 + c); };
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      nodes.push_back({id(r, c), {24.45 + 0.0018 * r, 118.05 + 0.002 * c}});
  int sid = 0;
  auto link = [&](int a, int b) {
    segs.push_back({"e" + std::to_string(sid++), id(a / 3, a % 3),
                    id(b / 3, b % 3),
                    {nodes[a].location, nodes[b].location}, 0, ""});
  };
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      if (c + 1 < 3) { link(r * 3 + c, r * 3 + c + 1); link(r * 3 + c + 1, r * 3 + c); }
      if (r + 1 < 3) { link(r * 3 + c, (r + 1) * 3 + c); link((r + 1) * 3 + c, r * 3 + c); }
    }
  return RoadNetwork::build(std::move(nodes), std::move(segs));
}

// accumulates in the same order as the decoder (transition before the
// fix's own emission) so rounding agrees bit for bit
double score_sequence(const std::vector<int>& idx,
                      const std::vector<std::vector<Projection>>& cands,
                      const std::vector<GpsFix>& fixes, const RoadNetwork& net,
                      const HmmParams& params) {
  double score = log_emission(cands[0][idx[0]].distance, params);
  for (size_t i = 1; i < idx.size() && score > -1e17; ++i) {
    const double direct =
        direct_distance(fixes[i - 1].location, fixes[i].location);
    const double route = net.route_distance(
        cands[i - 1][idx[i - 1]], cands[i][idx[i]],
        direct + params.transition_cutoff + 1.0);
    const double dt = static_cast<double>(fixes[i].t - fixes[i - 1].t);
    if (route == kUnreachable)
      return -std::numeric_limits<double>::infinity();
    const double speed = dt > 0 ? route / dt * 3.6 : 1e9;
    score += log_transition(std::abs(route - direct), params, speed);
    score += log_emission(cands[i][idx[i]].distance, params);
  }
  return score;
}

// Exhaustive reference decode: enumerate every candidate sequence and keep
// every max log-probability path. Distinct sequences can round to the same
// total, so the decoder output is checked against the whole argmax set.
std::vector<std::vector<int>> exhaustive_argmax(
    const std::vector<std::vector<Projection>>& cands,
    const std::vector<GpsFix>& fixes, const RoadNetwork& net,
    const HmmParams& params) {
  const size_t n = cands.size();
  std::vector<int> idx(n, 0);
  std::vector<std::vector<int>> best;
  double best_score = -std::numeric_limits<double>::infinity();
  while (true) {
    const double score = score_sequence(idx, cands, fixes, net, params);
    if (std::isfinite(score)) {
      if (score > best_score) {
        best_score = score;
        best.assign(1, idx);
      } else if (score == best_score) {
        best.push_back(idx);
      }
    }
    size_t p = 0;
    while (p < n && ++idx[p] == static_cast<int>(cands[p].size())) {
      idx[p] = 0;
      ++p;
    }
    if (p == n) break;
  }
  return best;
}

// Sparser two-way ring (600 m blocks, no center node): at most 4 candidate
// segments anywhere under the 200 m emission cutoff, so exhaustive
// enumeration stays tractable.
RoadNetwork ring_net() {
  std::vector<Intersection> nodes;
  std::vector<RoadSegment> segs;
  auto id = [](int n) { return std::to_string(n); };
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      nodes.push_back({id(r * 3 + c), {24.45 + 0.0054 * r, 118.05 + 0.006 * c}});
  int sid = 0;
  auto link = [&](int a, int b) {
    segs.push_back({"e" + std::to_string(sid++), id(a), id(b),
                    {nodes[a].location, nodes[b].location}, 0, ""});
    segs.push_back({"e" + std::to_string(sid++), id(b), id(a),
                    {nodes[b].location, nodes[a].location}, 0, ""});
  };
  const int ring[8] = {0, 1, 2, 5, 8, 7, 6, 3};
  for (int i = 0; i < 8; ++i) link(ring[i], ring[(i + 1) % 8]);
  std::vector<Intersection> used;
  for (auto& n : nodes)
    if (n.id != "4") used.push_back(n);
  return RoadNetwork::build(std::move(used), std::move(segs));
}

}  // namespace

TEST_CASE("robust sigma estimate") {
  CHECK(estimate_sigma({3, 5, 7}) == doctest::Approx(7.413).epsilon(1e-12));
  CHECK(estimate_sigma({0.1, 0.2}) == 1.0);  // floor
  CHECK(estimate_sigma({2, 4, 6, 8}) == doctest::Approx(1.4826 * 5.0));
  CHECK_THROWS(estimate_sigma({}));
}

TEST_CASE("robust beta estimate") {
  CHECK(estimate_beta({4}) == doctest::Approx(5.77078).epsilon(1e-5));
  CHECK(estimate_beta({4, 4, 4}) == doctest::Approx(4.0 / std::log(2.0)));
  CHECK(estimate_beta({0.01}) == 1.0);  // floor
  CHECK_THROWS(estimate_beta({}));
}

TEST_CASE("emission probability: gaussian with a hard 200 m cutoff") {
  HmmParams p;
  p.sigma_z = 10.0;
  const double inv = 1.0 / (std::sqrt(2.0 * kPi) * p.sigma_z);
  CHECK(emission_prob(0.0, p) == doctest::Approx(inv).epsilon(1e-12));
  CHECK(emission_prob(10.0, p) ==
        doctest::Approx(inv * std::exp(-0.5)).epsilon(1e-12));
  // monotone decreasing
  for (double d = 0.0; d < 199.0; d += 7.0)
    CHECK(emission_prob(d, p) > emission_prob(d + 7.0, p));
  // boundary
  CHECK(emission_prob(200.0 - 1e-6, p) > 0.0);
  CHECK(emission_prob(200.0 + 1e-6, p) == 0.0);
  CHECK(std::isinf(log_emission(200.0 + 1e-6, p)));
}

TEST_CASE("transition probability: exponential with cutoff and speed prune") {
  HmmParams p;
  p.beta = 20.0;
  CHECK(transition_prob(0.0, p, 50.0) == doctest::Approx(1.0 / p.beta));
  CHECK(transition_prob(20.0, p, 50.0) ==
        doctest::Approx(std::exp(-1.0) / p.beta));
  for (double d = 0.0; d < 1990.0; d += 97.0)
    CHECK(transition_prob(d, p, 50.0) > transition_prob(d + 97.0, p, 50.0));
  CHECK(transition_prob(2000.0 - 1e-6, p, 50.0) > 0.0);
  CHECK(transition_prob(2000.0 + 1e-6, p, 50.0) == 0.0);
  CHECK(transition_prob(5.0, p, 180.0 - 1e-6) > 0.0);
  CHECK(transition_prob(5.0, p, 180.0 + 1e-6) == 0.0);
}

TEST_CASE("preprocess drops duplicates and outliers, thins, idempotent") {
  PointTrajectory t;
  t.traj_id = "p";
  const GeoPoint base{24.45, 118.05};
  auto at = [&](double east_m, int64_t ts) {
    GpsFix f;
    f.traj_id = "p";
    f.t = ts;
    f.location = from_east_north(base, {east_m, 0.0});
    return f;
  };
  t.fixes = {at(0, 0), at(3, 0),  // duplicate timestamp
             at(3, 10), at(5, 12),  // within 2*sigma of previous kept
             at(30, 20),
             at(5000, 21),  // implies ~1800 km/h
             at(60, 30)};
  const double sigma = 5.0;
  const auto clean = preprocess(t, sigma);
  REQUIRE(clean.fixes.size() == 3);
  CHECK(clean.fixes[0].t == 0);
  CHECK(clean.fixes[1].t == 20);
  CHECK(clean.fixes[2].t == 30);
  // fixpoint
  const auto again = preprocess(clean, sigma);
  REQUIRE(again.fixes.size() == clean.fixes.size());
  for (size_t i = 0; i < clean.fixes.size(); ++i)
    CHECK(again.fixes[i].t == clean.fixes[i].t);

  PointTrajectory empty;
  empty.traj_id = "e";
  CHECK_THROWS(preprocess(empty, sigma));
}

TEST_CASE("viterbi equals exhaustive enumeration on random instances") {
  const auto net = ring_net();
  HmmParams params;
  params.sigma_z = 8.0;
  params.beta = 15.0;
  std::mt19937_64 rng(31337);
  std::uniform_real_distribution<double> jitter(-40.0, 40.0);
  std::uniform_int_distribution<int> len(2, 8), pos(0, 7), dtd(20, 60);
  const int ring[8] = {0, 1, 2, 5, 8, 7, 6, 3};

  int checked = 0;
  for (int inst = 0; inst < 200; ++inst) {
    PointTrajectory t;
    t.traj_id = "v" + std::to_string(inst);
    // noisy random walk along the ring
    int cur = pos(rng);
    int64_t ts = 1000 * inst;
    const int n = len(rng);
    for (int i = 0; i < n; ++i) {
      const int node = ring[cur];
      const GeoPoint base{24.45 + 0.0054 * (node / 3),
                          118.05 + 0.006 * (node % 3)};
      GpsFix f;
      f.traj_id = t.traj_id;
      f.t = ts;
      f.location = from_east_north(base, {jitter(rng), jitter(rng)});
      t.fixes.push_back(f);
      ts += dtd(rng);
      cur = (cur + (rng() % 2 ? 1 : 7)) % 8;
    }

    std::vector<std::vector<Projection>> cands(t.fixes.size());
    bool feasible = true;
    for (size_t i = 0; i < t.fixes.size(); ++i) {
      cands[i] = net.nearest_segments(t.fixes[i].location, params.emission_cutoff);
      if (cands[i].empty() || cands[i].size() > 6) feasible = false;
    }
    if (!feasible) continue;

    const auto parts = match(t, net, params);
    if (parts.size() != 1) continue;  // split: no single-path oracle
    REQUIRE(parts[0].matched.size() == t.fixes.size());

    const auto maximizers = exhaustive_argmax(cands, t.fixes, net, params);
    REQUIRE(!maximizers.empty());
    bool hit = false;
    for (const auto& want : maximizers) {
      bool eq = want.size() == t.fixes.size();
      for (size_t i = 0; eq && i < t.fixes.size(); ++i)
        eq = parts[0].matched[i].projection.segment_id ==
             cands[i][want[i]].segment_id;
      if (eq) { hit = true; break; }
    }
    CHECK(hit);
    ++checked;
  }
  CHECK(checked > 100);
}

TEST_CASE("a fix with no candidates splits the trajectory") {
  const auto net = grid_net();
  HmmParams params;
  PointTrajectory t;
  t.traj_id = "s";
  auto fix = [&](GeoPoint p, int64_t ts) {
    GpsFix f;
    f.traj_id = "s";
    f.t = ts;
    f.location = p;
    return f;
  };
  t.fixes = {fix({24.45, 118.05}, 0), fix({24.45, 118.0505}, 10),
             fix({24.40, 118.05}, 20),  // > 200 m from every segment
             fix({24.4518, 118.05}, 3000), fix({24.4518, 118.0505}, 3010)};
  const auto parts = match(t, net, params);
  REQUIRE(parts.size() == 2);
  CHECK(parts[0].matched.size() == 2);
  CHECK(parts[1].matched.size() == 2);
}

TEST_CASE("segment route collapses adjacent duplicates") {
  const auto net = grid_net();
  HmmParams params;
  PointTrajectory t;
  t.traj_id = "r";
  const GeoPoint a{24.45, 118.05};
  for (int i = 0; i <= 20; ++i) {
    GpsFix f;
    f.traj_id = "r";
    f.t = i * 10;
    f.location = from_east_north(a, {i * 20.0, 0.0});
    t.fixes.push_back(f);
  }
  const auto parts = match(t, net, params);
  REQUIRE(parts.size() == 1);
  const auto& route = parts[0].segment_route;
  REQUIRE(!route.empty());
  for (size_t i = 1; i < route.size(); ++i) {
    CHECK(route[i] != route[i - 1]);
    const auto* s1 = net.segment(route[i - 1]);
    const auto* s2 = net.segment(route[i]);
    CHECK(s1->to == s2->from);  // completed route stays connected
  }
}
