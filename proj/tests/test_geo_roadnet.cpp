#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "tvp/geo.hpp"
#include "tvp/roadnet.hpp"

using namespace tvp;

namespace {

// independent great-circle distance via the spherical law of cosines
double slc_distance(const GeoPoint& a, const GeoPoint& b) {
  const double p1 = a.lat * kDegToRad, p2 = b.lat * kDegToRad;
  const double dl = (b.lng - a.lng) * kDegToRad;
  double c = std::sin(p1) * std::sin(p2) + std::cos(p1) * std::cos(p2) * std::cos(dl);
  c = std::min(1.0, std::max(-1.0, c));
  return kEarthRadiusM * std::acos(c);
}

RoadNetwork two_block_net() {
  // A --s1--> B --s2--> C on one parallel, plus a branch B --s3--> D north
  std::vector<Intersection> nodes = {
      {"A", {24.45, 118.05}},
      {"B", {24.45, 118.052}},
      {"C", {24.45, 118.054}},
      {"D", {24.452, 118.052}},
  };
  std::vector<RoadSegment> segs = {
      {"s1", "A", "B", {{24.45, 118.05}, {24.45, 118.052}}, 0, "main"},
      {"s2", "B", "C", {{24.45, 118.052}, {24.45, 118.054}}, 0, "main"},
      {"s3", "B", "D", {{24.45, 118.052}, {24.452, 118.052}}, 0, "side"},
  };
  return RoadNetwork::build(std::move(nodes), std::move(segs));
}

}  // namespace

TEST_CASE("direct distance agrees with an independent formula") {
  std::mt19937_64 rng(12345);
  std::uniform_real_distribution<double> lat(-60.0, 60.0), lng(-180.0, 180.0);
  for (int i = 0; i < 2000; ++i) {
    GeoPoint a{lat(rng), lng(rng)};
    GeoPoint b{a.lat + (lat(rng) / 600.0), a.lng + (lng(rng) / 1800.0)};
    const double d1 = direct_distance(a, b);
    const double d2 = slc_distance(a, b);
    CHECK(std::abs(d1 - d2) < 1e-4 + 1e-9 * d1);
  }
  CHECK(direct_distance({24.45, 118.05}, {24.45, 118.05}) == 0.0);
}

TEST_CASE("bearing cardinal directions and range") {
  const GeoPoint o{24.45, 118.05};
  CHECK(bearing_deg(o, {24.46, 118.05}) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(bearing_deg(o, {24.45, 118.06}) == doctest::Approx(90.0).epsilon(1e-3));
  CHECK(bearing_deg(o, {24.44, 118.05}) == doctest::Approx(180.0).epsilon(1e-9));
  CHECK(bearing_deg(o, {24.45, 118.04}) == doctest::Approx(270.0).epsilon(1e-3));
  CHECK_THROWS_AS(bearing_deg(o, o), std::invalid_argument);

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> d(-0.05, 0.05);
  for (int i = 0; i < 500; ++i) {
    GeoPoint b{o.lat + d(rng), o.lng + d(rng)};
    if (b.lat == o.lat && b.lng == o.lng) continue;
    const double br = bearing_deg(o, b);
    CHECK(br >= 0.0);
    CHECK(br < 360.0);
  }
}

TEST_CASE("east-north frame round trips") {
  const GeoPoint origin{24.45, 118.05};
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> d(-500.0, 500.0);
  for (int i = 0; i < 500; ++i) {
    const EastNorth en{d(rng), d(rng)};
    const GeoPoint p = from_east_north(origin, en);
    const EastNorth back = to_east_north(origin, p);
    CHECK(std::abs(back.east - en.east) < 1e-6);
    CHECK(std::abs(back.north - en.north) < 1e-6);
  }
}

TEST_CASE("network text parsing and validation") {
  CHECK_THROWS(RoadNetwork::load_text("S,s1,A,B,1:2;3:4\n"));  // dangling nodes
  CHECK_THROWS(RoadNetwork::load_text("N,A,24.45,118.05\nN,A,24.46,118.05\n"));
  CHECK_THROWS(RoadNetwork::load_text("N,A,not_a_number,118.05\n"));
  CHECK_THROWS(RoadNetwork::load_text(
      "N,A,24.45,118.05\nN,B,24.45,118.06\nS,s1,A,B,24.45:118.05\n"));

  const auto net = RoadNetwork::load_text(
      "# comment\n"
      "N,A,24.45,118.05\n"
      "N,B,24.45,118.052\n"
      "S,s1,A,B,24.45:118.05;24.45:118.052,main\n");
  REQUIRE(net.segments().size() == 1);
  CHECK(net.segments()[0].road_name == "main");
  CHECK(net.segments()[0].length ==
        doctest::Approx(direct_distance({24.45, 118.05}, {24.45, 118.052})));
}

TEST_CASE("projection matches a dense sampling oracle") {
  const auto net = two_block_net();
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> dla(-0.003, 0.003), dlo(-0.003, 0.003);
  for (int i = 0; i < 200; ++i) {
    const GeoPoint q{24.451 + dla(rng), 118.052 + dlo(rng)};
    for (const auto& seg : net.segments()) {
      const Projection pr = net.project_point(q, seg);
      // dense sweep along the polyline
      double best = 1e18;
      const GeoPoint& a = seg.geometry.front();
      const GeoPoint& b = seg.geometry.back();
      for (int k = 0; k <= 4000; ++k) {
        const double f = k / 4000.0;
        const GeoPoint s{a.lat + f * (b.lat - a.lat), a.lng + f * (b.lng - a.lng)};
        best = std::min(best, direct_distance(q, s));
      }
      CHECK(pr.distance <= best + 0.05);
      CHECK(pr.offset >= 0.0);
      CHECK(pr.offset <= seg.length + 1e-6);
    }
  }
}

TEST_CASE("nearest_segments equals an exhaustive scan") {
  const auto net = two_block_net();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> dla(-0.004, 0.004);
  for (int i = 0; i < 300; ++i) {
    const GeoPoint q{24.451 + dla(rng), 118.052 + dla(rng)};
    const double radius = 150.0;
    auto got = net.nearest_segments(q, radius);
    std::vector<std::string> expect;
    for (const auto& seg : net.segments())
      if (net.project_point(q, seg).distance <= radius)
        expect.push_back(seg.id);
    CHECK(got.size() == expect.size());
    for (size_t k = 1; k < got.size(); ++k)
      CHECK(got[k - 1].distance <= got[k].distance);
  }
}

TEST_CASE("route distance on the node graph") {
  const auto net = two_block_net();
  const auto* s1 = net.segment("s1");
  const auto* s2 = net.segment("s2");
  REQUIRE(s1);
  REQUIRE(s2);
  const GeoPoint p1{24.45, 118.051};  // mid s1
  const GeoPoint p2{24.45, 118.053};  // mid s2
  const Projection a = net.project_point(p1, *s1);
  const Projection b = net.project_point(p2, *s2);

  SUBCASE("cross-segment = remaining head + node path + tail offset") {
    const double want = (s1->length - a.offset) + 0.0 + b.offset;
    CHECK(net.route_distance(a, b) == doctest::Approx(want).epsilon(1e-9));
  }
  SUBCASE("same segment uses offset difference in both directions") {
    const Projection a2 = net.project_point({24.45, 118.0505}, *s1);
    CHECK(net.route_distance(a, a2) ==
          doctest::Approx(std::abs(a.offset - a2.offset)));
    CHECK(net.route_distance(a2, a) ==
          doctest::Approx(std::abs(a.offset - a2.offset)));
  }
  SUBCASE("directed graph: no path against segment direction") {
    CHECK(net.route_distance(b, a) == kUnreachable);
  }
  SUBCASE("bound cuts the search off") {
    CHECK(net.route_distance(a, b, 10.0) == kUnreachable);
  }
}

TEST_CASE("node distances match Floyd-Warshall on a random grid") {
  // 3x3 two-way grid
  std::vector<Intersection> nodes;
  std::vector<RoadSegment> segs;
  auto id = [](int r, int c) { return std::to_string(r * 3 + c); };
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      nodes.push_back({id(r, c), {24.45 + 0.002 * r, 118.05 + 0.002 * c}});
  int sid = 0;
  auto link = [&](int r1, int c1, int r2, int c2) {
    GeoPoint g1 = nodes[r1 * 3 + c1].location;
    GeoPoint g2 = nodes[r2 * 3 + c2].location;
    segs.push_back({"e" + std::to_string(sid++), id(r1, c1), id(r2, c2),
                    {g1, g2}, 0, ""});
  };
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) {
      if (c + 1 < 3) { link(r, c, r, c + 1); link(r, c + 1, r, c); }
      if (r + 1 < 3) { link(r, c, r + 1, c); link(r + 1, c, r, c); }
    }
  const auto net = RoadNetwork::build(nodes, segs);

  // oracle
  const int n = 9;
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 1e18));
  for (int i = 0; i < n; ++i) d[i][i] = 0.0;
  for (const auto& s : net.segments()) {
    const int u = std::stoi(s.from), v = std::stoi(s.to);
    d[u][v] = std::min(d[u][v], s.length);
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);

  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const double got = net.node_distance(std::to_string(i), std::to_string(j));
      CHECK(got == doctest::Approx(d[i][j]).epsilon(1e-9));
    }
}

TEST_CASE("node_path reconstructs a shortest route") {
  const auto net = two_block_net();
  auto path = net.node_path("A", "C");
  REQUIRE(path.has_value());
  REQUIRE(path->size() == 2);
  CHECK((*path)[0] == "s1");
  CHECK((*path)[1] == "s2");
  CHECK(net.node_path("A", "A")->empty());
  CHECK_FALSE(net.node_path("C", "A").has_value());
}
