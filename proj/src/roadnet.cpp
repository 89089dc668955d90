#include "tvp/roadnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <queue>
#include <sstream>
#include <stdexcept>

#include "nlohmann/json.hpp"

namespace tvp {

namespace {

double polyline_length(const std::vector<GeoPoint>& pts) {
  double sum = 0.0;
  for (size_t i = 1; i < pts.size(); ++i)
    sum += direct_distance(pts[i - 1], pts[i]);
  return sum;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.push_back("");
  return out;
}

double parse_double(const std::string& s, const std::string& what, int lineno) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("network load error at line " +
                             std::to_string(lineno) + ": bad " + what + " '" +
                             s + "'");
  }
}

}  // namespace

RoadNetwork RoadNetwork::load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open network file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return load_text(buf.str(), path);
}

RoadNetwork RoadNetwork::load_text(const std::string& text,
                                   const std::string& origin) {
  std::vector<Intersection> nodes;
  std::vector<RoadSegment> segments;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    auto fields = split(line, ',');
    if (fields[0] == "N") {
      if (fields.size() != 4)
        throw std::runtime_error(origin + ": malformed node record at line " +
                                 std::to_string(lineno));
      Intersection n;
      n.id = fields[1];
      n.location.lat = parse_double(fields[2], "lat", lineno);
      n.location.lng = parse_double(fields[3], "lng", lineno);
      if (!valid_coords(n.location))
        throw std::runtime_error(origin + ": coordinates out of range at line " +
                                 std::to_string(lineno));
      nodes.push_back(std::move(n));
    } else if (fields[0] == "S") {
      if (fields.size() != 5 && fields.size() != 6)
        throw std::runtime_error(origin +
                                 ": malformed segment record at line " +
                                 std::to_string(lineno));
      RoadSegment s;
      s.id = fields[1];
      s.from = fields[2];
      s.to = fields[3];
      for (const auto& pt : split(fields[4], ';')) {
        auto ll = split(pt, ':');
        if (ll.size() != 2)
          throw std::runtime_error(origin + ": malformed geometry at line " +
                                   std::to_string(lineno));
        GeoPoint g{parse_double(ll[0], "geometry lat", lineno),
                   parse_double(ll[1], "geometry lng", lineno)};
        s.geometry.push_back(g);
      }
      if (fields.size() == 6) s.road_name = fields[5];
      segments.push_back(std::move(s));
    } else {
      throw std::runtime_error(origin + ": unknown record type at line " +
                               std::to_string(lineno));
    }
  }
  return build(std::move(nodes), std::move(segments));
}

RoadNetwork RoadNetwork::load_geojson(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open geojson file: " + path);
  nlohmann::json doc = nlohmann::json::parse(in);
  std::vector<Intersection> nodes;
  std::vector<RoadSegment> segments;
  std::unordered_map<std::string, GeoPoint> seen_nodes;
  for (const auto& f : doc.at("features")) {
    if (f.at("geometry").at("type") != "LineString") continue;
    RoadSegment s;
    const auto& props = f.at("properties");
    s.id = props.at("id").is_string() ? props.at("id").get<std::string>()
                                      : props.at("id").dump();
    s.from = props.at("from").is_string() ? props.at("from").get<std::string>()
                                          : props.at("from").dump();
    s.to = props.at("to").is_string() ? props.at("to").get<std::string>()
                                      : props.at("to").dump();
    if (props.contains("name") && props.at("name").is_string())
      s.road_name = props.at("name").get<std::string>();
    for (const auto& coord : f.at("geometry").at("coordinates"))
      s.geometry.push_back({coord.at(1).get<double>(), coord.at(0).get<double>()});
    if (s.geometry.size() < 2)
      throw std::runtime_error(path + ": LineString with < 2 points: " + s.id);
    seen_nodes.emplace(s.from, s.geometry.front());
    seen_nodes.emplace(s.to, s.geometry.back());
    segments.push_back(std::move(s));
  }
  for (auto& [id, loc] : seen_nodes) nodes.push_back({id, loc});
  std::sort(nodes.begin(), nodes.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  return build(std::move(nodes), std::move(segments));
}

RoadNetwork RoadNetwork::build(std::vector<Intersection> nodes,
                               std::vector<RoadSegment> segments) {
  RoadNetwork net;
  net.nodes_ = std::move(nodes);
  net.segments_ = std::move(segments);
  for (uint32_t i = 0; i < net.nodes_.size(); ++i) {
    if (!net.node_by_id_.emplace(net.nodes_[i].id, i).second)
      throw std::runtime_error("duplicate intersection id: " + net.nodes_[i].id);
  }
  net.adjacency_.resize(net.nodes_.size());
  for (uint32_t i = 0; i < net.segments_.size(); ++i) {
    auto& s = net.segments_[i];
    if (s.geometry.size() < 2)
      throw std::runtime_error("segment " + s.id + " has < 2 geometry points");
    if (!net.segment_by_id_.emplace(s.id, i).second)
      throw std::runtime_error("duplicate segment id: " + s.id);
    auto fromIt = net.node_by_id_.find(s.from);
    auto toIt = net.node_by_id_.find(s.to);
    if (fromIt == net.node_by_id_.end() || toIt == net.node_by_id_.end())
      throw std::runtime_error("segment " + s.id +
                               " references unknown intersection");
    s.length = polyline_length(s.geometry);
    net.adjacency_[fromIt->second].push_back({i, toIt->second, s.length});
  }
  net.build_index();
  return net;
}

void RoadNetwork::build_index() {
  if (segments_.empty()) return;
  double min_lat = 90, max_lat = -90, min_lng = 180, max_lng = -180;
  for (const auto& s : segments_) {
    for (const auto& g : s.geometry) {
      min_lat = std::min(min_lat, g.lat);
      max_lat = std::max(max_lat, g.lat);
      min_lng = std::min(min_lng, g.lng);
      max_lng = std::max(max_lng, g.lng);
    }
  }
  const double mid_lat = 0.5 * (min_lat + max_lat);
  const double coslat =
      std::max(0.01, std::cos(mid_lat * kDegToRad));
  // ~250 m cells
  cell_deg_lat_ = 250.0 / kMetersPerDegLat;
  cell_deg_lng_ = 250.0 / (kMetersPerDegLat * coslat);
  min_lat_ = min_lat - cell_deg_lat_;
  min_lng_ = min_lng - cell_deg_lng_;
  grid_rows_ = static_cast<int>((max_lat - min_lat_) / cell_deg_lat_) + 2;
  grid_cols_ = static_cast<int>((max_lng - min_lng_) / cell_deg_lng_) + 2;
  grid_.assign(static_cast<size_t>(grid_rows_) * grid_cols_, {});
  for (uint32_t i = 0; i < segments_.size(); ++i) {
    const auto& g = segments_[i].geometry;
    for (size_t k = 1; k < g.size(); ++k) {
      int r0 = static_cast<int>((std::min(g[k - 1].lat, g[k].lat) - min_lat_) /
                                cell_deg_lat_);
      int r1 = static_cast<int>((std::max(g[k - 1].lat, g[k].lat) - min_lat_) /
                                cell_deg_lat_);
      int c0 = static_cast<int>((std::min(g[k - 1].lng, g[k].lng) - min_lng_) /
                                cell_deg_lng_);
      int c1 = static_cast<int>((std::max(g[k - 1].lng, g[k].lng) - min_lng_) /
                                cell_deg_lng_);
      for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) {
          auto& cell = grid_[static_cast<size_t>(r) * grid_cols_ + c];
          if (cell.empty() || cell.back() != i) cell.push_back(i);
        }
    }
  }
}

const Intersection* RoadNetwork::node(const std::string& id) const {
  auto it = node_by_id_.find(id);
  return it == node_by_id_.end() ? nullptr : &nodes_[it->second];
}

const RoadSegment* RoadNetwork::segment(const std::string& id) const {
  auto it = segment_by_id_.find(id);
  return it == segment_by_id_.end() ? nullptr : &segments_[it->second];
}

uint32_t RoadNetwork::node_index(const std::string& id) const {
  auto it = node_by_id_.find(id);
  if (it == node_by_id_.end())
    throw std::runtime_error("unknown intersection id: " + id);
  return it->second;
}

Projection RoadNetwork::project_point(const GeoPoint& p,
                                      const RoadSegment& s) const {
  Projection best;
  best.segment_id = s.id;
  best.distance = std::numeric_limits<double>::infinity();
  double cum = 0.0;
  for (size_t k = 1; k < s.geometry.size(); ++k) {
    const GeoPoint& a = s.geometry[k - 1];
    const GeoPoint& b = s.geometry[k];
    const double leg = direct_distance(a, b);
    const EastNorth ea = to_east_north(p, a);
    const EastNorth eb = to_east_north(p, b);
    const double dx = eb.east - ea.east, dy = eb.north - ea.north;
    const double len2 = dx * dx + dy * dy;
    double t = 0.0;
    if (len2 > 0.0)
      t = std::clamp(-(ea.east * dx + ea.north * dy) / len2, 0.0, 1.0);
    const GeoPoint c =
        from_east_north(p, {ea.east + t * dx, ea.north + t * dy});
    const double dist = direct_distance(p, c);
    const double offset = std::min(cum + t * leg, cum + leg);
    // strictly-less keeps the earlier (lower-offset) leg on ties
    if (dist < best.distance - 1e-12) {
      best.point = c;
      best.distance = dist;
      best.offset = offset;
    }
    cum += leg;
  }
  return best;
}

std::vector<Projection> RoadNetwork::nearest_segments(const GeoPoint& p,
                                                      double radius) const {
  std::vector<Projection> out;
  if (segments_.empty()) return out;
  const double dlat = radius / kMetersPerDegLat + cell_deg_lat_;
  const double coslat = std::max(0.01, std::cos(p.lat * kDegToRad));
  const double dlng = radius / (kMetersPerDegLat * coslat) + cell_deg_lng_;
  int r0 = static_cast<int>((p.lat - dlat - min_lat_) / cell_deg_lat_);
  int r1 = static_cast<int>((p.lat + dlat - min_lat_) / cell_deg_lat_);
  int c0 = static_cast<int>((p.lng - dlng - min_lng_) / cell_deg_lng_);
  int c1 = static_cast<int>((p.lng + dlng - min_lng_) / cell_deg_lng_);
  r0 = std::max(r0, 0);
  c0 = std::max(c0, 0);
  r1 = std::min(r1, grid_rows_ - 1);
  c1 = std::min(c1, grid_cols_ - 1);
  std::vector<char> seen(segments_.size(), 0);
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c)
      for (uint32_t i : grid_[static_cast<size_t>(r) * grid_cols_ + c]) {
        if (seen[i]) continue;
        seen[i] = 1;
        Projection proj = project_point(p, segments_[i]);
        if (proj.distance <= radius) out.push_back(std::move(proj));
      }
  std::sort(out.begin(), out.end(), [](const Projection& a, const Projection& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.segment_id < b.segment_id;
  });
  return out;
}

std::optional<Projection> RoadNetwork::nearest_projection(const GeoPoint& p,
                                                          double radius) const {
  auto v = nearest_segments(p, radius);
  if (v.empty()) return std::nullopt;
  return v.front();
}

double RoadNetwork::route_distance(const Projection& a, const Projection& b,
                                   double max_dist) const {
  const RoadSegment* sa = segment(a.segment_id);
  const RoadSegment* sb = segment(b.segment_id);
  if (!sa || !sb)
    throw std::runtime_error("projection references unknown segment");
  if (sa == sb) return std::abs(a.offset - b.offset);
  const double head = sa->length - a.offset;
  const double tail = b.offset;
  if (head + tail > max_dist) return kUnreachable;
  const double mid =
      node_distance(sa->to, sb->from, max_dist - head - tail);
  if (mid == kUnreachable) return kUnreachable;
  const double total = head + mid + tail;
  return total > max_dist ? kUnreachable : total;
}

double RoadNetwork::node_distance(const std::string& from,
                                  const std::string& to,
                                  double max_dist) const {
  const uint32_t src = node_index(from);
  const uint32_t dst = node_index(to);
  if (src == dst) return 0.0;
  using Entry = std::pair<double, uint32_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
  std::vector<double> dist(nodes_.size(),
                           std::numeric_limits<double>::infinity());
  dist[src] = 0.0;
  heap.push({0.0, src});
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    if (d > max_dist) break;
    if (u == dst) return d;
    for (const auto& e : adjacency_[u]) {
      const double nd = d + e.length;
      if (nd < dist[e.to_node] && nd <= max_dist) {
        dist[e.to_node] = nd;
        heap.push({nd, e.to_node});
      }
    }
  }
  return kUnreachable;
}

std::optional<std::vector<std::string>> RoadNetwork::node_path(
    const std::string& from, const std::string& to, double max_dist) const {
  const uint32_t src = node_index(from);
  const uint32_t dst = node_index(to);
  if (src == dst) return std::vector<std::string>{};
  using Entry = std::pair<double, uint32_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<Entry>> heap;
  std::vector<double> dist(nodes_.size(),
                           std::numeric_limits<double>::infinity());
  std::vector<uint32_t> via_seg(nodes_.size(), UINT32_MAX);
  std::vector<uint32_t> prev(nodes_.size(), UINT32_MAX);
  dist[src] = 0.0;
  heap.push({0.0, src});
  while (!heap.empty()) {
    auto [d, u] = heap.top();
    heap.pop();
    if (d > dist[u]) continue;
    if (d > max_dist) break;
    if (u == dst) break;
    for (const auto& e : adjacency_[u]) {
      const double nd = d + e.length;
      if (nd < dist[e.to_node] && nd <= max_dist) {
        dist[e.to_node] = nd;
        via_seg[e.to_node] = e.seg_index;
        prev[e.to_node] = u;
        heap.push({nd, e.to_node});
      }
    }
  }
  if (via_seg[dst] == UINT32_MAX) return std::nullopt;
  std::vector<std::string> path;
  for (uint32_t u = dst; u != src; u = prev[u])
    path.push_back(segments_[via_seg[u]].id);
  std::reverse(path.begin(), path.end());
  return path;
}

}  // namespace tvp
