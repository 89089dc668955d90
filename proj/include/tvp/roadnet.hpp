// Road network: immutable directed graph of intersections and segments with
// a uniform-grid spatial index. Two-way roads appear as two directed segment
// records. All query operations are const and safe for concurrent readers.
#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tvp/geo.hpp"

namespace tvp {

struct Intersection {
  std::string id;
  GeoPoint location;
};

struct RoadSegment {
  std::string id;
  std::string from;
  std::string to;
  std::vector<GeoPoint> geometry;  // >= 2 points, from -> to
  double length = 0.0;             // meters, sum of haversine leg lengths
  std::string road_name;           // optional
};

struct Projection {
  std::string segment_id;
  GeoPoint point;        // closest point on the segment polyline
  double offset = 0.0;   // meters from segment start
  double distance = 0.0; // meters from the query point
};

constexpr double kUnreachable = std::numeric_limits<double>::infinity();

class RoadNetwork {
 public:
  // Line-oriented text format, see docs: N,<id>,<lat>,<lng> and
  // S,<id>,<from>,<to>,<lat:lng;...>[,<road_name>]. '#' starts a comment.
  static RoadNetwork load_file(const std::string& path);
  static RoadNetwork load_text(const std::string& text,
                               const std::string& origin = "<text>");
  // GeoJSON FeatureCollection of LineStrings with properties id/from/to/name.
  static RoadNetwork load_geojson(const std::string& path);
  static RoadNetwork build(std::vector<Intersection> nodes,
                           std::vector<RoadSegment> segments);

  const std::vector<Intersection>& intersections() const { return nodes_; }
  const std::vector<RoadSegment>& segments() const { return segments_; }
  bool empty() const { return segments_.empty(); }

  const Intersection* node(const std::string& id) const;
  const RoadSegment* segment(const std::string& id) const;

  // Closest point on one segment; equal-distance ties go to the lower offset.
  Projection project_point(const GeoPoint& p, const RoadSegment& s) const;

  // All segments whose projection distance <= radius, ascending by distance.
  std::vector<Projection> nearest_segments(const GeoPoint& p,
                                           double radius) const;
  // Convenience: single nearest projection within radius, if any.
  std::optional<Projection> nearest_projection(const GeoPoint& p,
                                               double radius) const;

  // Shortest along-road distance between two projected points. Same-segment
  // pairs use |offset difference|; otherwise Dijkstra over the node graph
  // with an early-exit bound. Returns kUnreachable when disconnected or the
  // bound is exceeded.
  double route_distance(const Projection& a, const Projection& b,
                        double max_dist = kUnreachable) const;

  // Shortest node-to-node distance along segments (same bound semantics).
  double node_distance(const std::string& from, const std::string& to,
                       double max_dist = kUnreachable) const;

  // Segment ids of the shortest node path from -> to, empty when from == to,
  // nullopt when disconnected.
  std::optional<std::vector<std::string>> node_path(
      const std::string& from, const std::string& to,
      double max_dist = kUnreachable) const;

 private:
  struct OutEdge {
    uint32_t seg_index;
    uint32_t to_node;
    double length;
  };

  void build_index();
  uint32_t node_index(const std::string& id) const;

  std::vector<Intersection> nodes_;
  std::vector<RoadSegment> segments_;
  std::unordered_map<std::string, uint32_t> node_by_id_;
  std::unordered_map<std::string, uint32_t> segment_by_id_;
  std::vector<std::vector<OutEdge>> adjacency_;

  // Uniform grid over the bounding box; cells store segment indices.
  double cell_deg_lat_ = 0.0;
  double cell_deg_lng_ = 0.0;
  double min_lat_ = 0.0, min_lng_ = 0.0;
  int grid_rows_ = 0, grid_cols_ = 0;
  std::vector<std::vector<uint32_t>> grid_;
};

}  // namespace tvp
