#include "tvp/perspective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace tvp {

FramePoint to_frame(const LocalFrame& f, const GeoPoint& p) {
  const EastNorth en = to_east_north(f.origin, p);
  const double r = f.rotation_deg * kDegToRad;
  const double de = std::sin(r), dn = std::cos(r);   // travel direction
  const double le = -dn, ln = de;                    // left of travel
  return {en.east * de + en.north * dn, en.east * le + en.north * ln};
}

GeoPoint from_frame(const LocalFrame& f, const FramePoint& p) {
  const double r = f.rotation_deg * kDegToRad;
  const double de = std::sin(r), dn = std::cos(r);
  const double le = -dn, ln = de;
  return from_east_north(f.origin,
                         {p.x * de + p.y * le, p.x * dn + p.y * ln});
}

std::vector<IntersectionCluster> detect_intersections(
    const std::vector<TurningBehavior>& turns, double cluster_radius) {
  if (turns.empty())
    throw std::runtime_error("cannot detect intersections from zero turns");
  std::vector<IntersectionCluster> clusters;
  for (size_t i = 0; i < turns.size(); ++i) {
    int best = -1;
    double best_d = cluster_radius;
    for (size_t c = 0; c < clusters.size(); ++c) {
      const double d = direct_distance(turns[i].location, clusters[c].centroid);
      if (d <= best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    if (best < 0) {
      IntersectionCluster cl;
      cl.id = static_cast<int>(clusters.size());
      cl.centroid = turns[i].location;
      cl.members.push_back(i);
      clusters.push_back(std::move(cl));
    } else {
      auto& cl = clusters[best];
      const double n = static_cast<double>(cl.members.size());
      cl.centroid.lat = (cl.centroid.lat * n + turns[i].location.lat) / (n + 1);
      cl.centroid.lng = (cl.centroid.lng * n + turns[i].location.lng) / (n + 1);
      cl.members.push_back(i);
    }
  }
  return clusters;
}

namespace {

int bearing_bin_index(double bb, double bin_width) {
  // bins centered on 0: bin 0 covers [-w/2, w/2); exact upper boundaries
  // belong to the lower bin
  const int nbins = static_cast<int>(std::lround(360.0 / bin_width));
  const double shifted = normalize_deg(bb + bin_width * 0.5);
  int idx = static_cast<int>(shifted / bin_width);
  if (shifted == idx * bin_width)  // exact boundary
    idx = (idx - 1 + nbins) % nbins;
  return idx % nbins;
}

double circular_mean_deg(const std::vector<double>& degs) {
  double s = 0.0, c = 0.0;
  for (double d : degs) {
    s += std::sin(d * kDegToRad);
    c += std::cos(d * kDegToRad);
  }
  return normalize_deg(std::atan2(s, c) / kDegToRad);
}

}  // namespace

std::vector<Bunch> group_bunches(const std::vector<TurningBehavior>& turns,
                                 const IntersectionCluster& cluster,
                                 double bearing_bin) {
  std::map<int, Bunch> by_bin;
  for (size_t idx : cluster.members) {
    const int bin = bearing_bin_index(turns[idx].bb, bearing_bin);
    auto& b = by_bin[bin];
    if (b.members.empty()) {
      b.id = std::to_string(cluster.id) + "_" + std::to_string(bin);
      b.cluster_id = cluster.id;
      b.bearing_bin = bin;
      b.location = cluster.centroid;
    }
    b.members.push_back(idx);
  }
  std::vector<Bunch> out;
  for (auto& [bin, b] : by_bin) {
    std::vector<double> bbs;
    for (size_t idx : b.members) bbs.push_back(turns[idx].bb);
    b.bb = circular_mean_deg(bbs);
    out.push_back(std::move(b));
  }
  return out;
}

ApproachPointSet select_approach_points(
    const Bunch& bunch, double theta_s,
    const std::vector<TurningBehavior>& all_turns,
    const std::vector<MatchedTrajectory>& trajectories) {
  ApproachPointSet set;
  set.bunch_id = bunch.id;
  set.frame = {bunch.location, bunch.bb};
  for (size_t idx : bunch.members) {
    const TurningBehavior& tn = all_turns[idx];
    // previous turn on the same trajectory, if any
    int64_t prev_t = std::numeric_limits<int64_t>::min();
    for (const auto& other : all_turns) {
      if (other.traj_id != tn.traj_id) continue;
      if (other.t < tn.t && other.t > prev_t) prev_t = other.t;
    }
    for (const auto& traj : trajectories) {
      if (traj.traj_id != tn.traj_id) continue;
      for (const auto& mp : traj.matched) {
        const int64_t t = mp.fix.t;
        if (t > tn.t) continue;
        if (static_cast<double>(tn.t - t) >= theta_s) continue;
        if (t < prev_t) continue;
        set.points.push_back(to_frame(set.frame, mp.projection.point));
      }
    }
  }
  if (set.points.size() < 4)
    throw std::runtime_error("insufficient approach points for bunch " +
                             bunch.id);
  return set;
}

namespace {

// Gaussian elimination with partial pivoting; A is n x n row-major.
bool solve_linear(std::vector<double>& A, std::vector<double>& b, int n) {
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r)
      if (std::abs(A[r * n + col]) > std::abs(A[piv * n + col])) piv = r;
    if (std::abs(A[piv * n + col]) < 1e-12) return false;
    if (piv != col) {
      for (int c = 0; c < n; ++c) std::swap(A[col * n + c], A[piv * n + c]);
      std::swap(b[col], b[piv]);
    }
    for (int r = col + 1; r < n; ++r) {
      const double f = A[r * n + col] / A[col * n + col];
      for (int c = col; c < n; ++c) A[r * n + c] -= f * A[col * n + c];
      b[r] -= f * b[col];
    }
  }
  for (int r = n - 1; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < n; ++c) acc -= A[r * n + c] * b[c];
    b[r] = acc / A[r * n + r];
  }
  return true;
}

size_t count_distinct_x(const std::vector<FramePoint>& pts) {
  std::vector<double> xs;
  for (const auto& p : pts) xs.push_back(p.x);
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  return xs.size();
}

}  // namespace

double cubic_eval(const CubicCurve& c, double x) {
  return ((c.theta[3] * x + c.theta[2]) * x + c.theta[1]) * x + c.theta[0];
}

double cubic_slope(const CubicCurve& c, double x) {
  return (3.0 * c.theta[3] * x + 2.0 * c.theta[2]) * x + c.theta[1];
}

double cubic_residual(const std::vector<FramePoint>& pts,
                      const double theta[4]) {
  double acc = 0.0;
  for (const auto& p : pts) {
    const double h =
        ((theta[3] * p.x + theta[2]) * p.x + theta[1]) * p.x + theta[0];
    acc += (h - p.y) * (h - p.y);
  }
  return acc / (2.0 * static_cast<double>(pts.size()));
}

CubicCurve fit_cubic(const ApproachPointSet& set) {
  const auto& pts = set.points;
  if (pts.empty()) throw std::runtime_error("cubic fit on empty point set");
  const size_t distinct = count_distinct_x(pts);
  if (distinct < 2)
    throw std::runtime_error("degenerate cubic fit: fewer than 2 distinct x");

  CubicCurve curve;
  curve.frame = set.frame;
  curve.x_min = pts[0].x;
  curve.x_max = pts[0].x;
  for (const auto& p : pts) {
    curve.x_min = std::min(curve.x_min, p.x);
    curve.x_max = std::max(curve.x_max, p.x);
  }

  const int order = distinct >= 4 ? 4 : 2;  // linear fallback
  curve.degenerate = order == 2;
  std::vector<double> A(order * order, 0.0), b(order, 0.0);
  for (const auto& p : pts) {
    double px[4] = {1.0, p.x, p.x * p.x, p.x * p.x * p.x};
    for (int r = 0; r < order; ++r) {
      for (int c = 0; c < order; ++c) A[r * order + c] += px[r] * px[c];
      b[r] += px[r] * p.y;
    }
  }
  if (!solve_linear(A, b, order))
    throw std::runtime_error("degenerate cubic fit: singular normal equations");
  for (int k = 0; k < order; ++k) curve.theta[k] = b[k];
  return curve;
}

std::vector<ViewPose> sample_view_poses(const CubicCurve& curve, int count,
                                        const RoadNetwork& net,
                                        double snap_radius) {
  std::vector<ViewPose> out;
  if (count < 1) return out;
  const double span = curve.x_max - curve.x_min;
  for (int k = 0; k < count; ++k) {
    const double x =
        count == 1 ? curve.x_min + 0.5 * span
                   : curve.x_min + span * static_cast<double>(k) /
                                       static_cast<double>(count - 1);
    const double y = cubic_eval(curve, x);
    const double m = cubic_slope(curve, x);
    // tangent (1, m) in the frame, rotated back to a world bearing
    const double r = curve.frame.rotation_deg * kDegToRad;
    const double de = std::sin(r), dn = std::cos(r);
    const double te = de - m * dn;  // 1*dir + m*left, east component
    const double tn = dn + m * de;  // north component
    ViewPose pose;
    pose.heading = normalize_deg(std::atan2(te, tn) / kDegToRad);
    pose.location = from_frame(curve.frame, {x, y});
    if (!net.empty()) {
      if (auto snapped = net.nearest_projection(pose.location, snap_radius))
        pose.location = snapped->point;
    }
    out.push_back(pose);
  }
  return out;
}

}  // namespace tvp
