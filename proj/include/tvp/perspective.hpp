// Driver-perspective modeling before turns: intersection clustering, bunch
// grouping by approach bearing, approach-point selection in a rotated local
// frame, cubic least-squares fitting, and tangent view-pose sampling.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tvp/behaviors.hpp"
#include "tvp/roadnet.hpp"

namespace tvp {

struct IntersectionCluster {
  int id = 0;
  GeoPoint centroid;
  std::vector<size_t> members;  // indices into the turn list
};

struct Bunch {
  std::string id;          // "<cluster>_<bin>"
  int cluster_id = 0;
  int bearing_bin = 0;
  GeoPoint location;       // intersection centroid
  double bb = 0.0;         // circular mean of member approach bearings
  std::vector<size_t> members;  // indices into the turn list
};

// Local frame with x along the approach bearing and y to the left of travel.
struct LocalFrame {
  GeoPoint origin;
  double rotation_deg = 0.0;  // approach bearing, clockwise from north
};

struct FramePoint {
  double x = 0.0;
  double y = 0.0;
};

FramePoint to_frame(const LocalFrame& f, const GeoPoint& p);
GeoPoint from_frame(const LocalFrame& f, const FramePoint& p);

struct ApproachPointSet {
  std::string bunch_id;
  LocalFrame frame;
  std::vector<FramePoint> points;
};

struct CubicCurve {
  double theta[4] = {0, 0, 0, 0};  // h(x) = t0 + t1 x + t2 x^2 + t3 x^3
  double x_min = 0.0;
  double x_max = 0.0;
  LocalFrame frame;
  bool degenerate = false;  // linear fallback used
};

constexpr double kFieldOfViewDeg = 74.0;

struct ViewPose {
  GeoPoint location;
  double heading = 0.0;  // degrees [0,360)
  double fov = kFieldOfViewDeg;
};

// Greedy centroid clustering of turn locations.
std::vector<IntersectionCluster> detect_intersections(
    const std::vector<TurningBehavior>& turns, double cluster_radius);

// Partition one cluster's turns into bearing bins centered on 0 degrees;
// exact bin boundaries go to the lower bin.
std::vector<Bunch> group_bunches(const std::vector<TurningBehavior>& turns,
                                 const IntersectionCluster& cluster,
                                 double bearing_bin = 45.0);

// Per member turn, fixes within theta seconds before
// the turn and no earlier than the previous turn on the same trajectory.
// The full turn list supplies the previous-turn lookup. Throws when fewer
// than 4 points survive.
ApproachPointSet select_approach_points(
    const Bunch& bunch, double theta_s,
    const std::vector<TurningBehavior>& all_turns,
    const std::vector<MatchedTrajectory>& trajectories);

// Least-squares cubic through the approach points (normal equations).
// 2-3 distinct x values fall back to a flagged linear fit; fewer throw.
CubicCurve fit_cubic(const ApproachPointSet& points);

double cubic_eval(const CubicCurve& c, double x);
double cubic_slope(const CubicCurve& c, double x);

// Residual 1/(2m) * sum (h(x)-y)^2 for a coefficient vector.
double cubic_residual(const std::vector<FramePoint>& pts, const double theta[4]);

// Uniform x sampling over the curve domain; heading from the tangent;
// poses snapped to the nearest segment when one is within snap_radius.
std::vector<ViewPose> sample_view_poses(const CubicCurve& curve, int count,
                                        const RoadNetwork& net,
                                        double snap_radius = 200.0);

}  // namespace tvp
