// Driving behavior extraction from matched trajectories: turning behaviors
// at shared intersections, adaptive-window parking behaviors, and per-road
// average-velocity samples.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tvp/mapmatch.hpp"
#include "tvp/roadnet.hpp"

namespace tvp {

enum class TurnType { straight, right_turn, u_turn, left_turn };

const char* turn_type_name(TurnType t);
TurnType turn_type_from_name(const std::string& s);

struct TurningBehavior {
  TurnType type = TurnType::straight;
  std::string traj_id;
  std::string intersection_id;
  GeoPoint location;  // the intersection
  int64_t t = 0;
  double bb = 0.0;  // bearing before, degrees [0,360)
  double ba = 0.0;  // bearing after, degrees [0,360)
  double conf = 1.0;
};

struct ParkingBehavior {
  std::string traj_id;
  GeoPoint location;  // mean of window points
  int64_t st = 0;
  int64_t et = 0;
};

struct SpeedSample {
  std::string traj_id;
  std::string road_name;
  std::vector<std::string> segment_ids;
  double v = 0.0;   // km/h
  int64_t t = 0;    // window midpoint
};

struct ParkingParams {
  double delta = 0.8;          // m/s
  double min_duration = 180.0; // seconds
};

// Threshold partition of delta = (ba - bb) mod 360:
// 0 -> straight, (0,160) -> right, [160,200] -> u-turn, (200,360) -> left.
TurnType classify_turn(double bb, double ba);

// One candidate per adjacent segment pair in the route; straight (within
// straight_tol degrees, absorbing great-circle bearing drift) is filtered.
std::vector<TurningBehavior> extract_turnings(const MatchedTrajectory& m,
                                              const RoadNetwork& net,
                                              double straight_tol = 1.0);

// Maximal windows where every consecutive matched pair moves slower than
// delta (route distance / dt); windows shorter than min_duration dropped.
std::vector<ParkingBehavior> extract_parkings(const MatchedTrajectory& m,
                                              const ParkingParams& params,
                                              const RoadNetwork& net);

struct VelocityDiagnostics {
  int skipped_zero_dt = 0;
};

// For every subsequence of 3 consecutive same-road intersections, the
// average speed over the connecting segments.
std::vector<SpeedSample> extract_velocities(const MatchedTrajectory& m,
                                            const RoadNetwork& net,
                                            VelocityDiagnostics* diag = nullptr);

}  // namespace tvp
