// HMM map matching: preprocessing, robust parameter estimation, Gaussian
// emission / exponential transition model with hard cutoffs, and log-domain
// Viterbi decoding with trajectory splitting on broken steps.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tvp/roadnet.hpp"

namespace tvp {

struct GpsFix {
  std::string traj_id;
  int64_t t = 0;  // seconds since epoch, UTC
  GeoPoint location;
};

struct PointTrajectory {
  std::string traj_id;
  std::vector<GpsFix> fixes;  // strictly increasing t
};

struct HmmParams {
  double sigma_z = 10.0;            // meters, GPS noise std
  double beta = 20.0;               // meters, transition scale
  double emission_cutoff = 200.0;   // meters
  double transition_cutoff = 2000.0;  // meters
  double speed_cutoff = 180.0;      // km/h
  double sigma_floor = 1.0;         // meters
  double beta_floor = 1.0;          // meters
};

struct MatchedPoint {
  GpsFix fix;
  Projection projection;
};

struct MatchedTrajectory {
  std::string traj_id;
  std::vector<MatchedPoint> matched;
  // Adjacent-duplicate-collapsed projection segment sequence, completed with
  // shortest-path segments so consecutive entries share an intersection.
  std::vector<std::string> segment_route;
};

// Duplicate-timestamp removal, 180 km/h outlier removal, then greedy
// thinning of fixes within 2*sigma_z of the previously kept fix.
PointTrajectory preprocess(const PointTrajectory& t, double sigma_z,
                           double speed_cutoff_kmh = 180.0);

// sigma_z = 1.4826 * median(residuals), floored.
double estimate_sigma(std::vector<double> residuals, double floor_m = 1.0);

// beta = (1/ln 2) * median(route-vs-direct gaps), floored.
double estimate_beta(std::vector<double> gaps, double floor_m = 1.0);

// One-pass bootstrap from nearest-projection provisional matches.
HmmParams estimate_params(const std::vector<PointTrajectory>& trajs,
                          const RoadNetwork& net, HmmParams base = {});

// Gaussian density in projection distance; exactly 0 beyond the cutoff.
double emission_prob(double d, const HmmParams& params);
// Exponential density in |route - direct|; 0 beyond cutoff / over speed.
double transition_prob(double d_t, const HmmParams& params,
                       double implied_speed_kmh);
// Log-domain counterparts (-inf for zero probability).
double log_emission(double d, const HmmParams& params);
double log_transition(double d_t, const HmmParams& params,
                      double implied_speed_kmh);

// Viterbi decode over nearest_segments candidates. A fix with no candidates
// or no feasible incoming transition splits the trajectory.
std::vector<MatchedTrajectory> match(const PointTrajectory& t,
                                     const RoadNetwork& net,
                                     const HmmParams& params);

// Adjacent-duplicate collapse of matched projection segment ids.
std::vector<std::string> to_segment_route(const MatchedTrajectory& m);

// Sentinel in the first-fix map for gap-completed segments with no fixes.
constexpr size_t kNoRouteFix = static_cast<size_t>(-1);

// Collapsed route with shortest-path gap completion so consecutive entries
// share an intersection wherever the graph allows. When first_fix is given
// it receives, per route entry, the first matched index projected onto that
// entry (kNoRouteFix for gap segments).
std::vector<std::string> complete_segment_route(
    const std::vector<MatchedPoint>& matched, const RoadNetwork& net,
    std::vector<size_t>* first_fix = nullptr);

}  // namespace tvp
