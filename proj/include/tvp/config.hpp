// Pipeline configuration: line-oriented `key = value` file with defaults
// matching each module's documented tunables.
#pragma once

#include <string>

namespace tvp {

struct PipelineConfig {
  // paths
  std::string network_path;
  std::string trajectories_path;
  std::string signs_path;
  std::string limits_path;
  std::string output_dir = "out";

  // map matching
  double sigma_floor_m = 1.0;
  double beta_floor_m = 1.0;
  double emission_cutoff_m = 200.0;
  double transition_cutoff_m = 2000.0;
  double speed_cutoff_kmh = 180.0;

  // behaviors
  double parking_delta_mps = 0.8;
  double parking_min_duration_s = 180.0;

  // perspective
  double approach_theta_s = 60.0;
  double cluster_radius_m = 25.0;
  double bearing_bin_deg = 45.0;
  int pose_count = 5;

  // restrictions
  std::string detector_endpoint;  // empty = inventory-only mode
  double assoc_radius_m = 60.0;
  double heading_tol_deg = 60.0;
  double sign_snap_max_m = 100.0;

  // violations / inference
  double zeta_m = 50.0;
  int tz_offset_s = 0;

  // engine
  int workers = 1;
  uint64_t seed = 42;

  void validate() const;  // throws on non-positive tunables
};

PipelineConfig load_config(const std::string& path);
PipelineConfig parse_config(const std::string& text, const std::string& origin);

}  // namespace tvp
