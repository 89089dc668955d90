#include "tvp/config.hpp"

#include <cstdint>
#include <map>
#include <sstream>
#include <stdexcept>

#include "tvp/io.hpp"

namespace tvp {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void PipelineConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0))
      throw std::runtime_error(std::string("config: ") + name +
                               " must be positive");
  };
  positive(sigma_floor_m, "sigma_floor_m");
  positive(beta_floor_m, "beta_floor_m");
  positive(emission_cutoff_m, "emission_cutoff_m");
  positive(transition_cutoff_m, "transition_cutoff_m");
  positive(speed_cutoff_kmh, "speed_cutoff_kmh");
  positive(parking_delta_mps, "parking_delta_mps");
  if (parking_min_duration_s < 0.0)
    throw std::runtime_error("config: parking_min_duration_s must be >= 0");
  positive(approach_theta_s, "approach_theta_s");
  positive(cluster_radius_m, "cluster_radius_m");
  positive(bearing_bin_deg, "bearing_bin_deg");
  positive(assoc_radius_m, "assoc_radius_m");
  positive(heading_tol_deg, "heading_tol_deg");
  positive(sign_snap_max_m, "sign_snap_max_m");
  positive(zeta_m, "zeta_m");
  if (pose_count < 1) throw std::runtime_error("config: pose_count must be >= 1");
  if (workers < 1) throw std::runtime_error("config: workers must be >= 1");
}

PipelineConfig parse_config(const std::string& text, const std::string& origin) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(origin + ": expected key = value at line " +
                               std::to_string(lineno));
    const std::string key = trim(t.substr(0, eq));
    const std::string val = trim(t.substr(eq + 1));
    auto num = [&]() {
      try {
        return std::stod(val);
      } catch (const std::exception&) {
        throw std::runtime_error(origin + ": bad numeric value for " + key +
                                 " at line " + std::to_string(lineno));
      }
    };
    if (key == "network") cfg.network_path = val;
    else if (key == "trajectories") cfg.trajectories_path = val;
    else if (key == "signs") cfg.signs_path = val;
    else if (key == "limits") cfg.limits_path = val;
    else if (key == "output_dir") cfg.output_dir = val;
    else if (key == "sigma_floor_m") cfg.sigma_floor_m = num();
    else if (key == "beta_floor_m") cfg.beta_floor_m = num();
    else if (key == "emission_cutoff_m") cfg.emission_cutoff_m = num();
    else if (key == "transition_cutoff_m") cfg.transition_cutoff_m = num();
    else if (key == "speed_cutoff_kmh") cfg.speed_cutoff_kmh = num();
    else if (key == "parking_delta_mps") cfg.parking_delta_mps = num();
    else if (key == "parking_min_duration_s") cfg.parking_min_duration_s = num();
    else if (key == "approach_theta_s") cfg.approach_theta_s = num();
    else if (key == "cluster_radius_m") cfg.cluster_radius_m = num();
    else if (key == "bearing_bin_deg") cfg.bearing_bin_deg = num();
    else if (key == "pose_count") cfg.pose_count = static_cast<int>(num());
    else if (key == "detector_endpoint") cfg.detector_endpoint = val;
    else if (key == "assoc_radius_m") cfg.assoc_radius_m = num();
    else if (key == "heading_tol_deg") cfg.heading_tol_deg = num();
    else if (key == "sign_snap_max_m") cfg.sign_snap_max_m = num();
    else if (key == "zeta_m") cfg.zeta_m = num();
    else if (key == "tz_offset_s") cfg.tz_offset_s = static_cast<int>(num());
    else if (key == "workers") cfg.workers = static_cast<int>(num());
    else if (key == "seed") cfg.seed = static_cast<uint64_t>(num());
    else
      throw std::runtime_error(origin + ": unknown config key '" + key +
                               "' at line " + std::to_string(lineno));
  }
  cfg.validate();
  return cfg;
}

PipelineConfig load_config(const std::string& path) {
  return parse_config(read_file(path), path);
}

}  // namespace tvp
