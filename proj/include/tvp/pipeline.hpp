// End-to-end orchestration: stage sequencing over persisted CSV/JSONL
// intermediates, run reporting, and the GeoJSON exporter.
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tvp/config.hpp"
#include "tvp/violations.hpp"

namespace tvp {

struct StageReport {
  std::string name;
  double ms = 0.0;
  std::map<std::string, int64_t> counts;
};

struct RunReport {
  std::vector<StageReport> stages;
  double match_points_per_s = 0.0;
  std::string to_json() const;
};

// Geometry lookup for prone location_refs ("int:..", "seg:..", "road:..").
using LocationGeometry = std::map<std::string, GeoPoint>;

std::string export_geojson(const std::vector<ProneLocation>& prone,
                           const LocationGeometry& geometry,
                           std::optional<int> hour_filter = std::nullopt);

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg) : cfg_(std::move(cfg)) {}

  StageReport stage_match();
  StageReport stage_behaviors();
  StageReport stage_perspective();
  StageReport stage_restrict();
  StageReport stage_violations();
  StageReport stage_infer();
  StageReport stage_export(std::optional<int> hour_filter = std::nullopt);

  RunReport run_all();

  const PipelineConfig& config() const { return cfg_; }

 private:
  PipelineConfig cfg_;
  double match_points_per_s_ = 0.0;
};

// Intermediate-file readers, shared with tests.
std::vector<PointTrajectory> load_trajectories_csv(const std::string& path);
std::vector<MatchedTrajectory> load_matched_csv(const std::string& path,
                                                const RoadNetwork& net);
std::vector<TurningBehavior> load_turnings_csv(const std::string& path);
RoadNetwork load_network_any(const std::string& path);

}  // namespace tvp
