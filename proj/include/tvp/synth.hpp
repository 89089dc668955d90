// Deterministic synthetic grid city: road network, noisy trajectories routed
// along lawful/unlawful paths at planted rates, sign inventory, speed limits,
// and per-violation / per-fix ground truth files.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tvp/roadnet.hpp"

namespace tvp {

struct SynthSpec {
  int rows = 4;
  int cols = 4;
  double block_m = 200.0;
  int traj_count = 100;
  double noise_sigma_m = 5.0;
  double fix_spacing_m = 30.0;
  int span_days = 3;
  uint64_t seed = 42;

  // per-opportunity violation rates; the planted hotspot of each kind gets
  // rate * hot_multiplier
  double turn_violation_rate = 0.03;
  double parking_violation_rate = 0.03;
  double speeding_rate = 0.03;
  double hot_multiplier = 10.0;
  bool plant_hotspots = true;

  int route_blocks_min = 8;
  int route_blocks_max = 14;
  int zoned_edge_count = 8;

  double anchor_lat = 24.45;
  double anchor_lng = 118.05;
};

struct TruthViolation {
  std::string kind;      // illegal_turn | illegal_parking | speeding
  std::string ref;       // node id / lower-twin segment id / road name
  GeoPoint location;
  std::string traj_id;
  int64_t t = 0;
};

struct TruthFix {
  std::string traj_id;
  int64_t t = 0;
  std::string segment_id;  // directed segment actually traveled
};

struct SynthResult {
  std::string network_text;
  std::string trajectories_csv;
  std::string signs_jsonl;
  std::string limits_csv;
  std::vector<TruthViolation> truth;
  std::vector<TruthFix> truth_fixes;

  std::string hot_turn_node;
  GeoPoint hot_turn_location;
  std::string hot_park_segment;  // lower twin id
  GeoPoint hot_park_location;
  std::string hot_road;

  int64_t span_start = 0;
  int64_t span_end = 0;
};

SynthResult generate_synthetic(const SynthSpec& spec);

// Writes network.txt, trajectories.csv, signs.jsonl, limits.csv, truth.csv
// and truth_fixes.csv under dir (created if needed).
void write_synthetic(const SynthResult& r, const std::string& dir);

}  // namespace tvp
