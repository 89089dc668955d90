// Traffic-rule context: sign inventory ingestion, an optional JSON-over-HTTP
// detector client over the view manifest, sign-to-bunch association, nearest
// segment no-parking zones, and road speed limits.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tvp/perspective.hpp"
#include "tvp/roadnet.hpp"

namespace tvp {

enum class SignType { no_left_turn, no_right_turn, no_u_turn, no_parking };

const char* sign_type_name(SignType t);
SignType sign_type_from_name(const std::string& s);

// Turn type forbidden by a turn-restriction sign.
TurnType forbidden_turn(SignType t);

enum class SignSource { inventory, detector };

struct SignRecord {
  SignType sign_type = SignType::no_parking;
  GeoPoint location;
  std::optional<double> visible_heading;  // degrees, approach direction
  double confidence = 1.0;
  SignSource source = SignSource::inventory;
};

struct NoTurnRule {
  std::string bunch_id;
  SignType forbidden = SignType::no_left_turn;
  std::vector<SignRecord> evidence;
};

struct NoParkingZone {
  std::string segment_id;
  SignRecord sign;
};

struct SpeedLimit {
  std::string road_name;
  double limit_kmh = 0.0;
};

// JSON Lines: {"sign_type":...,"lat":...,"lng":...,
//              "visible_heading":...,"confidence":...}
std::vector<SignRecord> load_sign_inventory(const std::string& path);
std::vector<SignRecord> parse_sign_inventory(const std::string& text,
                                             const std::string& origin);
void write_sign_inventory(const std::string& path,
                          const std::vector<SignRecord>& signs);

struct ManifestPose {
  std::string bunch_id;
  int seq = 0;
  GeoPoint location;
  double heading = 0.0;
  double fov = kFieldOfViewDeg;
};

struct DetectorStats {
  int retries = 0;
};

// POSTs the pose batch to <endpoint>/detect and maps each detection back to
// a SignRecord at its pose. Transient failures are retried with bounded
// backoff (max_retries extra attempts).
std::vector<SignRecord> query_detector(const std::vector<ManifestPose>& poses,
                                       const std::string& endpoint,
                                       int max_retries = 3,
                                       int backoff_ms = 100,
                                       DetectorStats* stats = nullptr);

struct BunchPoses {
  std::string bunch_id;
  std::vector<ViewPose> poses;
};

// A turn sign attaches to a bunch when within radius of one of its view
// poses and (when a visible heading is present) within heading_tol of that
// pose's heading. One rule per (bunch, sign type).
std::vector<NoTurnRule> associate_turn_signs(
    const std::vector<SignRecord>& signs, const std::vector<BunchPoses>& bunches,
    double radius, double heading_tol);

// Nearest-segment mapping of no-parking signs; signs farther than
// skip_threshold from every segment are skipped (counted in skipped).
std::vector<NoParkingZone> build_no_parking_zones(
    const std::vector<SignRecord>& signs, const RoadNetwork& net,
    double skip_threshold = 100.0, int* skipped = nullptr);

// CSV road_name,limit_kmh; duplicate names keep the last entry.
std::vector<SpeedLimit> load_speed_limits(const std::string& path);
std::vector<SpeedLimit> parse_speed_limits(const std::string& text,
                                           const std::string& origin);

}  // namespace tvp
