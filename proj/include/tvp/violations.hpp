// Violation detection against restriction tables, hourly temporal profiles,
// typical-day aggregation, mu + 2*sigma thresholds, and prone-location
// inference.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tvp/behaviors.hpp"
#include "tvp/restrictions.hpp"

namespace tvp {

enum class ViolationKind { illegal_turn, illegal_parking, speeding };

const char* violation_kind_name(ViolationKind k);
ViolationKind violation_kind_from_name(const std::string& s);

struct Violation {
  ViolationKind kind = ViolationKind::illegal_turn;
  // intersection cluster for turns, segment id for parking, road for speeding
  std::string location_ref;
  int64_t t = 0;
  std::string behavior_ref;
};

struct TemporalProfile {
  std::string location_ref;
  ViolationKind kind = ViolationKind::illegal_turn;
  std::vector<int> counts;  // one bucket per hour over the span
};

struct TypicalDayProfile {
  std::string location_ref;
  ViolationKind kind = ViolationKind::illegal_turn;
  double means[24] = {};
};

struct ThresholdSet {
  double mu[24] = {};
  double sigma[24] = {};
  double th[24] = {};  // mu + 2*sigma
};

struct ProneHour {
  int hour = 0;         // hour of day, 0..23
  double typical = 0.0;
  double threshold = 0.0;
};

struct ProneLocation {
  std::string location_ref;
  ViolationKind kind = ViolationKind::illegal_turn;
  std::vector<ProneHour> hours;
};

// A turn with a bunch assignment; location_ref is the bunch's intersection
// cluster so all approaches of one intersection aggregate together.
struct BunchedTurn {
  TurningBehavior turn;
  std::string bunch_id;
  std::string cluster_ref;  // "int:<cluster id>"
};

std::vector<Violation> detect_illegal_turns(
    const std::vector<BunchedTurn>& turns, const std::vector<NoTurnRule>& rules);

// Parking's nearest segment must carry a zone and the zone sign must be
// within zeta meters of the parking location.
std::vector<Violation> detect_illegal_parking(
    const std::vector<ParkingBehavior>& parkings,
    const std::vector<NoParkingZone>& zones, double zeta,
    const RoadNetwork& net);

std::vector<Violation> detect_speeding(const std::vector<SpeedSample>& samples,
                                       const std::vector<SpeedLimit>& limits,
                                       int* uncovered = nullptr);

// Hour buckets over [span_start, span_end] in a fixed-offset timezone.
std::vector<TemporalProfile> build_profiles(const std::vector<Violation>& violations,
                                            int64_t span_start, int64_t span_end,
                                            int tz_offset_s = 0);

// Mean per hour of day, divided by the number of observed instances of that
// hour within the span (ragged first/last days included).
TypicalDayProfile typical_day(const TemporalProfile& profile,
                              int64_t span_start, int64_t span_end,
                              int tz_offset_s = 0);

// Population mean / standard deviation over candidates per hour of day.
ThresholdSet compute_thresholds(const std::vector<TypicalDayProfile>& typicals);

// Prone at hour j iff typical strictly exceeds the threshold.
std::vector<ProneLocation> infer_prone_locations(
    const std::vector<TypicalDayProfile>& typicals, const ThresholdSet& th);

}  // namespace tvp
