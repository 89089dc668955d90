#include "tvp/restrictions.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "httplib.h"
#include "nlohmann/json.hpp"

namespace tvp {

const char* sign_type_name(SignType t) {
  switch (t) {
    case SignType::no_left_turn: return "no_left_turn";
    case SignType::no_right_turn: return "no_right_turn";
    case SignType::no_u_turn: return "no_u_turn";
    case SignType::no_parking: return "no_parking";
  }
  return "no_parking";
}

SignType sign_type_from_name(const std::string& s) {
  if (s == "no_left_turn") return SignType::no_left_turn;
  if (s == "no_right_turn") return SignType::no_right_turn;
  if (s == "no_u_turn") return SignType::no_u_turn;
  if (s == "no_parking") return SignType::no_parking;
  throw std::runtime_error("unknown sign type: " + s);
}

TurnType forbidden_turn(SignType t) {
  switch (t) {
    case SignType::no_left_turn: return TurnType::left_turn;
    case SignType::no_right_turn: return TurnType::right_turn;
    case SignType::no_u_turn: return TurnType::u_turn;
    default:
      throw std::runtime_error("no_parking sign does not forbid a turn");
  }
}

std::vector<SignRecord> parse_sign_inventory(const std::string& text,
                                             const std::string& origin) {
  std::vector<SignRecord> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(origin + ": bad JSON at line " +
                               std::to_string(lineno) + ": " + e.what());
    }
    SignRecord rec;
    try {
      rec.sign_type = sign_type_from_name(j.at("sign_type").get<std::string>());
    } catch (const std::exception& e) {
      throw std::runtime_error(origin + ": line " + std::to_string(lineno) +
                               ": " + e.what());
    }
    rec.location = {j.at("lat").get<double>(), j.at("lng").get<double>()};
    if (!valid_coords(rec.location))
      throw std::runtime_error(origin + ": coordinates out of range at line " +
                               std::to_string(lineno));
    if (j.contains("visible_heading") && !j.at("visible_heading").is_null())
      rec.visible_heading = normalize_deg(j.at("visible_heading").get<double>());
    if (j.contains("confidence")) rec.confidence = j.at("confidence").get<double>();
    if (rec.confidence < 0.0 || rec.confidence > 1.0)
      throw std::runtime_error(origin + ": confidence out of range at line " +
                               std::to_string(lineno));
    rec.source = SignSource::inventory;
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<SignRecord> load_sign_inventory(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open sign inventory: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_sign_inventory(buf.str(), path);
}

void write_sign_inventory(const std::string& path,
                          const std::vector<SignRecord>& signs) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write sign inventory: " + path);
  for (const auto& s : signs) {
    nlohmann::json j;
    j["sign_type"] = sign_type_name(s.sign_type);
    j["lat"] = s.location.lat;
    j["lng"] = s.location.lng;
    if (s.visible_heading)
      j["visible_heading"] = *s.visible_heading;
    else
      j["visible_heading"] = nullptr;
    j["confidence"] = s.confidence;
    out << j.dump() << "\n";
  }
}

std::vector<SignRecord> query_detector(const std::vector<ManifestPose>& poses,
                                       const std::string& endpoint,
                                       int max_retries, int backoff_ms,
                                       DetectorStats* stats) {
  if (poses.empty()) throw std::runtime_error("empty view manifest");
  nlohmann::json req;
  req["poses"] = nlohmann::json::array();
  for (size_t i = 0; i < poses.size(); ++i) {
    req["poses"].push_back({{"id", static_cast<int>(i)},
                            {"lat", poses[i].location.lat},
                            {"lng", poses[i].location.lng},
                            {"heading", poses[i].heading},
                            {"fov", poses[i].fov}});
  }
  const std::string body = req.dump();

  httplib::Client client(endpoint);
  client.set_connection_timeout(5);
  client.set_read_timeout(30);

  httplib::Result res;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    if (attempt > 0) {
      if (stats) ++stats->retries;
      std::this_thread::sleep_for(
          std::chrono::milliseconds(backoff_ms * attempt));
    }
    res = client.Post("/detect", body, "application/json");
    if (res && res->status == 200) break;
  }
  if (!res || res->status != 200)
    throw std::runtime_error("detector endpoint unreachable after retries: " +
                             endpoint);

  nlohmann::json resp;
  try {
    resp = nlohmann::json::parse(res->body);
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("malformed detector response: ") +
                             e.what());
  }
  if (!resp.contains("detections") || !resp["detections"].is_array())
    throw std::runtime_error("malformed detector response: missing detections");

  std::vector<SignRecord> out;
  for (const auto& d : resp["detections"]) {
    if (!d.contains("pose_id") || !d.contains("sign_type"))
      throw std::runtime_error("malformed detection record");
    const int pid = d.at("pose_id").get<int>();
    if (pid < 0 || static_cast<size_t>(pid) >= poses.size())
      throw std::runtime_error("detection references unknown pose id " +
                               std::to_string(pid));
    SignRecord rec;
    rec.sign_type = sign_type_from_name(d.at("sign_type").get<std::string>());
    rec.location = poses[pid].location;
    rec.visible_heading = poses[pid].heading;
    rec.confidence = d.value("confidence", 1.0);
    if (rec.confidence < 0.0 || rec.confidence > 1.0)
      throw std::runtime_error("detection confidence out of range");
    rec.source = SignSource::detector;
    out.push_back(std::move(rec));
  }
  return out;
}

namespace {

double heading_gap_deg(double a, double b) {
  const double d = std::abs(normalize_deg(a) - normalize_deg(b));
  return std::min(d, 360.0 - d);
}

}  // namespace

std::vector<NoTurnRule> associate_turn_signs(
    const std::vector<SignRecord>& signs, const std::vector<BunchPoses>& bunches,
    double radius, double heading_tol) {
  std::vector<NoTurnRule> out;
  for (const auto& bunch : bunches) {
    std::map<SignType, NoTurnRule> by_type;
    for (const auto& sign : signs) {
      if (sign.sign_type == SignType::no_parking) continue;
      bool attached = false;
      for (const auto& pose : bunch.poses) {
        if (direct_distance(sign.location, pose.location) > radius) continue;
        if (sign.visible_heading &&
            heading_gap_deg(*sign.visible_heading, pose.heading) > heading_tol)
          continue;
        attached = true;
        break;
      }
      if (!attached) continue;
      auto& rule = by_type[sign.sign_type];
      rule.bunch_id = bunch.bunch_id;
      rule.forbidden = sign.sign_type;
      rule.evidence.push_back(sign);
    }
    for (auto& [type, rule] : by_type) out.push_back(std::move(rule));
  }
  return out;
}

std::vector<NoParkingZone> build_no_parking_zones(
    const std::vector<SignRecord>& signs, const RoadNetwork& net,
    double skip_threshold, int* skipped) {
  std::vector<NoParkingZone> out;
  for (const auto& sign : signs) {
    if (sign.sign_type != SignType::no_parking) continue;
    auto best = net.nearest_segments(sign.location, skip_threshold);
    if (best.empty()) {
      if (skipped) ++*skipped;
      continue;
    }
    // nearest_segments ties already resolve to the lower segment id
    out.push_back({best.front().segment_id, sign});
  }
  return out;
}

std::vector<SpeedLimit> parse_speed_limits(const std::string& text,
                                           const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::vector<std::string> order;
  std::map<std::string, double> limits;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (lineno == 1 && line.rfind("road_name,", 0) == 0) continue;  // header
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw std::runtime_error(origin + ": malformed limit at line " +
                               std::to_string(lineno));
    const std::string name = line.substr(0, comma);
    double limit = 0.0;
    try {
      limit = std::stod(line.substr(comma + 1));
    } catch (const std::exception&) {
      throw std::runtime_error(origin + ": bad limit value at line " +
                               std::to_string(lineno));
    }
    if (limit <= 0.0)
      throw std::runtime_error(origin + ": non-positive limit at line " +
                               std::to_string(lineno));
    if (limits.find(name) == limits.end()) order.push_back(name);
    limits[name] = limit;  // last wins
  }
  std::vector<SpeedLimit> out;
  for (const auto& name : order) out.push_back({name, limits[name]});
  return out;
}

std::vector<SpeedLimit> load_speed_limits(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open speed limits: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_speed_limits(buf.str(), path);
}

}  // namespace tvp
