#include "pillarcast/scene.hpp"

#include <cmath>

namespace pillarcast {

const char* to_string(AgentClass c) {
  switch (c) {
    case AgentClass::vehicle: return "vehicle";
    case AgentClass::pedestrian: return "pedestrian";
  }
  return "vehicle";
}

const char* to_string(RoadElementType t) {
  switch (t) {
    case RoadElementType::lane_center: return "lane_center";
    case RoadElementType::lane_boundary: return "lane_boundary";
    case RoadElementType::road_edge: return "road_edge";
    case RoadElementType::crosswalk: return "crosswalk";
  }
  return "lane_center";
}

const char* to_string(LightState s) {
  switch (s) {
    case LightState::red: return "red";
    case LightState::yellow: return "yellow";
    case LightState::green: return "green";
    case LightState::unknown: return "unknown";
  }
  return "unknown";
}

AgentClass agent_class_from_string(const std::string& s) {
  if (s == "vehicle") return AgentClass::vehicle;
  if (s == "pedestrian") return AgentClass::pedestrian;
  throw InvalidSceneError("unknown agent_class: " + s);
}

RoadElementType road_element_from_string(const std::string& s) {
  if (s == "lane_center") return RoadElementType::lane_center;
  if (s == "lane_boundary") return RoadElementType::lane_boundary;
  if (s == "road_edge") return RoadElementType::road_edge;
  if (s == "crosswalk") return RoadElementType::crosswalk;
  throw InvalidSceneError("unknown element_type: " + s);
}

LightState light_state_from_string(const std::string& s) {
  if (s == "red") return LightState::red;
  if (s == "yellow") return LightState::yellow;
  if (s == "green") return LightState::green;
  if (s == "unknown") return LightState::unknown;
  throw InvalidSceneError("unknown light state: " + s);
}

Scene transform_to_av_frame(const Scene& raw, bool rotate_to_av_heading) {
  if (raw.av_index < 0 || raw.av_index >= static_cast<int>(raw.agents.size()))
    throw InvalidSceneError("av_index out of range");
  const AgentTrack& av = raw.agents[raw.av_index];
  if (av.past.empty() || !av.past.back().valid)
    throw InvalidSceneError("AV has no valid state at t=0");

  const Vec2 origin = av.past.back().center;
  const double rot = rotate_to_av_heading ? -av.past.back().heading : 0.0;

  auto map_pos = [&](const Vec2& p) { return (p - origin).rotated(rot); };
  auto map_vec = [&](const Vec2& v) { return v.rotated(rot); };

  Scene out = raw;
  for (AgentTrack& a : out.agents) {
    for (AgentState& s : a.past) {
      s.center = map_pos(s.center);
      s.velocity = map_vec(s.velocity);
      s.acceleration = map_vec(s.acceleration);
      s.heading = wrap_angle(s.heading + rot);
    }
    for (Vec2& p : a.future) p = map_pos(p);
  }
  for (RoadPolyline& r : out.roads)
    for (Vec2& p : r.points) p = map_pos(p);
  for (TrafficLight& l : out.lights) l.position = map_pos(l.position);
  return out;
}

namespace {

void check_state(const AgentState& s, int64_t id, int t, ValidationReport& out) {
  if (!s.valid) return;
  if (!(s.extent_w > 0.0))
    out.push_back({id, "extent_w", "non-positive extent_w at timestep " +
                                       std::to_string(t)});
  if (!(s.extent_l > 0.0))
    out.push_back({id, "extent_l", "non-positive extent_l at timestep " +
                                       std::to_string(t)});
  if (!(s.heading > -M_PI && s.heading <= M_PI) || !std::isfinite(s.heading))
    out.push_back({id, "heading", "heading not normalized to (-pi, pi] at "
                                  "timestep " +
                                      std::to_string(t)});
  if (!std::isfinite(s.center.x) || !std::isfinite(s.center.y))
    out.push_back({id, "center", "non-finite center"});
}

}  // namespace

ValidationReport validate_scene(const Scene& scene, int t_in, int horizon) {
  ValidationReport out;
  if (!(scene.fov > 0.0)) out.push_back({-1, "fov", "fov must be positive"});
  if (scene.av_index < 0 ||
      scene.av_index >= static_cast<int>(scene.agents.size()))
    out.push_back({-1, "av_index", "av_index out of range"});

  for (const AgentTrack& a : scene.agents) {
    if (static_cast<int>(a.past.size()) != t_in) {
      out.push_back({a.agent_id, "past", "past length mismatch: expected " +
                                             std::to_string(t_in) + ", got " +
                                             std::to_string(a.past.size())});
      continue;
    }
    bool any_valid = false;
    for (int t = 0; t < t_in; ++t) {
      check_state(a.past[t], a.agent_id, t, out);
      any_valid = any_valid || a.past[t].valid;
    }
    if (!any_valid)
      out.push_back({a.agent_id, "past", "no valid past state"});
    if (a.has_future() && static_cast<int>(a.future.size()) != horizon)
      out.push_back({a.agent_id, "future",
                     "future length mismatch: expected " +
                         std::to_string(horizon) + ", got " +
                         std::to_string(a.future.size())});
  }

  for (size_t i = 0; i < scene.roads.size(); ++i) {
    const RoadPolyline& r = scene.roads[i];
    if (r.points.size() < 2) {
      out.push_back({-1, "roads[" + std::to_string(i) + "].points",
                     "polyline needs at least 2 points"});
      continue;
    }
    for (size_t j = 0; j + 1 < r.points.size(); ++j)
      if (r.points[j].x == r.points[j + 1].x &&
          r.points[j].y == r.points[j + 1].y)
        out.push_back({-1, "roads[" + std::to_string(i) + "].points",
                       "consecutive duplicate point at index " +
                           std::to_string(j)});
  }

  for (size_t i = 0; i < scene.lights.size(); ++i)
    if (static_cast<int>(scene.lights[i].state_per_timestep.size()) != t_in)
      out.push_back({-1, "lights[" + std::to_string(i) + "].state_per_timestep",
                     "state sequence length mismatch"});

  // AV must sit at the origin at t=0 (AV-centered frame invariant).
  if (scene.av_index >= 0 &&
      scene.av_index < static_cast<int>(scene.agents.size())) {
    const AgentTrack& av = scene.agents[scene.av_index];
    if (!av.past.empty() && av.past.back().valid) {
      const Vec2 c = av.past.back().center;
      if (std::abs(c.x) > 1e-9 || std::abs(c.y) > 1e-9)
        out.push_back({av.agent_id, "center",
                       "AV t=0 center must be at the origin"});
    }
  }
  return out;
}

}  // namespace pillarcast
