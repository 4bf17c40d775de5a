#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pillarcast/geometry.hpp"

namespace pillarcast {

enum class AgentClass { vehicle = 0, pedestrian = 1 };
constexpr int kNumAgentClasses = 2;

enum class RoadElementType {
  lane_center = 0,
  lane_boundary = 1,
  road_edge = 2,
  crosswalk = 3
};
constexpr int kNumRoadElementTypes = 4;

enum class LightState { red = 0, yellow = 1, green = 2, unknown = 3 };
constexpr int kNumLightStates = 4;

const char* to_string(AgentClass c);
const char* to_string(RoadElementType t);
const char* to_string(LightState s);
AgentClass agent_class_from_string(const std::string& s);
RoadElementType road_element_from_string(const std::string& s);
LightState light_state_from_string(const std::string& s);

/// Kinematic state of one agent at one timestep.
struct AgentState {
  Vec2 center;
  double heading{0.0};  // radians in (-pi, pi]
  double extent_w{0.0};
  double extent_l{0.0};
  Vec2 velocity;
  Vec2 acceleration;
  bool valid{false};

  OrientedBox box() const { return {center, heading, extent_w, extent_l}; }
};

struct AgentTrack {
  int64_t agent_id{0};
  AgentClass agent_class{AgentClass::vehicle};
  std::vector<AgentState> past;  // length T_in; index T_in-1 is t=0
  std::vector<Vec2> future;      // length T when present, empty when absent

  bool has_future() const { return !future.empty(); }
  const AgentState& current() const { return past.back(); }
};

struct RoadPolyline {
  std::vector<Vec2> points;
  RoadElementType element_type{RoadElementType::lane_center};
};

struct TrafficLight {
  Vec2 position;
  std::vector<LightState> state_per_timestep;  // length T_in
};

/// AV-centered snapshot of one driving scene.
struct Scene {
  std::vector<AgentTrack> agents;
  std::vector<RoadPolyline> roads;
  std::vector<TrafficLight> lights;
  double fov{0.0};  // half-extent of the square field of view (m)
  int av_index{0};

  const AgentTrack& av() const { return agents.at(av_index); }
};

struct Violation {
  int64_t agent_id{-1};  // -1 when not agent-specific
  std::string field;
  std::string message;
};

using ValidationReport = std::vector<Violation>;

struct InvalidSceneError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Translate every position so the AV's t=0 center lands at the origin.
/// Headings and velocities are unchanged. When rotate_to_av_heading is set
/// the scene is additionally rotated by -heading(AV, t=0) about the origin.
Scene transform_to_av_frame(const Scene& raw, bool rotate_to_av_heading = false);

/// Checks every type invariant; violations are data, not errors.
ValidationReport validate_scene(const Scene& scene, int t_in, int horizon);

}  // namespace pillarcast
