#include "pillarcast/scene_io.hpp"

#include <fstream>

#include <json.hpp>

namespace pillarcast {

using nlohmann::json;

namespace {

json vec2_to_json(const Vec2& v) { return json::array({v.x, v.y}); }

Vec2 vec2_from_json(const json& j) {
  return {j.at(0).get<double>(), j.at(1).get<double>()};
}

json state_to_json(const AgentState& s) {
  return json{{"center", vec2_to_json(s.center)},
              {"heading", s.heading},
              {"extent_w", s.extent_w},
              {"extent_l", s.extent_l},
              {"velocity", vec2_to_json(s.velocity)},
              {"acceleration", vec2_to_json(s.acceleration)},
              {"valid", s.valid}};
}

AgentState state_from_json(const json& j) {
  AgentState s;
  s.center = vec2_from_json(j.at("center"));
  s.heading = j.at("heading").get<double>();
  s.extent_w = j.at("extent_w").get<double>();
  s.extent_l = j.at("extent_l").get<double>();
  s.velocity = vec2_from_json(j.at("velocity"));
  s.acceleration = vec2_from_json(j.at("acceleration"));
  s.valid = j.at("valid").get<bool>();
  return s;
}

}  // namespace

std::string scene_to_json_line(const Scene& scene) {
  json j;
  j["schema_version"] = kSceneSchemaVersion;
  j["fov"] = scene.fov;
  j["av_index"] = scene.av_index;

  json agents = json::array();
  for (const AgentTrack& a : scene.agents) {
    json ja;
    ja["agent_id"] = a.agent_id;
    ja["agent_class"] = to_string(a.agent_class);
    json past = json::array();
    for (const AgentState& s : a.past) past.push_back(state_to_json(s));
    ja["past"] = std::move(past);
    if (a.has_future()) {
      json fut = json::array();
      for (const Vec2& p : a.future) fut.push_back(vec2_to_json(p));
      ja["future"] = std::move(fut);
    }
    agents.push_back(std::move(ja));
  }
  j["agents"] = std::move(agents);

  json roads = json::array();
  for (const RoadPolyline& r : scene.roads) {
    json jr;
    jr["element_type"] = to_string(r.element_type);
    json pts = json::array();
    for (const Vec2& p : r.points) pts.push_back(vec2_to_json(p));
    jr["points"] = std::move(pts);
    roads.push_back(std::move(jr));
  }
  j["roads"] = std::move(roads);

  json lights = json::array();
  for (const TrafficLight& l : scene.lights) {
    json jl;
    jl["position"] = vec2_to_json(l.position);
    json states = json::array();
    for (LightState s : l.state_per_timestep) states.push_back(to_string(s));
    jl["state_per_timestep"] = std::move(states);
    lights.push_back(std::move(jl));
  }
  j["lights"] = std::move(lights);

  return j.dump();
}

Scene scene_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  const int version = j.at("schema_version").get<int>();
  if (version != kSceneSchemaVersion)
    throw IoError("unsupported scene schema_version " +
                  std::to_string(version));

  Scene scene;
  scene.fov = j.at("fov").get<double>();
  scene.av_index = j.at("av_index").get<int>();

  for (const json& ja : j.at("agents")) {
    AgentTrack a;
    a.agent_id = ja.at("agent_id").get<int64_t>();
    a.agent_class = agent_class_from_string(ja.at("agent_class"));
    for (const json& js : ja.at("past")) a.past.push_back(state_from_json(js));
    if (ja.contains("future"))
      for (const json& jp : ja.at("future"))
        a.future.push_back(vec2_from_json(jp));
    scene.agents.push_back(std::move(a));
  }
  for (const json& jr : j.at("roads")) {
    RoadPolyline r;
    r.element_type = road_element_from_string(jr.at("element_type"));
    for (const json& jp : jr.at("points")) r.points.push_back(vec2_from_json(jp));
    scene.roads.push_back(std::move(r));
  }
  for (const json& jl : j.at("lights")) {
    TrafficLight l;
    l.position = vec2_from_json(jl.at("position"));
    for (const json& js : jl.at("state_per_timestep"))
      l.state_per_timestep.push_back(light_state_from_string(js));
    scene.lights.push_back(std::move(l));
  }
  return scene;
}

void write_dataset(const std::string& path, const std::vector<Scene>& scenes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const Scene& s : scenes) out << scene_to_json_line(s) << '\n';
  if (!out) throw IoError("write failed: " + path);
}

std::vector<Scene> read_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::vector<Scene> scenes;
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      scenes.push_back(scene_from_json_line(line));
    } catch (const std::exception& e) {
      throw IoError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return scenes;
}

}  // namespace pillarcast
