#include "pillarcast/synth.hpp"

#include <algorithm>
#include <cmath>

#include "pillarcast/rng.hpp"
#include "pillarcast/scene_io.hpp"

namespace pillarcast {

const char* to_string(LaneGeometry g) {
  switch (g) {
    case LaneGeometry::straight: return "straight";
    case LaneGeometry::arc: return "arc";
    case LaneGeometry::mixed: return "mixed";
  }
  return "mixed";
}

LaneGeometry lane_geometry_from_string(const std::string& s) {
  if (s == "straight") return LaneGeometry::straight;
  if (s == "arc") return LaneGeometry::arc;
  if (s == "mixed") return LaneGeometry::mixed;
  throw std::invalid_argument("unknown lane_geometry: " + s);
}

void GeneratorConfig::validate() const {
  if (n_agents_range[0] < 1 || n_agents_range[1] < n_agents_range[0])
    throw std::invalid_argument("generator.n_agents_range must satisfy 1 <= min <= max");
  if (pedestrian_fraction < 0.0 || pedestrian_fraction > 1.0)
    throw std::invalid_argument("generator.pedestrian_fraction must be in [0,1]");
  if (n_lanes < 1) throw std::invalid_argument("generator.n_lanes must be >= 1");
  if (!(speed_range_vehicle[1] > speed_range_vehicle[0]) ||
      speed_range_vehicle[0] < 0.0)
    throw std::invalid_argument("generator.speed_range_vehicle is degenerate");
  if (!(speed_range_pedestrian[1] > speed_range_pedestrian[0]) ||
      speed_range_pedestrian[0] < 0.0)
    throw std::invalid_argument("generator.speed_range_pedestrian is degenerate");
  if (!(fov > 0.0)) throw std::invalid_argument("generator.fov must be positive");
  if (t_in < 1) throw std::invalid_argument("generator.t_in must be >= 1");
  if (!(dt_in > 0.0)) throw std::invalid_argument("generator.dt_in must be positive");
  if (horizon < 1) throw std::invalid_argument("generator.horizon must be >= 1");
  if (!(horizon_seconds > 0.0))
    throw std::invalid_argument("generator.horizon_seconds must be positive");
  if (!(lane_sample_spacing > 0.0))
    throw std::invalid_argument("generator.lane_sample_spacing must be positive");
}

namespace {

// A lane with an analytic motion law; arc lanes carry constant-turn-rate
// motion, straight lanes constant velocity.
struct Lane {
  bool is_arc{false};
  Vec2 anchor;        // point on the lane (straight) or circle center (arc)
  double angle{0.0};  // direction (straight) or anchor angle (arc)
  double radius{0.0};
  int turn_sign{1};  // +1 ccw, -1 cw
  double half_len{0.0};

  Vec2 position(double s) const {  // s = signed arc length from the anchor
    if (!is_arc) return anchor + Vec2{std::cos(angle), std::sin(angle)} * s;
    const double phi = angle + turn_sign * s / radius;
    return anchor + Vec2{std::cos(phi), std::sin(phi)} * radius;
  }
  double heading(double s) const {  // tangent direction of increasing s
    if (!is_arc) return angle;
    const double phi = angle + turn_sign * s / radius;
    return wrap_angle(phi + turn_sign * 0.5 * M_PI);
  }
  std::vector<Vec2> sample(double spacing) const {
    std::vector<Vec2> pts;
    const int n =
        std::max(2, static_cast<int>(std::ceil(2.0 * half_len / spacing)) + 1);
    pts.reserve(n);
    for (int i = 0; i < n; ++i) {
      const double s = -half_len + 2.0 * half_len * i / (n - 1);
      pts.push_back(position(s));
    }
    return pts;
  }
};

AgentState state_at(const Lane& lane, double s0, double speed, int dir,
                    double t, double w, double l) {
  AgentState st;
  const double s = s0 + dir * speed * t;
  st.center = lane.position(s);
  st.heading = dir > 0 ? lane.heading(s) : wrap_angle(lane.heading(s) + M_PI);
  st.extent_w = w;
  st.extent_l = l;
  const double h = lane.heading(s);
  st.velocity = Vec2{std::cos(h), std::sin(h)} * (dir * speed);
  if (lane.is_arc) {
    // centripetal, pointing at the circle center
    const Vec2 radial = (lane.anchor - st.center) * (1.0 / lane.radius);
    st.acceleration = radial * (speed * speed / lane.radius);
  }
  st.valid = true;
  return st;
}

struct PedGroup {
  Vec2 center;
  Vec2 velocity;
  double turn_time{1e9};  // future time at which the walk bends
  double turn_angle{0.0};
};

Vec2 ped_position(const PedGroup& g, const Vec2& offset, double t) {
  if (t <= g.turn_time) return g.center + offset + g.velocity * t;
  const Vec2 at_turn = g.center + offset + g.velocity * g.turn_time;
  return at_turn + g.velocity.rotated(g.turn_angle) * (t - g.turn_time);
}

bool placement_free(const std::vector<OrientedBox>& placed,
                    const OrientedBox& candidate) {
  OrientedBox inflated = candidate;
  inflated.width += 0.2;  // clearance so true boxes have exactly zero overlap
  inflated.length += 0.2;
  for (const OrientedBox& b : placed)
    if (box_intersection_area(inflated, b) > 0.0) return false;
  return true;
}

bool within(const Vec2& p, const Vec2& ref, double half_extent) {
  return std::abs(p.x - ref.x) <= half_extent &&
         std::abs(p.y - ref.y) <= half_extent;
}

}  // namespace

Scene generate_scene(const GeneratorConfig& cfg, int index) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed, static_cast<uint64_t>(index)));

  // Lanes must carry a vehicle for t in [-t_in*dt, horizon_seconds] without
  // leaving the sampled polyline.
  const double travel_margin =
      (cfg.horizon_seconds + cfg.t_in * cfg.dt_in) * cfg.speed_range_vehicle[1] +
      10.0;
  const double straight_half_len = cfg.fov + travel_margin;

  std::vector<Lane> lanes;
  for (int i = 0; i < cfg.n_lanes; ++i) {
    Lane lane;
    const bool arc =
        cfg.lane_geometry == LaneGeometry::arc ||
        (cfg.lane_geometry == LaneGeometry::mixed && rng.uniform() < 0.5);
    if (arc) {
      lane.is_arc = true;
      const double r_min =
          std::max(0.6 * cfg.fov, (travel_margin + 0.3 * cfg.fov) / M_PI);
      lane.radius = rng.uniform(r_min, 2.0 * cfg.fov);
      lane.anchor = {rng.uniform(-0.5 * cfg.fov, 0.5 * cfg.fov),
                     rng.uniform(-0.5 * cfg.fov, 0.5 * cfg.fov)};
      lane.angle = rng.uniform(0.0, 2.0 * M_PI);
      lane.turn_sign = rng.uniform() < 0.5 ? 1 : -1;
      lane.half_len = std::min(straight_half_len, 0.98 * M_PI * lane.radius);
    } else {
      lane.angle = rng.uniform(0.0, 2.0 * M_PI);
      const double off = rng.uniform(-0.4 * cfg.fov, 0.4 * cfg.fov);
      lane.anchor = Vec2{std::cos(lane.angle + 0.5 * M_PI),
                         std::sin(lane.angle + 0.5 * M_PI)} *
                    off;
      lane.half_len = straight_half_len;
    }
    lanes.push_back(lane);
  }

  const int n_agents = static_cast<int>(
      rng.uniform_int(cfg.n_agents_range[0], cfg.n_agents_range[1]));
  const int n_ped =
      static_cast<int>(std::floor(cfg.pedestrian_fraction * (n_agents - 1)));
  const int n_veh = n_agents - n_ped;  // AV included

  Scene scene;
  scene.fov = cfg.fov;
  scene.av_index = 0;

  std::vector<OrientedBox> placed;
  Vec2 av_pos;  // t=0 AV position; everything is placed relative to it

  struct VehiclePlan {
    int lane;
    double s0, speed, w, l;
    int dir;
    int first_valid;  // past timesteps before this index are invalid
  };
  std::vector<VehiclePlan> plans;

  for (int vi = 0; vi < n_veh; ++vi) {
    bool ok = false;
    for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
      VehiclePlan p;
      p.lane = static_cast<int>(rng.uniform_int(0, cfg.n_lanes - 1));
      const Lane& lane = lanes[p.lane];
      const double safe_span =
          std::max(0.05 * cfg.fov, lane.half_len - travel_margin);
      const double place_span =
          vi == 0 ? std::min(0.1 * cfg.fov, safe_span)
                  : std::min(0.75 * cfg.fov, safe_span);
      p.s0 = rng.uniform(-place_span, place_span);
      p.speed =
          rng.uniform(cfg.speed_range_vehicle[0], cfg.speed_range_vehicle[1]);
      p.dir = rng.uniform() < 0.5 ? 1 : -1;
      p.w = rng.uniform(1.8, 2.2);
      p.l = rng.uniform(4.2, 5.0);
      p.first_valid =
          (vi > 0 && cfg.t_in >= 2 && rng.uniform() < 0.15)
              ? static_cast<int>(rng.uniform_int(1, std::max(1, cfg.t_in / 2)))
              : 0;
      const AgentState now = state_at(lane, p.s0, p.speed, p.dir, 0.0, p.w, p.l);
      if (vi > 0 && !within(now.center, av_pos, 0.85 * cfg.fov)) continue;
      if (!placement_free(placed, now.box())) continue;
      if (vi == 0) av_pos = now.center;
      placed.push_back(now.box());
      plans.push_back(p);
      ok = true;
    }
    if (!ok)
      throw GenerationError("scene " + std::to_string(index) +
                            ": cannot place vehicle " + std::to_string(vi) +
                            " without overlap after 100 attempts");
  }

  for (size_t vi = 0; vi < plans.size(); ++vi) {
    const VehiclePlan& p = plans[vi];
    const Lane& lane = lanes[p.lane];
    AgentTrack a;
    a.agent_id = static_cast<int64_t>(vi);
    a.agent_class = AgentClass::vehicle;
    for (int k = 0; k < cfg.t_in; ++k) {
      const double t = -(cfg.t_in - 1 - k) * cfg.dt_in;
      AgentState s = state_at(lane, p.s0, p.speed, p.dir, t, p.w, p.l);
      if (k < p.first_valid) s.valid = false;
      a.past.push_back(s);
    }
    for (int j = 1; j <= cfg.horizon; ++j) {
      const double t = cfg.horizon_seconds * j / cfg.horizon;
      a.future.push_back(
          state_at(lane, p.s0, p.speed, p.dir, t, p.w, p.l).center);
    }
    scene.agents.push_back(std::move(a));
  }

  // Pedestrians come in groups sharing one mean velocity, so occupancy blobs
  // track collective motion.
  int remaining = n_ped;
  int64_t next_id = static_cast<int64_t>(plans.size());
  while (remaining > 0) {
    const int group_size =
        static_cast<int>(std::min<int64_t>(remaining, rng.uniform_int(2, 5)));
    PedGroup g;
    g.center = {av_pos.x + rng.uniform(-0.7 * cfg.fov, 0.7 * cfg.fov),
                av_pos.y + rng.uniform(-0.7 * cfg.fov, 0.7 * cfg.fov)};
    const double speed = rng.uniform(cfg.speed_range_pedestrian[0],
                                     cfg.speed_range_pedestrian[1]);
    const double dir = rng.uniform(0.0, 2.0 * M_PI);
    g.velocity = Vec2{std::cos(dir), std::sin(dir)} * speed;
    if (cfg.horizon >= 4 && rng.uniform() < 0.6) {
      const double step = cfg.horizon_seconds / cfg.horizon;
      g.turn_time =
          step * static_cast<double>(rng.uniform_int(2, cfg.horizon - 2));
      g.turn_angle = rng.uniform(-M_PI / 3.0, M_PI / 3.0);
    }

    for (int m = 0; m < group_size; ++m) {
      bool ok = false;
      for (int attempt = 0; attempt < 100 && !ok; ++attempt) {
        const double r = rng.uniform(0.0, 3.0);
        const double phi = rng.uniform(0.0, 2.0 * M_PI);
        const Vec2 offset{r * std::cos(phi), r * std::sin(phi)};
        AgentState now;
        now.center = ped_position(g, offset, 0.0);
        now.heading = wrap_angle(dir);
        now.extent_w = rng.uniform(0.5, 0.9);
        now.extent_l = rng.uniform(0.5, 0.9);
        now.velocity = g.velocity;
        now.valid = true;
        if (!within(now.center, av_pos, 0.85 * cfg.fov)) continue;
        if (!placement_free(placed, now.box())) continue;
        placed.push_back(now.box());

        AgentTrack a;
        a.agent_id = next_id++;
        a.agent_class = AgentClass::pedestrian;
        const int first_valid =
            (cfg.t_in >= 2 && rng.uniform() < 0.15)
                ? static_cast<int>(
                      rng.uniform_int(1, std::max(1, cfg.t_in / 2)))
                : 0;
        for (int k = 0; k < cfg.t_in; ++k) {
          const double t = -(cfg.t_in - 1 - k) * cfg.dt_in;
          AgentState s = now;
          s.center = ped_position(g, offset, t);  // t <= 0: straight history
          s.valid = k >= first_valid;
          a.past.push_back(s);
        }
        for (int j = 1; j <= cfg.horizon; ++j) {
          const double t = cfg.horizon_seconds * j / cfg.horizon;
          a.future.push_back(ped_position(g, offset, t));
        }
        scene.agents.push_back(std::move(a));
        ok = true;
      }
      if (!ok)
        throw GenerationError("scene " + std::to_string(index) +
                              ": cannot place pedestrian without overlap "
                              "after 100 attempts");
    }
    remaining -= group_size;
  }

  for (const Lane& lane : lanes) {
    RoadPolyline center;
    center.element_type = RoadElementType::lane_center;
    center.points = lane.sample(cfg.lane_sample_spacing);
    const std::vector<Vec2> center_points = center.points;
    scene.roads.push_back(std::move(center));
    if (!lane.is_arc) {
      const Vec2 n{std::cos(lane.angle + 0.5 * M_PI),
                   std::sin(lane.angle + 0.5 * M_PI)};
      for (double side : {-2.0, 2.0}) {
        RoadPolyline edge;
        edge.element_type = RoadElementType::road_edge;
        for (const Vec2& p : center_points) edge.points.push_back(p + n * side);
        scene.roads.push_back(std::move(edge));
      }
    }
  }

  for (int i = 0; i < cfg.n_lanes; ++i) {
    if (rng.uniform() >= 0.5) continue;
    TrafficLight light;
    light.position = lanes[i].position(lanes[i].half_len);
    LightState color = static_cast<LightState>(rng.uniform_int(0, 2));
    const bool switches = cfg.t_in >= 2 && rng.uniform() < 0.3;
    const int switch_at =
        switches ? static_cast<int>(rng.uniform_int(1, cfg.t_in - 1)) : cfg.t_in;
    for (int k = 0; k < cfg.t_in; ++k) {
      if (k == switch_at)
        color = static_cast<LightState>((static_cast<int>(color) + 1) % 3);
      light.state_per_timestep.push_back(color);
    }
    scene.lights.push_back(std::move(light));
  }

  return transform_to_av_frame(scene);
}

void generate_dataset(const GeneratorConfig& cfg, int n_scenes,
                      const std::string& path) {
  if (n_scenes < 1) throw std::invalid_argument("n_scenes must be >= 1");
  std::vector<Scene> scenes;
  scenes.reserve(n_scenes);
  for (int i = 0; i < n_scenes; ++i) scenes.push_back(generate_scene(cfg, i));
  write_dataset(path, scenes);
}

}  // namespace pillarcast
