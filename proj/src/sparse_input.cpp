#include "pillarcast/sparse_input.hpp"

#include <algorithm>
#include <cmath>

namespace pillarcast {

namespace {

std::vector<const AgentTrack*> agents_by_id(const Scene& scene) {
  std::vector<const AgentTrack*> out;
  out.reserve(scene.agents.size());
  for (const AgentTrack& a : scene.agents) out.push_back(&a);
  std::sort(out.begin(), out.end(),
            [](const AgentTrack* a, const AgentTrack* b) {
              return a->agent_id < b->agent_id;
            });
  return out;
}

}  // namespace

std::vector<FeaturePoint> sample_agent_points(const Scene& scene,
                                              const FeatureLayout& layout,
                                              int n_u, int n_v) {
  if (n_u < 1 || n_v < 1)
    throw ConfigError("agent point grid must be at least 1x1");
  std::vector<FeaturePoint> out;
  for (const AgentTrack* a : agents_by_id(scene)) {
    const int t_in = static_cast<int>(a->past.size());
    for (int t = 0; t < t_in; ++t) {
      const AgentState& s = a->past[t];
      if (!s.valid) continue;
      const double c = std::cos(s.heading), sn = std::sin(s.heading);
      for (int u = 0; u < n_u; ++u) {
        const double lu = (-0.5 + (u + 0.5) / n_u) * s.extent_l;
        for (int v = 0; v < n_v; ++v) {
          const double lv = (-0.5 + (v + 0.5) / n_v) * s.extent_w;
          FeaturePoint p;
          p.source = PointSource::agent;
          p.position = {s.center.x + c * lu - sn * lv,
                        s.center.y + sn * lu + c * lv};
          p.features.assign(layout.d_in, 0.0);
          p.features[layout.pos] = p.position.x;
          p.features[layout.pos + 1] = p.position.y;
          p.features[layout.heading] = c;
          p.features[layout.heading + 1] = sn;
          p.features[layout.extent] = s.extent_w * kExtentScale;
          p.features[layout.extent + 1] = s.extent_l * kExtentScale;
          p.features[layout.velocity] = s.velocity.x * kVelocityScale;
          p.features[layout.velocity + 1] = s.velocity.y * kVelocityScale;
          p.features[layout.accel] = s.acceleration.x * kAccelScale;
          p.features[layout.accel + 1] = s.acceleration.y * kAccelScale;
          if (t < layout.t_in) p.features[layout.time_onehot + t] = 1.0;
          p.features[layout.source_onehot + static_cast<int>(PointSource::agent)] = 1.0;
          p.features[layout.class_onehot + static_cast<int>(a->agent_class)] = 1.0;
          out.push_back(std::move(p));
        }
      }
    }
  }
  return out;
}

std::vector<FeaturePoint> sample_road_points(const Scene& scene,
                                             const FeatureLayout& layout,
                                             double spacing) {
  if (!(spacing > 0.0)) throw ConfigError("road spacing must be positive");
  std::vector<FeaturePoint> out;
  for (const RoadPolyline& line : scene.roads) {
    // cumulative arc length
    std::vector<double> cum(line.points.size(), 0.0);
    for (size_t i = 1; i < line.points.size(); ++i)
      cum[i] = cum[i - 1] + distance(line.points[i - 1], line.points[i]);
    const double total = cum.back();

    std::vector<double> stations;
    const int n_regular = static_cast<int>(std::floor(total / spacing));
    for (int k = 0; k <= n_regular; ++k) stations.push_back(k * spacing);
    if (stations.back() < total - 1e-12) stations.push_back(total);  // endpoint

    size_t seg = 0;
    for (double s : stations) {
      while (seg + 2 < line.points.size() && cum[seg + 1] < s) ++seg;
      const double seg_len = cum[seg + 1] - cum[seg];
      const double t = seg_len > 0.0 ? std::min(1.0, (s - cum[seg]) / seg_len) : 0.0;
      const Vec2 pos = line.points[seg] + (line.points[seg + 1] - line.points[seg]) * t;
      if (std::abs(pos.x) > scene.fov || std::abs(pos.y) > scene.fov) continue;
      FeaturePoint p;
      p.source = PointSource::road;
      p.position = pos;
      p.features.assign(layout.d_in, 0.0);
      p.features[layout.pos] = pos.x;
      p.features[layout.pos + 1] = pos.y;
      p.features[layout.source_onehot + static_cast<int>(PointSource::road)] = 1.0;
      p.features[layout.road_onehot + static_cast<int>(line.element_type)] = 1.0;
      out.push_back(std::move(p));
    }
  }
  return out;
}

std::vector<FeaturePoint> sample_traffic_light_points(
    const Scene& scene, const FeatureLayout& layout) {
  std::vector<FeaturePoint> out;
  for (const TrafficLight& light : scene.lights) {
    const int t_in = static_cast<int>(light.state_per_timestep.size());
    for (int t = 0; t < t_in; ++t) {
      FeaturePoint p;
      p.source = PointSource::light;
      p.position = light.position;
      p.features.assign(layout.d_in, 0.0);
      p.features[layout.pos] = light.position.x;
      p.features[layout.pos + 1] = light.position.y;
      if (t < layout.t_in) p.features[layout.time_onehot + t] = 1.0;
      p.features[layout.source_onehot + static_cast<int>(PointSource::light)] = 1.0;
      p.features[layout.light_onehot +
                 static_cast<int>(light.state_per_timestep[t])] = 1.0;
      out.push_back(std::move(p));
    }
  }
  return out;
}

FeaturePointSet build_input(const Scene& scene, const FeatureLayout& layout,
                            const SparseInputConfig& cfg) {
  if (layout.d_in != FeatureLayout::make(layout.t_in).d_in)
    throw ConfigError("feature layout is inconsistent with its t_in");
  for (const AgentTrack& a : scene.agents)
    if (static_cast<int>(a.past.size()) != layout.t_in)
      throw ConfigError("scene t_in " + std::to_string(a.past.size()) +
                        " does not match layout t_in " +
                        std::to_string(layout.t_in));

  FeaturePointSet set;
  set.layout = layout;
  set.fov = scene.fov;

  auto agents = sample_agent_points(scene, layout, cfg.grid_u, cfg.grid_v);
  auto roads = sample_road_points(scene, layout, cfg.road_spacing);
  auto lights = sample_traffic_light_points(scene, layout);
  set.agent_count = agents.size();
  set.road_count = roads.size();
  set.light_count = lights.size();

  set.points.reserve(agents.size() + roads.size() + lights.size());
  for (auto& v : {&agents, &roads, &lights})
    for (FeaturePoint& p : *v) set.points.push_back(std::move(p));

  const double inv_fov = 1.0 / scene.fov;
  for (FeaturePoint& p : set.points) {
    p.features[layout.pos] *= inv_fov;
    p.features[layout.pos + 1] *= inv_fov;
  }
  return set;
}

}  // namespace pillarcast
