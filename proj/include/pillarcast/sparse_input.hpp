#pragma once

#include <vector>

#include "pillarcast/scene.hpp"

namespace pillarcast {

enum class PointSource { agent = 0, road = 1, light = 2 };
constexpr int kNumPointSources = 3;

/// Slot map of the per-point feature vector. Slots are disjoint and cover
/// exactly d_in; slots that do not apply to a point's source stay zero.
/// Kinematic slots are pre-normalized (velocity /30 m/s, acceleration
/// /10 m/s^2, extents /10 m); position slots hold raw meters until
/// build_input scales them by 1/fov.
struct FeatureLayout {
  int t_in{0};
  int pos{0};           // 2: x, y
  int heading{0};       // 2: cos, sin
  int extent{0};        // 2: w, l
  int velocity{0};      // 2
  int accel{0};         // 2
  int time_onehot{0};   // t_in slots
  int source_onehot{0}; // 3: agent, road, light
  int class_onehot{0};  // kNumAgentClasses
  int road_onehot{0};   // kNumRoadElementTypes
  int light_onehot{0};  // kNumLightStates
  int d_in{0};

  static FeatureLayout make(int t_in) {
    FeatureLayout l;
    l.t_in = t_in;
    int off = 0;
    l.pos = off; off += 2;
    l.heading = off; off += 2;
    l.extent = off; off += 2;
    l.velocity = off; off += 2;
    l.accel = off; off += 2;
    l.time_onehot = off; off += t_in;
    l.source_onehot = off; off += kNumPointSources;
    l.class_onehot = off; off += kNumAgentClasses;
    l.road_onehot = off; off += kNumRoadElementTypes;
    l.light_onehot = off; off += kNumLightStates;
    l.d_in = off;
    return l;
  }
};

constexpr double kVelocityScale = 1.0 / 30.0;
constexpr double kAccelScale = 1.0 / 10.0;
constexpr double kExtentScale = 1.0 / 10.0;

struct FeaturePoint {
  Vec2 position;  // raw meters (used by pillar assignment)
  std::vector<double> features;
  PointSource source{PointSource::agent};
};

struct FeaturePointSet {
  FeatureLayout layout;
  std::vector<FeaturePoint> points;
  double fov{0.0};
  size_t agent_count{0}, road_count{0}, light_count{0};
};

struct SparseInputConfig {
  int grid_u{8};          // lattice subdivisions along box length
  int grid_v{8};          // along box width
  double road_spacing{1.0};
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// n_u x n_v lattice at cell centers of the oriented box interior, one set
/// per agent per valid input timestep. Lattice index = u * n_v + v.
std::vector<FeaturePoint> sample_agent_points(const Scene& scene,
                                              const FeatureLayout& layout,
                                              int n_u, int n_v);

/// Arc-length resampling of every polyline (endpoints included); points
/// outside the FOV square are dropped.
std::vector<FeaturePoint> sample_road_points(const Scene& scene,
                                             const FeatureLayout& layout,
                                             double spacing);

/// One point per light per input timestep at the light's position.
std::vector<FeaturePoint> sample_traffic_light_points(
    const Scene& scene, const FeatureLayout& layout);

/// Union P = P^a | P^r | P^l in deterministic order (agents by agent_id,
/// timestep, lattice index; then roads; then lights), with position slots
/// scaled by 1/fov.
FeaturePointSet build_input(const Scene& scene, const FeatureLayout& layout,
                            const SparseInputConfig& cfg);

}  // namespace pillarcast
