#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pillarcast/scene.hpp"

namespace pillarcast {

/// K prototype trajectories (T waypoints each) relative to the agent's t=0
/// position, clustered from training futures.
struct AnchorSet {
  int k{0};
  int horizon{0};
  std::vector<Vec2> waypoints;  // [k][horizon]

  const Vec2* anchor(int idx) const { return waypoints.data() + static_cast<size_t>(idx) * horizon; }
  Vec2* anchor(int idx) { return waypoints.data() + static_cast<size_t>(idx) * horizon; }
};

/// Per-class anchor sets plus flat float buffers for the decoder.
struct ClassAnchors {
  std::vector<AnchorSet> per_class;  // size kNumAgentClasses
  // [class][k][t], decoder-side constants
  std::vector<std::vector<float>> flat_x, flat_y;

  void rebuild_flat();
};

/// k-means++ initial centers (deterministic given seed).
std::vector<int> kmeans_pp_init(const std::vector<std::vector<Vec2>>& futures,
                                int k, uint64_t seed);

/// Lloyd's under waypoint-wise squared Euclidean distance, run to convergence
/// or 100 iterations from the k-means++ initialization. Futures must already
/// be relative to each agent's t=0 position. Throws when fewer than k
/// distinct trajectories exist.
AnchorSet cluster_anchors(const std::vector<std::vector<Vec2>>& futures, int k,
                          uint64_t seed);

/// Total within-cluster cost of an anchor set over the given futures.
double anchor_cost(const AnchorSet& anchors,
                   const std::vector<std::vector<Vec2>>& futures);

/// argmin over anchors of summed squared waypoint distance; ties -> lowest.
int assign_anchor(const std::vector<Vec2>& gt_future, const AnchorSet& anchors);

/// Collects class-relative futures from scenes and clusters each class.
ClassAnchors cluster_class_anchors(const std::vector<Scene>& scenes, int k,
                                   uint64_t seed);

void save_anchors(const ClassAnchors& anchors, const std::string& path);
ClassAnchors load_anchors(const std::string& path);

}  // namespace pillarcast
