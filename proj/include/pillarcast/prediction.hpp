#pragma once

#include <cstdint>
#include <vector>

#include "pillarcast/scene.hpp"

namespace pillarcast {

/// One predicted waypoint: mean position plus a 2D Gaussian (log stddevs and
/// correlation in (-1,1)).
struct WaypointGaussian {
  Vec2 mean;
  double log_sigma_x{0.0};
  double log_sigma_y{0.0};
  double rho{0.0};
};

struct TrajectoryHypothesis {
  double probability{0.0};
  std::vector<WaypointGaussian> waypoints;  // length T
};

/// K weighted trajectories for one agent, in the whole-scene frame.
struct AgentPrediction {
  int64_t agent_id{0};
  AgentClass agent_class{AgentClass::vehicle};
  std::vector<TrajectoryHypothesis> trajectories;  // length K

  int top1_index() const {
    int best = 0;
    for (size_t k = 1; k < trajectories.size(); ++k)
      if (trajectories[k].probability > trajectories[best].probability)
        best = static_cast<int>(k);
    return best;
  }
};

}  // namespace pillarcast
