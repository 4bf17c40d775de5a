#pragma once

#include <string>
#include <vector>

#include "pillarcast/prediction.hpp"
#include "pillarcast/scene.hpp"

namespace pillarcast {

/// BEV grid over the FOV square; same half-open cell convention as pillar
/// assignment (index = floor((x+fov)/dx), upper edge clamped).
struct GridSpec {
  int w{0}, h{0};
  double fov{0.0};

  double dx() const { return 2.0 * fov / w; }
  double dy() const { return 2.0 * fov / h; }
  Vec2 cell_center(int ix, int iy) const {
    return {-fov + (ix + 0.5) * dx(), -fov + (iy + 0.5) * dy()};
  }
  /// Cell of a position; returns false when outside the FOV square.
  bool cell_of(const Vec2& p, int& ix, int& iy) const;
};

/// Single W x H grid, row-major [iy][ix]; row 0 is the y = -fov edge.
using Grid = std::vector<double>;

/// Per-class, per-timestep occupancy values in [0,1]; data laid out
/// [class][t][iy][ix].
struct OccupancyGrids {
  GridSpec spec;
  int n_classes{0};
  int horizon{0};
  std::vector<double> data;

  OccupancyGrids() = default;
  OccupancyGrids(GridSpec s, int classes, int t)
      : spec(s),
        n_classes(classes),
        horizon(t),
        data(static_cast<size_t>(classes) * t * s.w * s.h, 0.0) {}

  double* grid(int a, int t) {
    return data.data() +
           (static_cast<size_t>(a) * horizon + t) * spec.w * spec.h;
  }
  const double* grid(int a, int t) const {
    return data.data() +
           (static_cast<size_t>(a) * horizon + t) * spec.w * spec.h;
  }
  size_t cells_per_grid() const { return static_cast<size_t>(spec.w) * spec.h; }
};

enum class RenderMode { center, coverage };

/// Rasterize one oriented box. center mode: cell is 1 iff its center lies in
/// the box (half-open: min edges inclusive). coverage mode: fraction of an
/// s x s subsample lattice inside the box.
Grid render_box(const GridSpec& spec, const OrientedBox& box, RenderMode mode,
                int subsamples = 4);

/// Accumulates max(render_box(...)) into an existing grid without allocating.
void render_box_into(const GridSpec& spec, const OrientedBox& box,
                     RenderMode mode, int subsamples, double* out);

/// Binary ground-truth occupancy: cell-wise max over all class-a boxes at
/// their future positions; heading from consecutive gt waypoints (the last
/// segment is reused at the final step), extents held at t=0.
OccupancyGrids render_gt_occupancy(const Scene& scene, const GridSpec& spec,
                                   int horizon);

/// Class-agnostic union of all agent boxes at t=0.
Grid render_current_boxes(const Scene& scene, const GridSpec& spec);

enum class TrajectoryRenderMode { top1, weighted, weighted_gaussian };

/// Converts trajectory sets to occupancy grids. top1 renders each agent's
/// argmax trajectory as binary boxes; weighted renders all K at intensity p_k
/// and combines cells by probabilistic union 1 - prod(1 - v); in
/// weighted_gaussian each rendered box is first convolved with the waypoint's
/// discretized Gaussian (truncated at 3 sigma, renormalized).
OccupancyGrids trajectories_to_occupancy(
    const std::vector<AgentPrediction>& preds, const Scene& scene,
    const GridSpec& spec, TrajectoryRenderMode mode);

/// Heading sequence along a waypoint list: segment direction per waypoint,
/// falling back to the previous heading when a segment is shorter than 1e-3 m.
std::vector<double> waypoint_headings(const Vec2& start, double start_heading,
                                      const std::vector<Vec2>& waypoints);

/// Binary PGM (P5) with maxval 255; value = round(255 * p).
void write_pgm(const std::string& path, const GridSpec& spec, const double* grid);

/// Dumps one PGM per (class, timestep) named {class}_{t}.pgm under dir.
void write_occupancy_pgms(const std::string& dir, const OccupancyGrids& grids);

}  // namespace pillarcast
