#include "pillarcast/raster.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

namespace pillarcast {

bool GridSpec::cell_of(const Vec2& p, int& ix, int& iy) const {
  if (std::abs(p.x) > fov || std::abs(p.y) > fov) return false;
  ix = static_cast<int>(std::floor((p.x + fov) / dx()));
  iy = static_cast<int>(std::floor((p.y + fov) / dy()));
  if (ix == w) ix = w - 1;
  if (iy == h) iy = h - 1;
  return true;
}

namespace {

// Cell index range overlapping the box's axis-aligned bounds (clipped).
void cell_bounds(const GridSpec& spec, const OrientedBox& box, int& x0, int& x1,
                 int& y0, int& y1) {
  const auto corners = box.corners();
  double min_x = corners[0].x, max_x = corners[0].x;
  double min_y = corners[0].y, max_y = corners[0].y;
  for (const Vec2& c : corners) {
    min_x = std::min(min_x, c.x);
    max_x = std::max(max_x, c.x);
    min_y = std::min(min_y, c.y);
    max_y = std::max(max_y, c.y);
  }
  x0 = std::max(0, static_cast<int>(std::floor((min_x + spec.fov) / spec.dx())));
  x1 = std::min(spec.w - 1,
                static_cast<int>(std::floor((max_x + spec.fov) / spec.dx())));
  y0 = std::max(0, static_cast<int>(std::floor((min_y + spec.fov) / spec.dy())));
  y1 = std::min(spec.h - 1,
                static_cast<int>(std::floor((max_y + spec.fov) / spec.dy())));
}

}  // namespace

void render_box_into(const GridSpec& spec, const OrientedBox& box,
                     RenderMode mode, int subsamples, double* out) {
  int x0, x1, y0, y1;
  cell_bounds(spec, box, x0, x1, y0, y1);
  for (int iy = y0; iy <= y1; ++iy) {
    for (int ix = x0; ix <= x1; ++ix) {
      double v = 0.0;
      if (mode == RenderMode::center) {
        v = box.contains(spec.cell_center(ix, iy)) ? 1.0 : 0.0;
      } else {
        int inside = 0;
        for (int sy = 0; sy < subsamples; ++sy)
          for (int sx = 0; sx < subsamples; ++sx) {
            const Vec2 p{-spec.fov + (ix + (sx + 0.5) / subsamples) * spec.dx(),
                         -spec.fov + (iy + (sy + 0.5) / subsamples) * spec.dy()};
            if (box.contains(p)) ++inside;
          }
        v = static_cast<double>(inside) / (subsamples * subsamples);
      }
      double& cell = out[static_cast<size_t>(iy) * spec.w + ix];
      cell = std::max(cell, v);
    }
  }
}

Grid render_box(const GridSpec& spec, const OrientedBox& box, RenderMode mode,
                int subsamples) {
  Grid grid(static_cast<size_t>(spec.w) * spec.h, 0.0);
  render_box_into(spec, box, mode, subsamples, grid.data());
  return grid;
}

std::vector<double> waypoint_headings(const Vec2& start, double start_heading,
                                      const std::vector<Vec2>& waypoints) {
  const size_t T = waypoints.size();
  std::vector<double> headings(T, start_heading);
  double prev = start_heading;
  for (size_t j = 0; j < T; ++j) {
    Vec2 seg;
    if (T == 1) {
      seg = waypoints[0] - start;
    } else if (j + 1 < T) {
      seg = waypoints[j + 1] - waypoints[j];
    } else {
      seg = waypoints[j] - waypoints[j - 1];  // last segment reused
    }
    if (seg.norm() >= 1e-3) prev = std::atan2(seg.y, seg.x);
    headings[j] = prev;
  }
  return headings;
}

OccupancyGrids render_gt_occupancy(const Scene& scene, const GridSpec& spec,
                                   int horizon) {
  OccupancyGrids grids(spec, kNumAgentClasses, horizon);
  for (const AgentTrack& a : scene.agents) {
    if (!a.has_future()) continue;
    const AgentState& now = a.current();
    const auto headings =
        waypoint_headings(now.center, now.heading, a.future);
    const int steps = std::min<int>(horizon, static_cast<int>(a.future.size()));
    for (int t = 0; t < steps; ++t) {
      const OrientedBox box{a.future[t], headings[t], now.extent_w,
                            now.extent_l};
      render_box_into(spec, box, RenderMode::center, 0,
                      grids.grid(static_cast<int>(a.agent_class), t));
    }
  }
  return grids;
}

Grid render_current_boxes(const Scene& scene, const GridSpec& spec) {
  Grid grid(static_cast<size_t>(spec.w) * spec.h, 0.0);
  for (const AgentTrack& a : scene.agents) {
    if (a.past.empty() || !a.current().valid) continue;
    render_box_into(spec, a.current().box(), RenderMode::center, 0,
                    grid.data());
  }
  return grid;
}

namespace {

// Dense Gaussian kernel in cell units, truncated at 3 sigma per axis and
// renormalized to sum 1. Returns half extents.
void gaussian_kernel(const GridSpec& spec, const WaypointGaussian& wp, int& hx,
                     int& hy, std::vector<double>& kernel) {
  const double sx = std::exp(wp.log_sigma_x);
  const double sy = std::exp(wp.log_sigma_y);
  hx = std::min(static_cast<int>(std::floor(3.0 * sx / spec.dx())), spec.w);
  hy = std::min(static_cast<int>(std::floor(3.0 * sy / spec.dy())), spec.h);
  kernel.assign(static_cast<size_t>(2 * hx + 1) * (2 * hy + 1), 0.0);
  const double rho = std::clamp(wp.rho, -0.999, 0.999);
  const double sxs = std::max(sx, 1e-9), sys = std::max(sy, 1e-9);
  const double denom = 1.0 / (1.0 - rho * rho);
  double sum = 0.0;
  for (int ky = -hy; ky <= hy; ++ky)
    for (int kx = -hx; kx <= hx; ++kx) {
      const double u = kx * spec.dx() / sxs;
      const double v = ky * spec.dy() / sys;
      const double q = (u * u - 2.0 * rho * u * v + v * v) * denom;
      const double val = std::exp(-0.5 * q);
      kernel[static_cast<size_t>(ky + hy) * (2 * hx + 1) + (kx + hx)] = val;
      sum += val;
    }
  for (double& v : kernel) v /= sum;
}

void convolve_full(const GridSpec& spec, const Grid& in, int hx, int hy,
                   const std::vector<double>& kernel, Grid& out) {
  out.assign(in.size(), 0.0);
  for (int iy = 0; iy < spec.h; ++iy)
    for (int ix = 0; ix < spec.w; ++ix) {
      const double v = in[static_cast<size_t>(iy) * spec.w + ix];
      if (v == 0.0) continue;
      for (int ky = -hy; ky <= hy; ++ky) {
        const int oy = iy + ky;
        if (oy < 0 || oy >= spec.h) continue;
        for (int kx = -hx; kx <= hx; ++kx) {
          const int ox = ix + kx;
          if (ox < 0 || ox >= spec.w) continue;
          out[static_cast<size_t>(oy) * spec.w + ox] +=
              v * kernel[static_cast<size_t>(ky + hy) * (2 * hx + 1) + (kx + hx)];
        }
      }
    }
}

}  // namespace

OccupancyGrids trajectories_to_occupancy(
    const std::vector<AgentPrediction>& preds, const Scene& scene,
    const GridSpec& spec, TrajectoryRenderMode mode) {
  // t=0 extents and headings come from the scene tracks
  std::vector<const AgentTrack*> by_id(scene.agents.size());
  for (size_t i = 0; i < scene.agents.size(); ++i) by_id[i] = &scene.agents[i];

  auto find_track = [&](int64_t id) -> const AgentTrack* {
    for (const AgentTrack* a : by_id)
      if (a->agent_id == id) return a;
    return nullptr;
  };

  const int horizon =
      preds.empty() ? 0
                    : static_cast<int>(preds[0].trajectories.empty()
                                           ? 0
                                           : preds[0].trajectories[0].waypoints.size());
  OccupancyGrids grids(spec, kNumAgentClasses, horizon);
  const size_t cells = grids.cells_per_grid();

  if (mode == TrajectoryRenderMode::top1) {
    for (const AgentPrediction& pred : preds) {
      const AgentTrack* track = find_track(pred.agent_id);
      if (!track || pred.trajectories.empty()) continue;
      const AgentState& now = track->current();
      const TrajectoryHypothesis& best = pred.trajectories[pred.top1_index()];
      std::vector<Vec2> means;
      means.reserve(best.waypoints.size());
      for (const WaypointGaussian& wp : best.waypoints) means.push_back(wp.mean);
      const auto headings = waypoint_headings(now.center, now.heading, means);
      for (size_t t = 0; t < means.size(); ++t) {
        const OrientedBox box{means[t], headings[t], now.extent_w, now.extent_l};
        render_box_into(spec, box, RenderMode::center, 0,
                        grids.grid(static_cast<int>(pred.agent_class),
                                   static_cast<int>(t)));
      }
    }
    return grids;
  }

  // weighted modes: probabilistic union over every (agent, k) render
  std::vector<double> survive(grids.data.size(), 1.0);
  Grid box_grid(cells), blurred(cells);
  std::vector<double> kernel;
  for (const AgentPrediction& pred : preds) {
    const AgentTrack* track = find_track(pred.agent_id);
    if (!track) continue;
    const AgentState& now = track->current();
    for (const TrajectoryHypothesis& hyp : pred.trajectories) {
      std::vector<Vec2> means;
      means.reserve(hyp.waypoints.size());
      for (const WaypointGaussian& wp : hyp.waypoints) means.push_back(wp.mean);
      const auto headings = waypoint_headings(now.center, now.heading, means);
      for (size_t t = 0; t < means.size(); ++t) {
        std::fill(box_grid.begin(), box_grid.end(), 0.0);
        const OrientedBox box{means[t], headings[t], now.extent_w, now.extent_l};
        render_box_into(spec, box, RenderMode::center, 0, box_grid.data());
        const Grid* contribution = &box_grid;
        if (mode == TrajectoryRenderMode::weighted_gaussian) {
          int hx, hy;
          gaussian_kernel(spec, hyp.waypoints[t], hx, hy, kernel);
          if (hx > 0 || hy > 0) {
            convolve_full(spec, box_grid, hx, hy, kernel, blurred);
            contribution = &blurred;
          }
        }
        double* surv =
            survive.data() + (static_cast<size_t>(static_cast<int>(
                                  pred.agent_class)) *
                                  grids.horizon +
                              t) *
                                 cells;
        for (size_t i = 0; i < cells; ++i)
          surv[i] *= 1.0 - hyp.probability * (*contribution)[i];
      }
    }
  }
  for (size_t i = 0; i < grids.data.size(); ++i)
    grids.data[i] = 1.0 - survive[i];
  return grids;
}

void write_pgm(const std::string& path, const GridSpec& spec,
               const double* grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "P5\n" << spec.w << " " << spec.h << "\n255\n";
  std::vector<unsigned char> row(spec.w);
  for (int iy = 0; iy < spec.h; ++iy) {
    for (int ix = 0; ix < spec.w; ++ix) {
      const double p = std::clamp(grid[static_cast<size_t>(iy) * spec.w + ix], 0.0, 1.0);
      row[ix] = static_cast<unsigned char>(std::lround(255.0 * p));
    }
    out.write(reinterpret_cast<const char*>(row.data()), spec.w);
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

void write_occupancy_pgms(const std::string& dir, const OccupancyGrids& grids) {
  std::filesystem::create_directories(dir);
  for (int a = 0; a < grids.n_classes; ++a)
    for (int t = 0; t < grids.horizon; ++t) {
      const std::string name = std::string(to_string(static_cast<AgentClass>(a))) +
                               "_" + std::to_string(t) + ".pgm";
      write_pgm(dir + "/" + name, grids.spec, grids.grid(a, t));
    }
}

}  // namespace pillarcast
