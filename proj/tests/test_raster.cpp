#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "pillarcast/metrics.hpp"
#include "pillarcast/raster.hpp"
#include "pillarcast/rng.hpp"
#include "pillarcast/synth.hpp"

using namespace pillarcast;

namespace {

// brute-force oracle: point-in-convex-polygon by corner half-planes, with the
// same min-edge-inclusive convention expressed through the box's local frame
bool point_in_box_oracle(const OrientedBox& box, const Vec2& p) {
  const auto corners = box.corners();
  // half-plane test: inside iff on the same side of every edge
  int sign = 0;
  for (int i = 0; i < 4; ++i) {
    const Vec2& a = corners[i];
    const Vec2& b = corners[(i + 1) % 4];
    const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
    if (cross == 0.0) continue;  // boundary resolved by the box convention
    const int s = cross > 0.0 ? 1 : -1;
    if (sign == 0) sign = s;
    else if (s != sign) return false;
  }
  return true;
}

Scene scene_with(const std::vector<AgentTrack>& agents, double fov) {
  Scene s;
  s.fov = fov;
  s.av_index = 0;
  s.agents = agents;
  return s;
}

AgentTrack make_agent(int64_t id, AgentClass cls, Vec2 center, double heading,
                      double w, double l, std::vector<Vec2> future = {}) {
  AgentTrack a;
  a.agent_id = id;
  a.agent_class = cls;
  AgentState st;
  st.center = center;
  st.heading = heading;
  st.extent_w = w;
  st.extent_l = l;
  st.valid = true;
  a.past.push_back(st);
  a.future = std::move(future);
  return a;
}

}  // namespace

TEST_CASE("axis-aligned 2x2 box on 1 m cells lights exactly 4 cells") {
  const GridSpec spec{20, 20, 10.0};
  const OrientedBox box{{0.0, 0.0}, 0.0, 2.0, 2.0};
  const Grid g = render_box(spec, box, RenderMode::center);
  int ones = 0;
  for (double v : g) {
    CHECK((v == 0.0 || v == 1.0));
    ones += v == 1.0 ? 1 : 0;
  }
  CHECK(ones == 4);
  // the four cells around the origin
  for (int iy : {9, 10})
    for (int ix : {9, 10})
      CHECK(g[static_cast<size_t>(iy) * 20 + ix] == 1.0);
}

TEST_CASE("box fully outside the FOV renders a zero grid") {
  const GridSpec spec{16, 16, 8.0};
  const OrientedBox box{{30.0, 30.0}, 0.7, 2.0, 4.0};
  const Grid g = render_box(spec, box, RenderMode::center);
  for (double v : g) CHECK(v == 0.0);
}

TEST_CASE("center mode matches the brute-force point-in-polygon oracle on 1000 random boxes") {
  Rng rng(31);
  const GridSpec spec{32, 32, 16.0};
  int mismatches = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const OrientedBox box{{rng.uniform(-14.0, 14.0), rng.uniform(-14.0, 14.0)},
                          rng.uniform(-M_PI, M_PI),
                          rng.uniform(0.4, 3.0),
                          rng.uniform(0.4, 6.0)};
    const Grid g = render_box(spec, box, RenderMode::center);
    for (int iy = 0; iy < spec.h; ++iy)
      for (int ix = 0; ix < spec.w; ++ix) {
        const bool oracle = point_in_box_oracle(box, spec.cell_center(ix, iy));
        const bool got = g[static_cast<size_t>(iy) * spec.w + ix] == 1.0;
        if (oracle != got) ++mismatches;
      }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("coverage(4) within 0.1 of a coverage(64) oracle on rotated boxes") {
  Rng rng(32);
  const GridSpec spec{24, 24, 6.0};
  for (int trial = 0; trial < 20; ++trial) {
    const OrientedBox box{{rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0)},
                          trial == 0 ? M_PI / 4 : rng.uniform(-M_PI, M_PI),
                          trial == 0 ? 1.0 : rng.uniform(0.5, 2.5),
                          trial == 0 ? 1.0 : rng.uniform(0.5, 2.5)};
    const Grid fast = render_box(spec, box, RenderMode::coverage, 4);
    const Grid fine = render_box(spec, box, RenderMode::coverage, 64);
    for (size_t i = 0; i < fast.size(); ++i)
      CHECK(std::abs(fast[i] - fine[i]) <= 0.1);
  }
}

TEST_CASE("gt occupancy separates classes and unions overlaps") {
  const GridSpec spec{40, 40, 20.0};
  std::vector<Vec2> future1, future2;
  for (int j = 1; j <= 5; ++j) {
    future1.push_back({0.5 * j, 0.0});
    future2.push_back({0.5 * j - 1.0, 0.0});  // overlapping the first vehicle
  }
  auto a1 = make_agent(0, AgentClass::vehicle, {0, 0}, 0.0, 2.0, 4.0, future1);
  auto a2 = make_agent(1, AgentClass::vehicle, {-1, 0}, 0.0, 2.0, 4.0, future2);
  const Scene s = scene_with({a1, a2}, 20.0);
  const OccupancyGrids g = render_gt_occupancy(s, spec, 5);
  // one vehicle => pedestrian grids all zero
  for (int t = 0; t < 5; ++t)
    for (size_t i = 0; i < g.cells_per_grid(); ++i)
      CHECK(g.grid(static_cast<int>(AgentClass::pedestrian), t)[i] == 0.0);
  // overlap stays binary (max union)
  for (int t = 0; t < 5; ++t)
    for (size_t i = 0; i < g.cells_per_grid(); ++i) {
      const double v = g.grid(0, t)[i];
      CHECK((v == 0.0 || v == 1.0));
    }
  // both boxes contribute
  const Grid only1 = render_box(spec, {future1[0], 0.0, 2.0, 4.0}, RenderMode::center);
  double sum1 = 0.0, sum_union = 0.0;
  for (size_t i = 0; i < only1.size(); ++i) {
    sum1 += only1[i];
    sum_union += g.grid(0, 0)[i];
  }
  CHECK(sum_union > sum1);
}

TEST_CASE("stationary agent renders identical grids for all timesteps") {
  const GridSpec spec{32, 32, 16.0};
  std::vector<Vec2> future(6, Vec2{2.0, 1.0});
  auto a = make_agent(0, AgentClass::pedestrian, {2.0, 1.0}, 0.9, 0.7, 0.7, future);
  const Scene s = scene_with({a}, 16.0);
  const OccupancyGrids g = render_gt_occupancy(s, spec, 6);
  for (int t = 1; t < 6; ++t)
    for (size_t i = 0; i < g.cells_per_grid(); ++i)
      CHECK(g.grid(1, t)[i] == g.grid(1, 0)[i]);
}

TEST_CASE("current boxes: empty scene and gt equivalence for frozen futures") {
  const GridSpec spec{32, 32, 16.0};
  const Scene empty = scene_with({}, 16.0);
  for (double v : render_current_boxes(empty, spec)) CHECK(v == 0.0);

  // futures equal to current positions -> class-collapsed gt equals boxes
  auto veh = make_agent(0, AgentClass::vehicle, {1.0, 2.0}, 0.3, 2.0, 4.5,
                        std::vector<Vec2>(4, Vec2{1.0, 2.0}));
  auto ped = make_agent(1, AgentClass::pedestrian, {-3.0, 0.5}, -0.4, 0.7, 0.8,
                        std::vector<Vec2>(4, Vec2{-3.0, 0.5}));
  const Scene s = scene_with({veh, ped}, 16.0);
  const Grid boxes = render_current_boxes(s, spec);
  const OccupancyGrids gt = render_gt_occupancy(s, spec, 4);
  for (size_t i = 0; i < boxes.size(); ++i) {
    const double collapsed = std::max(gt.grid(0, 0)[i], gt.grid(1, 0)[i]);
    CHECK(boxes[i] == collapsed);
  }
  // the AV box is present (agent 0 is the AV)
  double total = 0.0;
  for (double v : boxes) total += v;
  CHECK(total > 0.0);
}

TEST_CASE("heading along waypoints falls back on short segments") {
  const auto headings = waypoint_headings(
      {0, 0}, 0.25, {{0.0005, 0.0}, {0.001, 0.0}, {0.001, 0.0005}});
  CHECK(headings[0] == doctest::Approx(0.25));  // both segments too short
  CHECK(headings[1] == doctest::Approx(0.25));
  CHECK(headings[2] == doctest::Approx(0.25));
  const auto moving = waypoint_headings({0, 0}, 0.0, {{1, 0}, {1, 1}, {2, 1}});
  CHECK(moving[0] == doctest::Approx(M_PI / 2));  // segment 0 -> 1 points up
  CHECK(moving[1] == doctest::Approx(0.0));
  CHECK(moving[2] == doctest::Approx(0.0));  // last reuses the final segment
}

namespace {

std::vector<AgentPrediction> two_hypotheses(double p1, double p2, Vec2 base) {
  AgentPrediction pred;
  pred.agent_id = 0;
  pred.agent_class = AgentClass::vehicle;
  for (double prob : {p1, p2}) {
    TrajectoryHypothesis hyp;
    hyp.probability = prob;
    for (int t = 0; t < 3; ++t) {
      WaypointGaussian wp;
      wp.mean = base + Vec2{0.8 * (t + 1), prob};  // hypotheses diverge in y
      wp.log_sigma_x = std::log(1e-4);
      wp.log_sigma_y = std::log(1e-4);
      hyp.waypoints.push_back(wp);
    }
    pred.trajectories.push_back(hyp);
  }
  return {pred};
}

}  // namespace

TEST_CASE("top1 equals weighted for a single certain trajectory") {
  const GridSpec spec{24, 24, 12.0};
  auto a = make_agent(0, AgentClass::vehicle, {0, 0}, 0.0, 2.0, 4.0);
  const Scene s = scene_with({a}, 12.0);
  AgentPrediction pred;
  pred.agent_id = 0;
  pred.agent_class = AgentClass::vehicle;
  TrajectoryHypothesis hyp;
  hyp.probability = 1.0;
  for (int t = 0; t < 3; ++t)
    hyp.waypoints.push_back({{0.9 * (t + 1), 0.0}, 0.0, 0.0, 0.0});
  pred.trajectories.push_back(hyp);

  const OccupancyGrids top1 =
      trajectories_to_occupancy({pred}, s, spec, TrajectoryRenderMode::top1);
  const OccupancyGrids weighted =
      trajectories_to_occupancy({pred}, s, spec, TrajectoryRenderMode::weighted);
  for (size_t i = 0; i < top1.data.size(); ++i)
    CHECK(top1.data[i] == doctest::Approx(weighted.data[i]).epsilon(1e-12));
  // top1 output is binary
  for (double v : top1.data) CHECK((v == 0.0 || v == 1.0));
}

TEST_CASE("weighted union on a shared cell: 1 - 0.4*0.6 = 0.76") {
  const GridSpec spec{16, 16, 8.0};
  auto a = make_agent(0, AgentClass::vehicle, {0, 0}, 0.0, 3.0, 3.0);
  const Scene s = scene_with({a}, 8.0);
  // both hypotheses cover the cell containing their shared mean
  AgentPrediction pred;
  pred.agent_id = 0;
  pred.agent_class = AgentClass::vehicle;
  for (double prob : {0.6, 0.4}) {
    TrajectoryHypothesis hyp;
    hyp.probability = prob;
    hyp.waypoints.push_back({{0.0, 0.0}, 0.0, 0.0, 0.0});
    pred.trajectories.push_back(hyp);
  }
  const OccupancyGrids weighted =
      trajectories_to_occupancy({pred}, s, spec, TrajectoryRenderMode::weighted);
  int ix, iy;
  REQUIRE(spec.cell_of({0.0, 0.0}, ix, iy));
  CHECK(weighted.grid(0, 0)[static_cast<size_t>(iy) * spec.w + ix] ==
        doctest::Approx(1.0 - 0.4 * 0.6));
}

TEST_CASE("weighted_gaussian with sub-cell sigma equals weighted") {
  const GridSpec spec{24, 24, 12.0};
  auto a = make_agent(0, AgentClass::vehicle, {0, 0}, 0.0, 2.0, 4.0);
  const Scene s = scene_with({a}, 12.0);
  const auto preds = two_hypotheses(0.7, 0.3, {0.5, 0.0});
  const OccupancyGrids weighted =
      trajectories_to_occupancy(preds, s, spec, TrajectoryRenderMode::weighted);
  const OccupancyGrids gaussian = trajectories_to_occupancy(
      preds, s, spec, TrajectoryRenderMode::weighted_gaussian);
  for (size_t i = 0; i < weighted.data.size(); ++i)
    CHECK(std::abs(weighted.data[i] - gaussian.data[i]) < 1e-3);
}

TEST_CASE("raising a trajectory probability never lowers a cell (weighted)") {
  const GridSpec spec{24, 24, 12.0};
  auto a = make_agent(0, AgentClass::vehicle, {0, 0}, 0.0, 2.0, 4.0);
  const Scene s = scene_with({a}, 12.0);
  const OccupancyGrids lo =
      trajectories_to_occupancy(two_hypotheses(0.2, 0.3, {0, 0}), s, spec,
                                TrajectoryRenderMode::weighted);
  const OccupancyGrids hi =
      trajectories_to_occupancy(two_hypotheses(0.6, 0.3, {0, 0}), s, spec,
                                TrajectoryRenderMode::weighted);
  for (size_t i = 0; i < lo.data.size(); ++i) CHECK(hi.data[i] >= lo.data[i] - 1e-12);
}

TEST_CASE("grid translation equivariance by whole cells") {
  const GridSpec spec{20, 20, 10.0};  // 1 m cells
  const OrientedBox box{{1.3, -2.2}, 0.77, 1.4, 3.1};
  const Grid base = render_box(spec, box, RenderMode::center);
  OrientedBox shifted = box;
  shifted.center += Vec2{3.0, 2.0};  // +3 cells x, +2 cells y
  const Grid moved = render_box(spec, shifted, RenderMode::center);
  for (int iy = 0; iy < 18; ++iy)
    for (int ix = 0; ix < 17; ++ix)
      CHECK(base[static_cast<size_t>(iy) * 20 + ix] ==
            moved[static_cast<size_t>(iy + 2) * 20 + ix + 3]);
}

TEST_CASE("PGM export writes the documented header and bytes") {
  const GridSpec spec{4, 3, 2.0};
  Grid g(12, 0.0);
  g[0] = 1.0;
  g[5] = 0.5;
  write_pgm("raster_test.pgm", spec, g.data());
  std::ifstream in("raster_test.pgm", std::ios::binary);
  std::string header;
  std::getline(in, header);
  CHECK(header == "P5");
  std::getline(in, header);
  CHECK(header == "4 3");
  std::getline(in, header);
  CHECK(header == "255");
  unsigned char bytes[12];
  in.read(reinterpret_cast<char*>(bytes), 12);
  CHECK(bytes[0] == 255);
  CHECK(bytes[5] == 128);  // round(255 * 0.5)
  CHECK(bytes[1] == 0);
  std::remove("raster_test.pgm");
}

TEST_CASE("occupancy PGM dump uses {class}_{t}.pgm names") {
  const GridSpec spec{8, 8, 4.0};
  OccupancyGrids g(spec, kNumAgentClasses, 2);
  write_occupancy_pgms("raster_pgm_dir", g);
  CHECK(std::ifstream("raster_pgm_dir/vehicle_0.pgm").good());
  CHECK(std::ifstream("raster_pgm_dir/pedestrian_1.pgm").good());
  std::remove("raster_pgm_dir/vehicle_0.pgm");
  std::remove("raster_pgm_dir/vehicle_1.pgm");
  std::remove("raster_pgm_dir/pedestrian_0.pgm");
  std::remove("raster_pgm_dir/pedestrian_1.pgm");
}
