#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "pillarcast/metrics.hpp"
#include "pillarcast/rng.hpp"

using namespace pillarcast;

namespace {

std::vector<Vec2> line_traj(Vec2 start, Vec2 step, int t) {
  std::vector<Vec2> out;
  for (int i = 1; i <= t; ++i) out.push_back(start + step * i);
  return out;
}

// independent PR-curve oracle following the same definition: thresholds from
// strictest to loosest, precision 1 on an empty prediction set, leading
// (0, p_strictest) endpoint, trapezoid over the recall axis
double auc_oracle(const std::vector<double>& pred, const std::vector<double>& gt,
                  int n_thresholds) {
  size_t pos = 0;
  for (double v : gt) pos += v > 0.5 ? 1 : 0;
  REQUIRE(pos > 0);
  std::vector<std::pair<double, double>> pts;  // (recall, precision)
  for (int k = n_thresholds - 1; k >= 0; --k) {
    const double tau = static_cast<double>(k) / (n_thresholds - 1);
    size_t tp = 0, fp = 0;
    for (size_t i = 0; i < pred.size(); ++i)
      if (pred[i] >= tau) ((gt[i] > 0.5) ? tp : fp) += 1;
    pts.emplace_back(static_cast<double>(tp) / pos,
                     (tp + fp) == 0 ? 1.0 : static_cast<double>(tp) / (tp + fp));
  }
  double auc = 0.0, pr = 0.0, pp = pts.front().second;
  for (const auto& [r, p] : pts) {
    auc += (r - pr) * 0.5 * (p + pp);
    pr = r;
    pp = p;
  }
  return auc;
}

}  // namespace

TEST_CASE("min_ade basics") {
  const auto gt = line_traj({0, 0}, {1, 0}, 5);
  CHECK(min_ade({gt}, gt) == 0.0);

  std::vector<std::vector<Vec2>> offset;
  for (int k = 0; k < 3; ++k) {
    auto t = gt;
    for (Vec2& p : t) p += Vec2{1.0, 0.0};
    offset.push_back(t);
  }
  CHECK(min_ade(offset, gt) == doctest::Approx(1.0));
  CHECK_THROWS_AS(min_ade({line_traj({0, 0}, {1, 0}, 4)}, gt),
                  std::invalid_argument);
}

TEST_CASE("min_fde basics and a diverging argmin from min_ade") {
  const auto gt = line_traj({0, 0}, {1, 0}, 4);
  auto exact_end = line_traj({0, 0}, {1, 0}, 4);
  for (size_t i = 0; i + 1 < exact_end.size(); ++i) exact_end[i].y += 3.0;
  CHECK(min_fde({exact_end}, gt) == 0.0);

  auto away = gt;
  away.back() += Vec2{2.0, 0.0};
  CHECK(min_fde({away}, gt) == doctest::Approx(2.0));

  // candidate A: best ADE, bad FDE; candidate B: bad ADE, exact FDE
  auto a = gt;
  a.back() += Vec2{1.5, 0.0};
  auto b = gt;
  for (size_t i = 0; i + 1 < b.size(); ++i) b[i].y += 2.0;
  const std::vector<std::vector<Vec2>> cands = {a, b};
  // argmin for ADE is A (index 0), argmin for FDE is B (index 1)
  double ade_a = 0, ade_b = 0;
  for (size_t t = 0; t < gt.size(); ++t) {
    ade_a += distance(a[t], gt[t]);
    ade_b += distance(b[t], gt[t]);
  }
  CHECK(ade_a < ade_b);
  CHECK(min_fde(cands, gt) == 0.0);
  CHECK(min_ade(cands, gt) == doctest::Approx(ade_a / gt.size()));
}

TEST_CASE("min_ade/min_fde match brute force on 1000 random cases") {
  Rng rng(41);
  for (int trial = 0; trial < 1000; ++trial) {
    const int T = 1 + static_cast<int>(rng.uniform_int(0, 7));
    const int K = 1 + static_cast<int>(rng.uniform_int(0, 5));
    std::vector<Vec2> gt;
    for (int t = 0; t < T; ++t)
      gt.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10)});
    std::vector<std::vector<Vec2>> pred(K);
    for (auto& traj : pred)
      for (int t = 0; t < T; ++t)
        traj.push_back({rng.uniform(-10, 10), rng.uniform(-10, 10)});

    double best_ade = 1e300, best_fde = 1e300;
    for (const auto& traj : pred) {
      double acc = 0.0;
      for (int t = 0; t < T; ++t) acc += std::hypot(traj[t].x - gt[t].x, traj[t].y - gt[t].y);
      best_ade = std::min(best_ade, acc / T);
      best_fde = std::min(best_fde,
                          std::hypot(traj[T - 1].x - gt[T - 1].x, traj[T - 1].y - gt[T - 1].y));
    }
    CHECK(std::abs(min_ade(pred, gt) - best_ade) < 1e-9);
    CHECK(std::abs(min_fde(pred, gt) - best_fde) < 1e-9);
  }
}

TEST_CASE("adding a candidate never increases min_ade or min_fde") {
  Rng rng(42);
  const auto gt = line_traj({0, 0}, {0.5, 0.2}, 6);
  std::vector<std::vector<Vec2>> pred;
  double prev_ade = 1e300, prev_fde = 1e300;
  for (int k = 0; k < 8; ++k) {
    std::vector<Vec2> traj;
    for (int t = 0; t < 6; ++t)
      traj.push_back({rng.uniform(-4, 4), rng.uniform(-4, 4)});
    pred.push_back(traj);
    const double ade = min_ade(pred, gt);
    const double fde = min_fde(pred, gt);
    CHECK(ade <= prev_ade + 1e-15);
    CHECK(fde <= prev_fde + 1e-15);
    prev_ade = ade;
    prev_fde = fde;
  }
}

TEST_CASE("miss rate") {
  CHECK(miss_rate({0.5, 0.5, 0.5}, 1.0) == 0.0);
  CHECK(miss_rate({2.5, 3.0}, 2.0) == 1.0);
  const std::vector<double> fdes = {0.5, 1.5, 1.5, 3.0};
  CHECK(miss_rate(fdes, 1.0) == doctest::Approx(0.75));
  CHECK(miss_rate(fdes, 2.0) == doctest::Approx(0.25));
  CHECK_THROWS_AS(miss_rate({}, 1.0), UndefinedMetricError);
}

TEST_CASE("occupancy CE identities") {
  const GridSpec spec{8, 8, 4.0};
  OccupancyGrids gt(spec, 2, 3);
  Rng rng(43);
  for (double& v : gt.data) v = rng.uniform() < 0.3 ? 1.0 : 0.0;

  OccupancyGrids same = gt;
  CHECK(occupancy_ce(same, gt) <= 2 * 3 * 1e-6);

  OccupancyGrids half(spec, 2, 3);
  std::fill(half.data.begin(), half.data.end(), 0.5);
  CHECK(occupancy_ce(half, gt) == doctest::Approx(2 * 3 * std::log(2.0)).epsilon(1e-9));

  // random 4x4 case against a direct summation oracle
  const GridSpec small{4, 4, 2.0};
  OccupancyGrids p(small, 2, 2), o(small, 2, 2);
  for (double& v : p.data) v = rng.uniform(0.01, 0.99);
  for (double& v : o.data) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
  double direct = 0.0;
  for (size_t i = 0; i < p.data.size(); ++i)
    direct += -(o.data[i] * std::log(p.data[i]) +
                (1.0 - o.data[i]) * std::log(1.0 - p.data[i]));
  direct /= 16.0;
  CHECK(occupancy_ce(p, o) == doctest::Approx(direct).epsilon(1e-6));
}

TEST_CASE("occupancy AUC: perfect prediction gives 1.0") {
  Rng rng(44);
  std::vector<double> gt(64);
  for (double& v : gt) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
  gt[0] = 1.0;
  CHECK(occupancy_auc(gt.data(), gt.data(), 64) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("occupancy AUC: anti-predictor on a half-covered grid (oracle value)") {
  // pred = 1 - gt on a 50% grid: every threshold in (0,1] has zero recall at
  // zero precision and tau=0 hits (recall 1, precision 0.5); the trapezoid
  // over that curve is 0.25
  std::vector<double> gt(100), pred(100);
  for (int i = 0; i < 100; ++i) {
    gt[i] = i < 50 ? 1.0 : 0.0;
    pred[i] = 1.0 - gt[i];
  }
  const double expected = auc_oracle(pred, gt, 101);
  CHECK(expected == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(occupancy_auc(pred.data(), gt.data(), 100) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("occupancy AUC equals an independent oracle on random 8x8 grids") {
  Rng rng(45);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> pred(64), gt(64);
    for (double& v : pred) v = rng.uniform();
    bool any = false;
    for (double& v : gt) {
      v = rng.uniform() < 0.35 ? 1.0 : 0.0;
      any = any || v > 0.5;
    }
    if (!any) gt[0] = 1.0;
    const double got = occupancy_auc(pred.data(), gt.data(), 64);
    const double want = auc_oracle(pred, gt, 101);
    CHECK(std::abs(got - want) < 1e-9);
  }
}

TEST_CASE("occupancy AUC is stable under sub-threshold perturbations") {
  Rng rng(46);
  std::vector<double> pred(64), gt(64);
  for (double& v : pred) v = rng.uniform();
  for (double& v : gt) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
  gt[3] = 1.0;
  // keep every value at least eps away from any threshold
  const double spacing = 1.0 / 100.0;
  const double eps = 0.2 * spacing;
  for (double& v : pred) {
    const double nearest = std::round(v / spacing) * spacing;
    if (std::abs(v - nearest) < eps) v = nearest + (v < nearest ? -eps : eps);
    v = std::clamp(v, 0.0, 1.0 - eps);
  }
  const double base = occupancy_auc(pred.data(), gt.data(), 64);
  std::vector<double> nudged = pred;
  for (double& v : nudged) v += (rng.uniform() < 0.5 ? -1 : 1) * 0.4 * eps;
  CHECK(occupancy_auc(nudged.data(), gt.data(), 64) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("occupancy AUC rejects empty ground truth") {
  std::vector<double> pred(16, 0.5), gt(16, 0.0);
  CHECK_THROWS_AS(occupancy_auc(pred.data(), gt.data(), 16), UndefinedMetricError);
}

TEST_CASE("soft IoU identities and symmetry") {
  Rng rng(47);
  std::vector<double> a(32), b(32);
  for (double& v : a) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
  CHECK(soft_iou(a.data(), a.data(), 32) == doctest::Approx(1.0));

  for (size_t i = 0; i < 32; ++i) b[i] = a[i] > 0.5 ? 0.0 : 1.0;  // disjoint
  CHECK(soft_iou(a.data(), b.data(), 32) == doctest::Approx(0.0));

  // pred = 0.5 everywhere, gt covering half: 1/3
  std::vector<double> half(32, 0.5), cover(32, 0.0);
  for (int i = 0; i < 16; ++i) cover[i] = 1.0;
  CHECK(soft_iou(half.data(), cover.data(), 32) == doctest::Approx(1.0 / 3.0));

  // symmetry
  for (double& v : a) v = rng.uniform();
  for (double& v : b) v = rng.uniform();
  CHECK(soft_iou(a.data(), b.data(), 32) ==
        doctest::Approx(soft_iou(b.data(), a.data(), 32)).epsilon(1e-12));

  std::vector<double> zero(8, 0.0);
  CHECK_THROWS_AS(soft_iou(zero.data(), zero.data(), 8), UndefinedMetricError);
}

TEST_CASE("trajectory aggregation over classes") {
  std::vector<AgentTrajectorySample> samples;
  AgentTrajectorySample v;
  v.agent_class = AgentClass::vehicle;
  v.gt = line_traj({0, 0}, {1, 0}, 3);
  v.pred = {v.gt};  // perfect
  samples.push_back(v);
  AgentTrajectorySample p;
  p.agent_class = AgentClass::pedestrian;
  p.gt = line_traj({0, 0}, {0.5, 0}, 3);
  auto off = p.gt;
  for (Vec2& q : off) q += Vec2{3.0, 0.0};
  p.pred = {off};
  samples.push_back(p);

  const TrajectoryMetricsReport r = aggregate_trajectory_metrics(samples);
  CHECK(r.agent_count[0] == 1);
  CHECK(r.agent_count[1] == 1);
  CHECK(r.agent_count[2] == 2);
  CHECK(r.min_ade_k[0] == 0.0);
  CHECK(r.min_ade_k[1] == doctest::Approx(3.0));
  CHECK(r.min_ade_k[2] == doctest::Approx(1.5));
  CHECK(r.miss_rate_2m[2] == doctest::Approx(0.5));
}

TEST_CASE("metrics CSV layout") {
  write_metrics_csv("metrics_test.csv",
                    {{"train", "m_to", "min_ade_6", "all", "all", 0.25}});
  std::ifstream in("metrics_test.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "split,variant,metric,class,horizon,value");
  std::getline(in, line);
  CHECK(line == "train,m_to,min_ade_6,all,all,0.25");
  std::remove("metrics_test.csv");
}
