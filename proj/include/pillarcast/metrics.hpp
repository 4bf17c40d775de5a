#pragma once

#include <string>
#include <vector>

#include "pillarcast/raster.hpp"

namespace pillarcast {

struct UndefinedMetricError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// min over k of the mean waypoint displacement.
double min_ade(const std::vector<std::vector<Vec2>>& pred,
               const std::vector<Vec2>& gt);

/// min over k of the final-waypoint displacement.
double min_fde(const std::vector<std::vector<Vec2>>& pred,
               const std::vector<Vec2>& gt);

/// Fraction of agents whose best final waypoint misses gt by more than
/// radius. Throws UndefinedMetricError on an empty agent set.
double miss_rate(const std::vector<double>& per_agent_min_fde, double radius);

/// Eq.-style mean cross-entropy: (1/(W*H)) * sum over classes, timesteps and
/// cells of the binary cross-entropy, predictions clamped to
/// [1e-7, 1 - 1e-7]. Identical computation to the occupancy loss.
double occupancy_ce(const OccupancyGrids& pred, const OccupancyGrids& gt);
double binary_cross_entropy_sum(const double* pred, const double* gt, size_t n,
                                double clamp = 1e-7);

/// Area under the precision/recall curve over n_thresholds linearly spaced
/// thresholds in [0,1] (prediction positive when >= threshold). Precision is
/// 1 when nothing is predicted positive; the point (recall 0, precision of
/// the strictest threshold) is included; trapezoid over recall-sorted points.
/// Throws UndefinedMetricError when gt has no positive cell.
double occupancy_auc(const double* pred, const double* gt, size_t n,
                     int n_thresholds = 101);

/// sum(pred*gt) / (sum(pred) + sum(gt) - sum(pred*gt)).
/// Throws UndefinedMetricError when both grids are all-zero.
double soft_iou(const double* pred, const double* gt, size_t n);

struct TrajectoryMetricsReport {
  // index 0/1 = per class, 2 = overall
  double min_ade_k[3] = {0, 0, 0};
  double min_fde_k[3] = {0, 0, 0};
  double miss_rate_1m[3] = {0, 0, 0};
  double miss_rate_2m[3] = {0, 0, 0};
  int agent_count[3] = {0, 0, 0};
};

struct OccupancyMetricsReport {
  double ce{0.0};
  // [class][horizon slot]: 0 = 3s, 1 = 6s, 2 = mean over all t
  double auc[kNumAgentClasses][3] = {};
  double soft_iou[kNumAgentClasses][3] = {};
  bool auc_defined[kNumAgentClasses][3] = {};
  bool iou_defined[kNumAgentClasses][3] = {};
};

/// Per-agent inputs for aggregation.
struct AgentTrajectorySample {
  AgentClass agent_class{AgentClass::vehicle};
  std::vector<std::vector<Vec2>> pred;  // K x T means
  std::vector<Vec2> gt;                 // T
};

/// Unweighted mean over agents (per class and overall).
TrajectoryMetricsReport aggregate_trajectory_metrics(
    const std::vector<AgentTrajectorySample>& samples);

/// Single-scene occupancy metrics; timestep_3s/6s are grid indices. Undefined
/// cells (empty gt) are flagged rather than zero-filled.
OccupancyMetricsReport occupancy_metrics(const OccupancyGrids& pred,
                                         const OccupancyGrids& gt,
                                         int timestep_3s, int timestep_6s,
                                         int n_thresholds = 101);

struct MetricRow {
  std::string split, variant, metric, agent_class, horizon;
  double value{0.0};
};

/// CSV with header split,variant,metric,class,horizon,value.
void write_metrics_csv(const std::string& path,
                       const std::vector<MetricRow>& rows);

}  // namespace pillarcast
