#include "pillarcast/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace pillarcast {

double min_ade(const std::vector<std::vector<Vec2>>& pred,
               const std::vector<Vec2>& gt) {
  if (pred.empty()) throw UndefinedMetricError("min_ade: no candidates");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& traj : pred) {
    if (traj.size() != gt.size())
      throw std::invalid_argument("min_ade: length mismatch");
    double acc = 0.0;
    for (size_t t = 0; t < gt.size(); ++t) acc += distance(traj[t], gt[t]);
    best = std::min(best, acc / static_cast<double>(gt.size()));
  }
  return best;
}

double min_fde(const std::vector<std::vector<Vec2>>& pred,
               const std::vector<Vec2>& gt) {
  if (pred.empty()) throw UndefinedMetricError("min_fde: no candidates");
  double best = std::numeric_limits<double>::infinity();
  for (const auto& traj : pred) {
    if (traj.size() != gt.size())
      throw std::invalid_argument("min_fde: length mismatch");
    best = std::min(best, distance(traj.back(), gt.back()));
  }
  return best;
}

double miss_rate(const std::vector<double>& per_agent_min_fde, double radius) {
  if (per_agent_min_fde.empty())
    throw UndefinedMetricError("miss_rate: no agents with ground truth");
  int misses = 0;
  for (double fde : per_agent_min_fde)
    if (fde > radius) ++misses;
  return static_cast<double>(misses) /
         static_cast<double>(per_agent_min_fde.size());
}

double binary_cross_entropy_sum(const double* pred, const double* gt, size_t n,
                                double clamp) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double p = std::min(std::max(pred[i], clamp), 1.0 - clamp);
    acc += -(gt[i] * std::log(p) + (1.0 - gt[i]) * std::log(1.0 - p));
  }
  return acc;
}

double occupancy_ce(const OccupancyGrids& pred, const OccupancyGrids& gt) {
  if (pred.n_classes != gt.n_classes || pred.horizon != gt.horizon ||
      pred.spec.w != gt.spec.w || pred.spec.h != gt.spec.h)
    throw std::invalid_argument("occupancy_ce: shape mismatch");
  const double total =
      binary_cross_entropy_sum(pred.data.data(), gt.data.data(),
                               pred.data.size());
  return total / (static_cast<double>(pred.spec.w) * pred.spec.h);
}

double occupancy_auc(const double* pred, const double* gt, size_t n,
                     int n_thresholds) {
  size_t positives = 0;
  for (size_t i = 0; i < n; ++i)
    if (gt[i] > 0.5) ++positives;
  if (positives == 0)
    throw UndefinedMetricError("occupancy_auc: ground truth has no positives");

  // thresholds from strictest to loosest -> recall is non-decreasing
  std::vector<double> recalls, precisions;
  recalls.reserve(n_thresholds + 1);
  precisions.reserve(n_thresholds + 1);
  for (int k = n_thresholds - 1; k >= 0; --k) {
    const double tau =
        n_thresholds == 1 ? 0.0 : static_cast<double>(k) / (n_thresholds - 1);
    size_t tp = 0, fp = 0;
    for (size_t i = 0; i < n; ++i) {
      if (pred[i] >= tau) {
        if (gt[i] > 0.5) ++tp;
        else ++fp;
      }
    }
    const double precision =
        (tp + fp) == 0 ? 1.0 : static_cast<double>(tp) / (tp + fp);
    const double recall = static_cast<double>(tp) / positives;
    recalls.push_back(recall);
    precisions.push_back(precision);
  }

  double auc = 0.0;
  double prev_r = 0.0, prev_p = precisions.front();  // strictest endpoint
  for (size_t i = 0; i < recalls.size(); ++i) {
    auc += (recalls[i] - prev_r) * 0.5 * (precisions[i] + prev_p);
    prev_r = recalls[i];
    prev_p = precisions[i];
  }
  return auc;
}

double soft_iou(const double* pred, const double* gt, size_t n) {
  double inter = 0.0, sum_p = 0.0, sum_g = 0.0;
  for (size_t i = 0; i < n; ++i) {
    inter += pred[i] * gt[i];
    sum_p += pred[i];
    sum_g += gt[i];
  }
  if (sum_p + sum_g == 0.0)
    throw UndefinedMetricError("soft_iou: both grids are all-zero");
  return inter / (sum_p + sum_g - inter);
}

TrajectoryMetricsReport aggregate_trajectory_metrics(
    const std::vector<AgentTrajectorySample>& samples) {
  TrajectoryMetricsReport report;
  double ade_sum[3] = {0, 0, 0};
  double fde_sum[3] = {0, 0, 0};
  std::vector<double> fdes[3];
  for (const AgentTrajectorySample& s : samples) {
    const double ade = min_ade(s.pred, s.gt);
    const double fde = min_fde(s.pred, s.gt);
    const int cls = static_cast<int>(s.agent_class);
    for (int slot : {cls, 2}) {
      ade_sum[slot] += ade;
      fde_sum[slot] += fde;
      fdes[slot].push_back(fde);
      ++report.agent_count[slot];
    }
  }
  for (int slot = 0; slot < 3; ++slot) {
    if (report.agent_count[slot] == 0) continue;
    report.min_ade_k[slot] = ade_sum[slot] / report.agent_count[slot];
    report.min_fde_k[slot] = fde_sum[slot] / report.agent_count[slot];
    report.miss_rate_1m[slot] = miss_rate(fdes[slot], 1.0);
    report.miss_rate_2m[slot] = miss_rate(fdes[slot], 2.0);
  }
  return report;
}

OccupancyMetricsReport occupancy_metrics(const OccupancyGrids& pred,
                                         const OccupancyGrids& gt,
                                         int timestep_3s, int timestep_6s,
                                         int n_thresholds) {
  OccupancyMetricsReport report;
  report.ce = occupancy_ce(pred, gt);
  const size_t cells = pred.cells_per_grid();
  for (int a = 0; a < pred.n_classes; ++a) {
    const int slots_t[2] = {timestep_3s, timestep_6s};
    for (int slot = 0; slot < 2; ++slot) {
      const int t = slots_t[slot];
      if (t < 0 || t >= pred.horizon) continue;
      try {
        report.auc[a][slot] =
            occupancy_auc(pred.grid(a, t), gt.grid(a, t), cells, n_thresholds);
        report.auc_defined[a][slot] = true;
      } catch (const UndefinedMetricError&) {
      }
      try {
        report.soft_iou[a][slot] =
            soft_iou(pred.grid(a, t), gt.grid(a, t), cells);
        report.iou_defined[a][slot] = true;
      } catch (const UndefinedMetricError&) {
      }
    }
    // mean over all timesteps with defined values
    double auc_acc = 0.0, iou_acc = 0.0;
    int auc_n = 0, iou_n = 0;
    for (int t = 0; t < pred.horizon; ++t) {
      try {
        auc_acc += occupancy_auc(pred.grid(a, t), gt.grid(a, t), cells,
                                 n_thresholds);
        ++auc_n;
      } catch (const UndefinedMetricError&) {
      }
      try {
        iou_acc += soft_iou(pred.grid(a, t), gt.grid(a, t), cells);
        ++iou_n;
      } catch (const UndefinedMetricError&) {
      }
    }
    if (auc_n > 0) {
      report.auc[a][2] = auc_acc / auc_n;
      report.auc_defined[a][2] = true;
    }
    if (iou_n > 0) {
      report.soft_iou[a][2] = iou_acc / iou_n;
      report.iou_defined[a][2] = true;
    }
  }
  return report;
}

void write_metrics_csv(const std::string& path,
                       const std::vector<MetricRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << "split,variant,metric,class,horizon,value\n";
  char buf[64];
  for (const MetricRow& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.9g", r.value);
    out << r.split << ',' << r.variant << ',' << r.metric << ','
        << r.agent_class << ',' << r.horizon << ',' << buf << '\n';
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace pillarcast
