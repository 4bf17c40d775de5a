#pragma once

#include <string>
#include <vector>

#include "pillarcast/metrics.hpp"
#include "pillarcast/model.hpp"

namespace pillarcast {

struct TrainConfig {
  int steps{2000};
  int batch_size{8};
  double lr{4e-4};
  double grad_clip{0.1};
  uint64_t seed{1};
  Variant variant{Variant::m_to};
  LossWeights weights;
  std::string log_path;  // per-step CSV: step,L_o,L_s,L_r,L_c,total
};

struct StepLosses {
  double l_o{0}, l_s{0}, l_r{0}, l_c{0}, total{0};
};

/// Minibatch Adam over the variant's active losses. BatchNorm statistics are
/// taken over the flattened point set of the whole batch. Deterministic given
/// the seed (bit-exact at any OpenMP thread count).
std::vector<StepLosses> train_model(ForecastNet& net,
                                    const std::vector<Scene>& scenes,
                                    const ClassAnchors& anchors,
                                    const TrainConfig& cfg);

struct EvalOptions {
  int n_thresholds{101};
  std::string split{"eval"};
  std::string variant{"m_to"};
};

struct EvalResult {
  TrajectoryMetricsReport traj;  // mean of scene means
  double ce{0.0};
  double auc[kNumAgentClasses][3] = {};
  double iou[kNumAgentClasses][3] = {};
  bool auc_defined[kNumAgentClasses][3] = {};
  bool iou_defined[kNumAgentClasses][3] = {};
  std::vector<MetricRow> rows;
};

/// Runs the model (BatchNorm in inference mode) over every scene and
/// aggregates metrics as mean of scene means. Agents outside the FOV carry no
/// prediction and are excluded.
EvalResult evaluate_model(ForecastNet& net, const std::vector<Scene>& scenes,
                          const ClassAnchors& anchors, const EvalOptions& opt);

/// Predicted occupancy of one scene as dense grids (inference mode).
OccupancyGrids predict_occupancy(ForecastNet& net, SceneInputs<float>& inputs);

/// Mean consistency loss over scenes: cross-entropy between occupancy
/// predicted by occ_net and the rasterized top-1 trajectories of traj_net.
double mean_consistency(ForecastNet& traj_net, ForecastNet& occ_net,
                        const std::vector<Scene>& scenes,
                        const ClassAnchors& anchors);

}  // namespace pillarcast
