#include "pillarcast/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace pillarcast {

namespace {

void shuffle_order(std::vector<int>& order, uint64_t seed, int epoch) {
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  Rng rng(mix_seed(seed, 0xe90c + static_cast<uint64_t>(epoch)));
  for (size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.next_u64() % i]);
}

int horizon_index(const NetConfig& cfg, double seconds) {
  const double step = cfg.horizon_seconds / cfg.horizon;
  const int idx = static_cast<int>(std::lround(seconds / step)) - 1;
  return (idx >= 0 && idx < cfg.horizon) ? idx : -1;
}

}  // namespace

std::vector<StepLosses> train_model(ForecastNet& net,
                                    const std::vector<Scene>& scenes,
                                    const ClassAnchors& anchors,
                                    const TrainConfig& tcfg) {
  if (scenes.empty()) throw std::invalid_argument("train: empty dataset");
  const NetConfig& cfg = net.config();
  const bool want_occ = tcfg.variant != Variant::m_t;
  const bool want_traj = tcfg.variant != Variant::m_o;
  LossWeights w = tcfg.weights;
  if (tcfg.variant == Variant::m_t) w.lambda_o = w.lambda_c = 0.0;
  if (tcfg.variant == Variant::m_o) w.lambda_s = w.lambda_r = 0.0;

  std::vector<SceneInputs<float>> inputs;
  inputs.reserve(scenes.size());
  for (const Scene& s : scenes) inputs.push_back(prepare_scene<float>(s, cfg, &anchors));
  const AnchorBuffers<float> abuf = AnchorBuffers<float>::make(anchors);

  nn::Adam<float> adam(net.store(), {tcfg.lr, 0.9, 0.999, 1e-8});
  nn::Tape<float> tape;
  ForwardContext<float> ctx(tape, net.params());

  std::ofstream log;
  if (!tcfg.log_path.empty()) {
    log.open(tcfg.log_path, std::ios::binary);
    if (!log) throw std::runtime_error("cannot open training log: " + tcfg.log_path);
    log << "step,L_o,L_s,L_r,L_c,total\n";
  }

  const int n = static_cast<int>(scenes.size());
  const int b = tcfg.batch_size;
  const int mn = cfg.pillars_m * cfg.pillars_n;
  const int d_aug = cfg.layout().d_in + kPillarAugDims;
  std::vector<int> order(n);
  int cur_epoch = -1;

  std::vector<float> batch_points;
  std::vector<int> batch_seg;
  std::vector<int> batch_idx(b);
  // per (slot, t) rasterized consistency targets; must outlive backward
  std::vector<std::vector<std::vector<float>>> rendered(b);
  std::vector<std::vector<float>> grads(net.store().size());

  std::vector<StepLosses> history;
  history.reserve(tcfg.steps);

  for (int step = 0; step < tcfg.steps; ++step) {
    for (int j = 0; j < b; ++j) {
      const long flat = static_cast<long>(step) * b + j;
      const int epoch = static_cast<int>(flat / n);
      if (epoch != cur_epoch) {
        shuffle_order(order, tcfg.seed, epoch);
        cur_epoch = epoch;
      }
      batch_idx[j] = order[flat % n];
    }

    size_t total_rows = 0;
    for (int j = 0; j < b; ++j)
      total_rows += inputs[batch_idx[j]].grid.count();
    batch_points.resize(total_rows * d_aug);
    batch_seg.resize(total_rows);
    size_t row = 0;
    for (int j = 0; j < b; ++j) {
      const SceneInputs<float>& in = inputs[batch_idx[j]];
      std::copy(in.point_matrix.data.begin(), in.point_matrix.data.end(),
                batch_points.begin() + row * d_aug);
      for (size_t i = 0; i < in.grid.count(); ++i)
        batch_seg[row + i] = j * mn + in.grid.pillar[i];
      row += in.grid.count();
    }

    ctx.begin();
    const nn::NodeId points_node = tape.input_ref(
        batch_points.data(),
        nn::Shape::mat(static_cast<int>(total_rows), d_aug), false);
    const nn::NodeId enc = encode_scene_points_on_tape(
        ctx, points_node, batch_seg.data(), b * mn, /*training=*/true);

    nn::NodeId l_o_sum = -1, l_s_sum = -1, l_r_sum = -1, l_c_sum = -1;
    int traj_scene_count = 0;

    for (int j = 0; j < b; ++j) {
      SceneInputs<float>& in = inputs[batch_idx[j]];
      nn::NodeId map = tape.slice_cols(enc, j * mn, (j + 1) * mn);
      map = tape.reshape(map, nn::Shape::chw(cfg.d_p, cfg.pillars_n, cfg.pillars_m));
      const nn::NodeId boxes = tape.input(in.current_boxes);
      SceneForward fwd;
      fwd.features = backbone_on_tape(ctx, map, boxes);

      if (want_occ) {
        for (int t = 0; t < cfg.horizon; ++t)
          fwd.occ_probs.push_back(occupancy_head_on_tape(ctx, fwd.features, t));
        const nn::NodeId l_o = occupancy_loss_on_tape(
            tape, fwd.occ_probs, in.gt_occ_by_t, cfg.grid_w, cfg.grid_h);
        l_o_sum = l_o_sum < 0 ? l_o : tape.add(l_o_sum, l_o);
      }

      if (want_traj) {
        fwd.agent_heads.resize(in.agents.size());
        nn::NodeId s_acc = -1, r_acc = -1;
        int considered = 0;
        for (size_t ai = 0; ai < in.agents.size(); ++ai) {
          if (!in.agents[ai].traj_ok) continue;
          fwd.agent_heads[ai] = trajectory_head_on_tape(ctx, fwd.features, in.agents[ai]);
          ++considered;
          const TrajectoryLossIds tl = trajectory_loss_on_tape(
              tape, fwd.agent_heads[ai], in.agents[ai], abuf,
              cfg.gaussian_regression);
          if (tl.l_s >= 0) {
            s_acc = s_acc < 0 ? tl.l_s : tape.add(s_acc, tl.l_s);
            r_acc = r_acc < 0 ? tl.l_r : tape.add(r_acc, tl.l_r);
          }
        }
        if (s_acc >= 0) {
          // agents without gt contribute zero but count in the mean
          const float inv = 1.0f / static_cast<float>(considered);
          const nn::NodeId l_s = tape.scale_shift(s_acc, inv);
          const nn::NodeId l_r = tape.scale_shift(r_acc, inv);
          l_s_sum = l_s_sum < 0 ? l_s : tape.add(l_s_sum, l_s);
          l_r_sum = l_r_sum < 0 ? l_r : tape.add(l_r_sum, l_r);
          ++traj_scene_count;
        }

        if (want_occ && w.lambda_c > 0.0) {
          // consistency target: rasterized top-1 trajectories, detached
          const std::vector<AgentPrediction> preds =
              net.decode_predictions(tape, in, fwd, anchors);
          const OccupancyGrids rast = trajectories_to_occupancy(
              preds, *in.scene, cfg.grid_spec(), TrajectoryRenderMode::top1);
          auto& bufs = rendered[j];
          bufs.assign(cfg.horizon, {});
          const size_t cells = rast.cells_per_grid();
          for (int t = 0; t < cfg.horizon; ++t) {
            bufs[t].resize(static_cast<size_t>(cfg.n_classes()) * cells);
            for (int a = 0; a < cfg.n_classes(); ++a) {
              const double* g = rast.grid(a, t);
              for (size_t i = 0; i < cells; ++i)
                bufs[t][static_cast<size_t>(a) * cells + i] = static_cast<float>(g[i]);
            }
          }
          const nn::NodeId l_c = occupancy_loss_on_tape(
              tape, fwd.occ_probs, bufs, cfg.grid_w, cfg.grid_h);
          l_c_sum = l_c_sum < 0 ? l_c : tape.add(l_c_sum, l_c);
        }
      }
    }

    const float inv_b = 1.0f / static_cast<float>(b);
    nn::NodeId l_o = l_o_sum < 0 ? -1 : tape.scale_shift(l_o_sum, inv_b);
    nn::NodeId l_s = l_s_sum < 0 ? -1
                     : tape.scale_shift(l_s_sum, 1.0f / std::max(1, traj_scene_count));
    nn::NodeId l_r = l_r_sum < 0 ? -1
                     : tape.scale_shift(l_r_sum, 1.0f / std::max(1, traj_scene_count));
    nn::NodeId l_c = l_c_sum < 0 ? -1 : tape.scale_shift(l_c_sum, inv_b);
    const nn::NodeId total = total_loss_on_tape(tape, l_o, l_s, l_r, l_c, w);

    StepLosses losses;
    losses.l_o = l_o >= 0 ? tape.scalar_value(l_o) : 0.0;
    losses.l_s = l_s >= 0 ? tape.scalar_value(l_s) : 0.0;
    losses.l_r = l_r >= 0 ? tape.scalar_value(l_r) : 0.0;
    losses.l_c = l_c >= 0 ? tape.scalar_value(l_c) : 0.0;
    losses.total = tape.scalar_value(total);
    history.push_back(losses);

    tape.backward(total);
    for (size_t i = 0; i < net.store().size(); ++i) grads[i] = ctx.grad_of(i);
    nn::clip_grad_norm(grads, tcfg.grad_clip);
    adam.step(net.store(), grads);

    if (log.is_open()) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.9g,%.9g\n", step,
                    losses.l_o, losses.l_s, losses.l_r, losses.l_c, losses.total);
      log << buf;
    }
  }
  return history;
}

OccupancyGrids predict_occupancy(ForecastNet& net, SceneInputs<float>& inputs) {
  const NetConfig& cfg = net.config();
  nn::Tape<float> tape;
  ForwardContext<float> ctx(tape, net.params());
  ctx.begin();
  const SceneForward fwd = net.forward_scene(ctx, inputs, false, false, true);
  OccupancyGrids out(cfg.grid_spec(), cfg.n_classes(), cfg.horizon);
  const size_t cells = out.cells_per_grid();
  for (int t = 0; t < cfg.horizon; ++t) {
    const float* probs = tape.value(fwd.occ_probs[t]);
    for (int a = 0; a < cfg.n_classes(); ++a) {
      double* g = out.grid(a, t);
      for (size_t i = 0; i < cells; ++i)
        g[i] = static_cast<double>(probs[static_cast<size_t>(a) * cells + i]);
    }
  }
  return out;
}

EvalResult evaluate_model(ForecastNet& net, const std::vector<Scene>& scenes,
                          const ClassAnchors& anchors, const EvalOptions& opt) {
  const NetConfig& cfg = net.config();
  EvalResult result;
  const int t3 = horizon_index(cfg, 3.0);
  const int t6 = horizon_index(cfg, 6.0);

  nn::Tape<float> tape;
  ForwardContext<float> ctx(tape, net.params());

  // mean-of-scene-means accumulators
  double traj_sum[4][3] = {};  // metric x slot
  int traj_n[3] = {};
  double ce_sum = 0.0;
  int scene_count = 0;
  double auc_sum[kNumAgentClasses][3] = {};
  double iou_sum[kNumAgentClasses][3] = {};
  int auc_n[kNumAgentClasses][3] = {};
  int iou_n[kNumAgentClasses][3] = {};

  for (const Scene& scene : scenes) {
    SceneInputs<float> in = prepare_scene<float>(scene, cfg, &anchors);
    ctx.begin();
    const SceneForward fwd = net.forward_scene(ctx, in, false, true, true);
    const std::vector<AgentPrediction> preds =
        net.decode_predictions(tape, in, fwd, anchors);

    std::vector<AgentTrajectorySample> samples;
    for (const AgentPrediction& p : preds) {
      const AgentTrack* track = nullptr;
      for (const AgentTrack& a : scene.agents)
        if (a.agent_id == p.agent_id) track = &a;
      if (!track || !track->has_future()) continue;
      AgentTrajectorySample s;
      s.agent_class = p.agent_class;
      s.gt = track->future;
      for (const TrajectoryHypothesis& hyp : p.trajectories) {
        std::vector<Vec2> means;
        means.reserve(hyp.waypoints.size());
        for (const WaypointGaussian& wp : hyp.waypoints) means.push_back(wp.mean);
        s.pred.push_back(std::move(means));
      }
      samples.push_back(std::move(s));
    }
    if (!samples.empty()) {
      const TrajectoryMetricsReport r = aggregate_trajectory_metrics(samples);
      for (int slot = 0; slot < 3; ++slot) {
        if (r.agent_count[slot] == 0) continue;
        traj_sum[0][slot] += r.min_ade_k[slot];
        traj_sum[1][slot] += r.min_fde_k[slot];
        traj_sum[2][slot] += r.miss_rate_1m[slot];
        traj_sum[3][slot] += r.miss_rate_2m[slot];
        ++traj_n[slot];
        result.traj.agent_count[slot] += r.agent_count[slot];
      }
    }

    OccupancyGrids pred_occ(cfg.grid_spec(), cfg.n_classes(), cfg.horizon);
    const size_t cells = pred_occ.cells_per_grid();
    for (int t = 0; t < cfg.horizon; ++t) {
      const float* probs = tape.value(fwd.occ_probs[t]);
      for (int a = 0; a < cfg.n_classes(); ++a) {
        double* g = pred_occ.grid(a, t);
        for (size_t i = 0; i < cells; ++i)
          g[i] = static_cast<double>(probs[static_cast<size_t>(a) * cells + i]);
      }
    }
    const OccupancyMetricsReport occ =
        occupancy_metrics(pred_occ, in.gt_occ, t3, t6, opt.n_thresholds);
    ce_sum += occ.ce;
    ++scene_count;
    for (int a = 0; a < kNumAgentClasses; ++a)
      for (int slot = 0; slot < 3; ++slot) {
        if (occ.auc_defined[a][slot]) {
          auc_sum[a][slot] += occ.auc[a][slot];
          ++auc_n[a][slot];
        }
        if (occ.iou_defined[a][slot]) {
          iou_sum[a][slot] += occ.soft_iou[a][slot];
          ++iou_n[a][slot];
        }
      }
  }

  for (int slot = 0; slot < 3; ++slot) {
    if (traj_n[slot] == 0) continue;
    result.traj.min_ade_k[slot] = traj_sum[0][slot] / traj_n[slot];
    result.traj.min_fde_k[slot] = traj_sum[1][slot] / traj_n[slot];
    result.traj.miss_rate_1m[slot] = traj_sum[2][slot] / traj_n[slot];
    result.traj.miss_rate_2m[slot] = traj_sum[3][slot] / traj_n[slot];
  }
  result.ce = scene_count > 0 ? ce_sum / scene_count : 0.0;
  for (int a = 0; a < kNumAgentClasses; ++a)
    for (int slot = 0; slot < 3; ++slot) {
      if (auc_n[a][slot] > 0) {
        result.auc[a][slot] = auc_sum[a][slot] / auc_n[a][slot];
        result.auc_defined[a][slot] = true;
      }
      if (iou_n[a][slot] > 0) {
        result.iou[a][slot] = iou_sum[a][slot] / iou_n[a][slot];
        result.iou_defined[a][slot] = true;
      }
    }

  const std::string k_suffix = std::to_string(cfg.n_anchors);
  const char* class_names[3] = {"vehicle", "pedestrian", "all"};
  for (int slot = 0; slot < 3; ++slot) {
    if (traj_n[slot] == 0) continue;
    result.rows.push_back({opt.split, opt.variant, "min_ade_" + k_suffix,
                           class_names[slot], "all", result.traj.min_ade_k[slot]});
    result.rows.push_back({opt.split, opt.variant, "min_fde_" + k_suffix,
                           class_names[slot], "6s", result.traj.min_fde_k[slot]});
    result.rows.push_back({opt.split, opt.variant, "miss_rate_1m",
                           class_names[slot], "6s", result.traj.miss_rate_1m[slot]});
    result.rows.push_back({opt.split, opt.variant, "miss_rate_2m",
                           class_names[slot], "6s", result.traj.miss_rate_2m[slot]});
  }
  result.rows.push_back({opt.split, opt.variant, "ce", "all", "all", result.ce});
  const char* horizon_names[3] = {"3s", "6s", "all"};
  for (int a = 0; a < kNumAgentClasses; ++a)
    for (int slot = 0; slot < 3; ++slot) {
      const char* cls = to_string(static_cast<AgentClass>(a));
      if (result.auc_defined[a][slot])
        result.rows.push_back({opt.split, opt.variant, "auc", cls,
                               horizon_names[slot], result.auc[a][slot]});
      if (result.iou_defined[a][slot])
        result.rows.push_back({opt.split, opt.variant, "soft_iou", cls,
                               horizon_names[slot], result.iou[a][slot]});
    }
  return result;
}

double mean_consistency(ForecastNet& traj_net, ForecastNet& occ_net,
                        const std::vector<Scene>& scenes,
                        const ClassAnchors& anchors) {
  const NetConfig& cfg = traj_net.config();
  nn::Tape<float> tape;
  ForwardContext<float> ctx(tape, traj_net.params());
  double acc = 0.0;
  for (const Scene& scene : scenes) {
    SceneInputs<float> in = prepare_scene<float>(scene, cfg, &anchors);
    ctx.begin();
    const SceneForward fwd = traj_net.forward_scene(ctx, in, false, true, false);
    const std::vector<AgentPrediction> preds =
        traj_net.decode_predictions(tape, in, fwd, anchors);
    const OccupancyGrids rast = trajectories_to_occupancy(
        preds, scene, cfg.grid_spec(), TrajectoryRenderMode::top1);

    SceneInputs<float> in_occ = prepare_scene<float>(scene, occ_net.config(), nullptr);
    const OccupancyGrids pred_occ = predict_occupancy(occ_net, in_occ);
    acc += occupancy_ce(pred_occ, rast);
  }
  return scenes.empty() ? 0.0 : acc / static_cast<double>(scenes.size());
}

}  // namespace pillarcast
