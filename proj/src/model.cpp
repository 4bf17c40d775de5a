#include "pillarcast/model.hpp"

#include <cmath>

namespace pillarcast {

void NetConfig::validate() const {
  if (t_in < 1) throw std::invalid_argument("net.t_in must be >= 1");
  if (horizon < 1) throw std::invalid_argument("net.horizon must be >= 1");
  if (!(fov > 0.0)) throw std::invalid_argument("net.fov must be positive");
  if (pillars_m < 1 || pillars_n < 1)
    throw std::invalid_argument("net.pillars must be at least 1x1");
  if (grid_w < 1 || grid_h < 1)
    throw std::invalid_argument("net.grid must be at least 1x1");
  if (point_grid_u < 1 || point_grid_v < 1)
    throw std::invalid_argument("net.point_grid must be at least 1x1");
  if (!(road_spacing > 0.0))
    throw std::invalid_argument("net.road_spacing must be positive");
  if (d_p < 1 || backbone_channels < 1 || d_s < 1 || occ_hidden < 1 ||
      traj_hidden < 1 || state_embed < 1)
    throw std::invalid_argument("net channel widths must be positive");
  if (backbone_blocks < 0)
    throw std::invalid_argument("net.backbone_blocks must be >= 0");
  if (n_anchors < 1) throw std::invalid_argument("net.n_anchors must be >= 1");
  if (patch_half < 0) throw std::invalid_argument("net.patch_half must be >= 0");
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::m_t: return "m_t";
    case Variant::m_o: return "m_o";
    case Variant::m_to: return "m_to";
  }
  return "m_to";
}

Variant variant_from_string(const std::string& s) {
  if (s == "m_t") return Variant::m_t;
  if (s == "m_o") return Variant::m_o;
  if (s == "m_to") return Variant::m_to;
  throw std::invalid_argument("unknown variant: " + s + " (want m_t|m_o|m_to)");
}

template <typename T>
void ModelParams<T>::build(const NetConfig& c, uint64_t init_seed) {
  cfg = c;
  cfg.validate();
  Rng rng(mix_seed(init_seed, 0x90de1));
  const int d_aug = cfg.layout().d_in + kPillarAugDims;
  const int cb = cfg.backbone_channels;
  const int patch = 2 * cfg.patch_half + 1;
  const int traj_in = cfg.d_s * patch * patch + cfg.state_embed;

  auto he = [&](nn::Tensor<T>& t, int fan_in) { nn::fill_he(t, rng, fan_in); };

  nn::Tensor<T>& ew = store.add("encoder.fc.w", nn::Shape::mat(d_aug, cfg.d_p));
  he(ew, d_aug);
  store.add("encoder.fc.b", nn::Shape::vec(cfg.d_p));
  nn::Tensor<T>& gamma = store.add("encoder.bn.gamma", nn::Shape::vec(cfg.d_p));
  std::fill(gamma.data.begin(), gamma.data.end(), T(1));
  store.add("encoder.bn.beta", nn::Shape::vec(cfg.d_p));
  store.add("encoder.bn.running_mean", nn::Shape::vec(cfg.d_p), false);
  nn::Tensor<T>& rv = store.add("encoder.bn.running_var", nn::Shape::vec(cfg.d_p), false);
  std::fill(rv.data.begin(), rv.data.end(), T(1));

  nn::Tensor<T>& biw = store.add("backbone.in.w", nn::Shape::conv_w(cb, cfg.d_p, 3, 3));
  he(biw, cfg.d_p * 9);
  store.add("backbone.in.b", nn::Shape::vec(cb));
  for (int i = 0; i < cfg.backbone_blocks; ++i) {
    const std::string p = "backbone.block" + std::to_string(i);
    nn::Tensor<T>& w1 = store.add(p + ".conv1.w", nn::Shape::conv_w(cb, cb, 3, 3));
    he(w1, cb * 9);
    store.add(p + ".conv1.b", nn::Shape::vec(cb));
    nn::Tensor<T>& w2 = store.add(p + ".conv2.w", nn::Shape::conv_w(cb, cb, 3, 3));
    he(w2, cb * 9);
    store.add(p + ".conv2.b", nn::Shape::vec(cb));
  }
  nn::Tensor<T>& fw = store.add("backbone.fuse.w", nn::Shape::conv_w(cfg.d_s, cb + 1, 1, 1));
  he(fw, cb + 1);
  store.add("backbone.fuse.b", nn::Shape::vec(cfg.d_s));

  nn::Tensor<T>& ow1 = store.add("occ.conv1.w", nn::Shape::conv_w(cfg.occ_hidden, cfg.d_s + 1, 3, 3));
  he(ow1, (cfg.d_s + 1) * 9);
  store.add("occ.conv1.b", nn::Shape::vec(cfg.occ_hidden));
  nn::Tensor<T>& ow2 = store.add("occ.conv2.w", nn::Shape::conv_w(cfg.n_classes(), cfg.occ_hidden, 1, 1));
  nn::fill_normal(ow2, rng, 0.01);
  store.add("occ.conv2.b", nn::Shape::vec(cfg.n_classes()));

  nn::Tensor<T>& sw = store.add("traj.state.w", nn::Shape::mat(cfg.state_dim(), cfg.state_embed));
  he(sw, cfg.state_dim());
  store.add("traj.state.b", nn::Shape::vec(cfg.state_embed));
  nn::Tensor<T>& tw1 = store.add("traj.hidden.w", nn::Shape::mat(traj_in, cfg.traj_hidden));
  he(tw1, traj_in);
  store.add("traj.hidden.b", nn::Shape::vec(cfg.traj_hidden));
  nn::Tensor<T>& tw2 = store.add("traj.out.w", nn::Shape::mat(cfg.traj_hidden, cfg.traj_out_dim()));
  nn::fill_normal(tw2, rng, 0.01);
  store.add("traj.out.b", nn::Shape::vec(cfg.traj_out_dim()));

  t_channels.assign(cfg.horizon, {});
  for (int t = 0; t < cfg.horizon; ++t)
    t_channels[t].assign(static_cast<size_t>(cfg.grid_w) * cfg.grid_h,
                         static_cast<T>(t + 1) / static_cast<T>(cfg.horizon));
  bind();
}

template <typename T>
void ModelParams<T>::bind() {
  enc_w = &store.at("encoder.fc.w");
  enc_b = &store.at("encoder.fc.b");
  enc_gamma = &store.at("encoder.bn.gamma");
  enc_beta = &store.at("encoder.bn.beta");
  enc_rm = &store.at("encoder.bn.running_mean");
  enc_rv = &store.at("encoder.bn.running_var");
  bb_in_w = &store.at("backbone.in.w");
  bb_in_b = &store.at("backbone.in.b");
  bb_w1.clear();
  bb_b1.clear();
  bb_w2.clear();
  bb_b2.clear();
  for (int i = 0; i < cfg.backbone_blocks; ++i) {
    const std::string p = "backbone.block" + std::to_string(i);
    bb_w1.push_back(&store.at(p + ".conv1.w"));
    bb_b1.push_back(&store.at(p + ".conv1.b"));
    bb_w2.push_back(&store.at(p + ".conv2.w"));
    bb_b2.push_back(&store.at(p + ".conv2.b"));
  }
  fuse_w = &store.at("backbone.fuse.w");
  fuse_b = &store.at("backbone.fuse.b");
  occ_w1 = &store.at("occ.conv1.w");
  occ_b1 = &store.at("occ.conv1.b");
  occ_w2 = &store.at("occ.conv2.w");
  occ_b2 = &store.at("occ.conv2.b");
  state_w = &store.at("traj.state.w");
  state_b = &store.at("traj.state.b");
  traj_w1 = &store.at("traj.hidden.w");
  traj_b1 = &store.at("traj.hidden.b");
  traj_w2 = &store.at("traj.out.w");
  traj_b2 = &store.at("traj.out.b");
}

template <typename T>
void copy_params(ModelParams<float>& src, ModelParams<T>& dst) {
  dst.store = nn::ParamStore<T>();
  dst.build(src.cfg, 0);
  for (size_t i = 0; i < src.store.size(); ++i) {
    const auto& se = src.store.entries()[i];
    auto& de = dst.store.entries()[i];
    for (size_t j = 0; j < se.tensor.data.size(); ++j)
      de.tensor.data[j] = static_cast<T>(se.tensor.data[j]);
  }
  dst.bind();
}

template <typename T>
AnchorBuffers<T> AnchorBuffers<T>::make(const ClassAnchors& anchors) {
  AnchorBuffers<T> out;
  out.x.resize(anchors.per_class.size());
  out.y.resize(anchors.per_class.size());
  for (size_t c = 0; c < anchors.per_class.size(); ++c) {
    const AnchorSet& a = anchors.per_class[c];
    out.k = a.k;
    out.horizon = a.horizon;
    out.x[c].resize(a.waypoints.size());
    out.y[c].resize(a.waypoints.size());
    for (size_t i = 0; i < a.waypoints.size(); ++i) {
      out.x[c][i] = static_cast<T>(a.waypoints[i].x);
      out.y[c][i] = static_cast<T>(a.waypoints[i].y);
    }
  }
  return out;
}

void agent_cell(const GridSpec& spec, const Vec2& pos, int& ix, int& iy) {
  if (!spec.cell_of(pos, ix, iy))
    throw OutOfFovError("agent position (" + std::to_string(pos.x) + ", " +
                        std::to_string(pos.y) + ") outside the FOV");
}

template <typename T>
SceneInputs<T> prepare_scene(const Scene& scene, const NetConfig& cfg,
                             const ClassAnchors* anchors) {
  SceneInputs<T> in;
  in.scene = &scene;

  const FeatureLayout layout = cfg.layout();
  const FeaturePointSet set = build_input(
      scene, layout, {cfg.point_grid_u, cfg.point_grid_v, cfg.road_spacing});
  in.grid = augment(
      assign_pillars(set, cfg.pillars_m, cfg.pillars_n, cfg.fov, cfg.pillar_cap));

  in.point_matrix = nn::Tensor<T>(
      nn::Shape::mat(static_cast<int>(in.grid.count()), in.grid.d()));
  for (size_t i = 0; i < in.grid.features.size(); ++i)
    in.point_matrix.data[i] = static_cast<T>(in.grid.features[i]);

  const GridSpec spec = cfg.grid_spec();
  const Grid boxes = render_current_boxes(scene, spec);
  in.current_boxes = nn::Tensor<T>(nn::Shape::chw(1, cfg.grid_h, cfg.grid_w));
  for (size_t i = 0; i < boxes.size(); ++i)
    in.current_boxes.data[i] = static_cast<T>(boxes[i]);

  in.gt_occ = render_gt_occupancy(scene, spec, cfg.horizon);
  in.gt_occ_by_t.assign(cfg.horizon, {});
  const size_t cells = in.gt_occ.cells_per_grid();
  for (int t = 0; t < cfg.horizon; ++t) {
    in.gt_occ_by_t[t].resize(static_cast<size_t>(cfg.n_classes()) * cells);
    for (int a = 0; a < cfg.n_classes(); ++a) {
      const double* g = in.gt_occ.grid(a, t);
      for (size_t i = 0; i < cells; ++i)
        in.gt_occ_by_t[t][static_cast<size_t>(a) * cells + i] =
            static_cast<T>(g[i]);
    }
  }

  for (size_t ai = 0; ai < scene.agents.size(); ++ai) {
    const AgentTrack& a = scene.agents[ai];
    typename SceneInputs<T>::AgentInput agent;
    agent.scene_index = static_cast<int>(ai);
    agent.agent_id = a.agent_id;
    agent.agent_class = a.agent_class;
    const AgentState& now = a.current();
    agent.traj_ok = now.valid && std::abs(now.center.x) <= cfg.fov &&
                    std::abs(now.center.y) <= cfg.fov;
    if (agent.traj_ok) agent_cell(spec, now.center, agent.cell_x, agent.cell_y);
    agent.state = nn::Tensor<T>(nn::Shape::mat(1, cfg.state_dim()));
    const double vals[10] = {now.center.x / cfg.fov,
                             now.center.y / cfg.fov,
                             std::cos(now.heading),
                             std::sin(now.heading),
                             now.extent_w * kExtentScale,
                             now.extent_l * kExtentScale,
                             now.velocity.x * kVelocityScale,
                             now.velocity.y * kVelocityScale,
                             now.acceleration.x * kAccelScale,
                             now.acceleration.y * kAccelScale};
    for (int j = 0; j < 10; ++j) agent.state.data[j] = static_cast<T>(vals[j]);
    agent.has_future = a.has_future();
    if (agent.has_future) {
      agent.gt_rel.reserve(a.future.size());
      for (const Vec2& p : a.future) agent.gt_rel.push_back(p - now.center);
      agent.gt_rel_x.resize(agent.gt_rel.size());
      agent.gt_rel_y.resize(agent.gt_rel.size());
      for (size_t t = 0; t < agent.gt_rel.size(); ++t) {
        agent.gt_rel_x[t] = static_cast<T>(agent.gt_rel[t].x);
        agent.gt_rel_y[t] = static_cast<T>(agent.gt_rel[t].y);
      }
      if (anchors)
        agent.anchor_index = assign_anchor(
            agent.gt_rel,
            anchors->per_class[static_cast<int>(a.agent_class)]);
    }
    in.agents.push_back(std::move(agent));
  }
  return in;
}

template <typename T>
nn::NodeId extract_agent_patch_on_tape(nn::Tape<T>& tape, nn::NodeId features,
                                       const GridSpec& spec, const Vec2& pos,
                                       int half) {
  int ix, iy;
  agent_cell(spec, pos, ix, iy);
  return tape.extract_patch(features, ix, iy, half);
}

template <typename T>
nn::NodeId encode_scene_points_on_tape(ForwardContext<T>& ctx,
                                       nn::NodeId point_matrix, const int* seg,
                                       int n_segments, bool training) {
  nn::Tape<T>& tape = ctx.tape;
  ModelParams<T>& p = ctx.params;
  nn::NodeId h = tape.linear(point_matrix, ctx.input(*p.enc_w),
                             ctx.input(*p.enc_b));
  h = tape.batchnorm(h, ctx.input(*p.enc_gamma), ctx.input(*p.enc_beta),
                     p.enc_rm->data.data(), p.enc_rv->data.data(), training);
  h = tape.relu(h);
  h = tape.segment_max(h, seg, n_segments);
  return tape.transpose2d(h);  // [d_p, n_segments]
}

template <typename T>
nn::NodeId backbone_on_tape(ForwardContext<T>& ctx, nn::NodeId pillar_map,
                            nn::NodeId boxes) {
  nn::Tape<T>& tape = ctx.tape;
  ModelParams<T>& params = ctx.params;
  const NetConfig& cfg = params.cfg;
  nn::NodeId x = tape.relu(tape.conv2d(pillar_map, ctx.input(*params.bb_in_w),
                                       ctx.input(*params.bb_in_b), 1, 1));
  for (int i = 0; i < cfg.backbone_blocks; ++i) {
    nn::NodeId h = tape.relu(tape.conv2d(x, ctx.input(*params.bb_w1[i]),
                                         ctx.input(*params.bb_b1[i]), 1, 1));
    h = tape.conv2d(h, ctx.input(*params.bb_w2[i]),
                    ctx.input(*params.bb_b2[i]), 1, 1);
    x = tape.relu(tape.add(h, x));
  }
  const nn::Shape& s = tape.shape(x);
  if (s[1] != cfg.grid_h || s[2] != cfg.grid_w)
    x = tape.resize_nearest(x, cfg.grid_h, cfg.grid_w);
  x = tape.concat_chan(x, boxes);
  return tape.relu(tape.conv2d(x, ctx.input(*params.fuse_w),
                               ctx.input(*params.fuse_b), 1, 0));
}

template <typename T>
nn::NodeId occupancy_head_on_tape(ForwardContext<T>& ctx, nn::NodeId features,
                                  int t) {
  nn::Tape<T>& tape = ctx.tape;
  ModelParams<T>& params = ctx.params;
  const NetConfig& cfg = params.cfg;
  const nn::NodeId tchan = tape.input_ref(
      params.t_channels[t].data(), nn::Shape::chw(1, cfg.grid_h, cfg.grid_w),
      false);
  nn::NodeId x = tape.concat_chan(features, tchan);
  x = tape.relu(tape.conv2d(x, ctx.input(*params.occ_w1),
                            ctx.input(*params.occ_b1), 1, 1));
  x = tape.conv2d(x, ctx.input(*params.occ_w2), ctx.input(*params.occ_b2), 1, 0);
  return tape.sigmoid(x);
}

template <typename T>
AgentHead trajectory_head_on_tape(
    ForwardContext<T>& ctx, nn::NodeId features,
    const typename SceneInputs<T>::AgentInput& agent) {
  nn::Tape<T>& tape = ctx.tape;
  ModelParams<T>& params = ctx.params;
  const NetConfig& cfg = params.cfg;
  const int patch = 2 * cfg.patch_half + 1;
  nn::NodeId p = tape.extract_patch(features, agent.cell_x, agent.cell_y,
                                    cfg.patch_half);
  p = tape.reshape(p, nn::Shape::mat(1, cfg.d_s * patch * patch));
  nn::NodeId s = tape.relu(tape.linear(tape.input(agent.state),
                                       ctx.input(*params.state_w),
                                       ctx.input(*params.state_b)));
  nn::NodeId h = tape.concat_vec(p, s);
  h = tape.relu(tape.linear(h, ctx.input(*params.traj_w1),
                            ctx.input(*params.traj_b1)));
  nn::NodeId out = tape.linear(h, ctx.input(*params.traj_w2),
                               ctx.input(*params.traj_b2));
  AgentHead head;
  const int k = cfg.n_anchors;
  head.logits = tape.slice_cols(out, 0, k);
  head.probs = tape.softmax(head.logits);
  nn::NodeId raw = tape.slice_cols(out, k, k + k * cfg.horizon * 5);
  head.raw = tape.reshape(raw, nn::Shape::mat(k, cfg.horizon * 5));
  return head;
}

template <typename T>
nn::NodeId occupancy_loss_on_tape(nn::Tape<T>& tape,
                                  const std::vector<nn::NodeId>& occ_probs,
                                  const std::vector<std::vector<T>>& targets_by_t,
                                  int w, int h) {
  if (occ_probs.size() != targets_by_t.size())
    throw nn::ShapeError("occupancy loss: timestep count mismatch");
  nn::NodeId acc = -1;
  for (size_t t = 0; t < occ_probs.size(); ++t) {
    if (tape.shape(occ_probs[t]).numel() !=
        static_cast<long>(targets_by_t[t].size()))
      throw nn::ShapeError("occupancy loss: target size mismatch at t=" +
                           std::to_string(t));
    const nn::NodeId b = tape.bce_sum(occ_probs[t], targets_by_t[t].data());
    acc = acc < 0 ? b : tape.add(acc, b);
  }
  return tape.scale_shift(acc, T(1) / static_cast<T>(static_cast<long>(w) * h));
}

template <typename T>
TrajectoryLossIds trajectory_loss_on_tape(
    nn::Tape<T>& tape, const AgentHead& head,
    const typename SceneInputs<T>::AgentInput& agent,
    const AnchorBuffers<T>& anchors, bool gaussian) {
  TrajectoryLossIds out;
  if (!agent.has_future || agent.anchor_index < 0) return out;
  const int cls = static_cast<int>(agent.agent_class);
  const int k_star = agent.anchor_index;
  const int horizon = anchors.horizon;

  out.l_s = tape.ce_logits(head.logits, k_star);

  nn::NodeId row = tape.take_row(head.raw, k_star);           // [1, T*5]
  nn::NodeId m5 = tape.reshape(row, nn::Shape::mat(horizon, 5));
  nn::NodeId dx = tape.slice_cols(m5, 0, 1);                  // [T,1]
  nn::NodeId dy = tape.slice_cols(m5, 1, 2);
  nn::NodeId diff_x = tape.sub_const(
      tape.add_const(dx, anchors.anchor_x(cls, k_star)), agent.gt_rel_x.data());
  nn::NodeId diff_y = tape.sub_const(
      tape.add_const(dy, anchors.anchor_y(cls, k_star)), agent.gt_rel_y.data());

  if (!gaussian) {
    nn::NodeId sq =
        tape.add(tape.mul(diff_x, diff_x), tape.mul(diff_y, diff_y));
    out.l_r = tape.scale_shift(tape.sum_all(sq), T(1) / static_cast<T>(horizon));
    return out;
  }

  nn::NodeId lsx = tape.slice_cols(m5, 2, 3);
  nn::NodeId lsy = tape.slice_cols(m5, 3, 4);
  nn::NodeId rho_raw = tape.slice_cols(m5, 4, 5);
  nn::NodeId zx = tape.mul(diff_x, tape.exp_fn(tape.scale_shift(lsx, T(-1))));
  nn::NodeId zy = tape.mul(diff_y, tape.exp_fn(tape.scale_shift(lsy, T(-1))));
  nn::NodeId rho = tape.tanh_fn(rho_raw);
  nn::NodeId coshr = tape.cosh_fn(rho_raw);
  nn::NodeId quad = tape.add(
      tape.add(tape.mul(zx, zx), tape.mul(zy, zy)),
      tape.scale_shift(tape.mul(tape.mul(zx, zy), rho), T(-2)));
  // -log pdf = log(2pi) + lsx + lsy - log cosh(r) + 0.5 cosh^2(r) quad
  nn::NodeId base = tape.sub(tape.add(lsx, lsy), tape.log_fn(coshr));
  nn::NodeId term =
      tape.scale_shift(tape.mul(tape.mul(coshr, coshr), quad), T(0.5));
  nn::NodeId nll = tape.scale_shift(tape.add(base, term), T(1),
                                    static_cast<T>(std::log(2.0 * M_PI)));
  out.l_r = tape.scale_shift(tape.sum_all(nll), T(1) / static_cast<T>(horizon));
  return out;
}

template <typename T>
nn::NodeId total_loss_on_tape(nn::Tape<T>& tape, nn::NodeId l_o, nn::NodeId l_s,
                              nn::NodeId l_r, nn::NodeId l_c,
                              const LossWeights& w) {
  nn::NodeId acc = -1;
  const nn::NodeId ids[4] = {l_o, l_s, l_r, l_c};
  const double lambdas[4] = {w.lambda_o, w.lambda_s, w.lambda_r, w.lambda_c};
  for (int i = 0; i < 4; ++i) {
    if (ids[i] < 0) continue;
    const nn::NodeId term = tape.scale_shift(ids[i], static_cast<T>(lambdas[i]));
    acc = acc < 0 ? term : tape.add(acc, term);
  }
  if (acc < 0) throw nn::ContractError("total loss: no components present");
  return acc;
}

template <typename T>
void forward_scene_on_tape(ForwardContext<T>& ctx, SceneInputs<T>& inputs,
                           bool training, bool want_traj, bool want_occ,
                           SceneForward& fwd) {
  nn::Tape<T>& tape = ctx.tape;
  const NetConfig& cfg = ctx.params.cfg;
  fwd.occ_probs.clear();
  fwd.agent_heads.clear();

  const nn::NodeId points = tape.input(inputs.point_matrix);
  nn::NodeId map = encode_scene_points_on_tape(
      ctx, points, inputs.grid.pillar.data(), cfg.pillars_m * cfg.pillars_n,
      training);
  map = tape.reshape(map, nn::Shape::chw(cfg.d_p, cfg.pillars_n, cfg.pillars_m));
  const nn::NodeId boxes = tape.input(inputs.current_boxes);
  fwd.features = backbone_on_tape(ctx, map, boxes);

  if (want_occ) {
    for (int t = 0; t < cfg.horizon; ++t)
      fwd.occ_probs.push_back(occupancy_head_on_tape(ctx, fwd.features, t));
  }
  if (want_traj) {
    fwd.agent_heads.resize(inputs.agents.size());
    for (size_t i = 0; i < inputs.agents.size(); ++i) {
      if (!inputs.agents[i].traj_ok) continue;
      fwd.agent_heads[i] =
          trajectory_head_on_tape(ctx, fwd.features, inputs.agents[i]);
    }
  }
}

ForecastNet::ForecastNet(const NetConfig& cfg, uint64_t init_seed) {
  params_.build(cfg, init_seed);
}

std::vector<AgentPrediction> ForecastNet::decode_predictions(
    const nn::Tape<float>& tape, const SceneInputs<float>& inputs,
    const SceneForward& fwd, const ClassAnchors& anchors) const {
  const NetConfig& cfg = params_.cfg;
  std::vector<AgentPrediction> preds;
  for (size_t i = 0; i < inputs.agents.size(); ++i) {
    const auto& agent = inputs.agents[i];
    if (!agent.traj_ok || i >= fwd.agent_heads.size() ||
        fwd.agent_heads[i].probs < 0)
      continue;
    const AgentHead& head = fwd.agent_heads[i];
    const float* probs = tape.value(head.probs);
    const float* raw = tape.value(head.raw);
    const AnchorSet& aset =
        anchors.per_class[static_cast<int>(agent.agent_class)];
    const Vec2 origin = inputs.scene->agents[agent.scene_index].current().center;

    AgentPrediction pred;
    pred.agent_id = agent.agent_id;
    pred.agent_class = agent.agent_class;
    pred.trajectories.resize(cfg.n_anchors);
    for (int k = 0; k < cfg.n_anchors; ++k) {
      TrajectoryHypothesis& hyp = pred.trajectories[k];
      hyp.probability = probs[k];
      hyp.waypoints.resize(cfg.horizon);
      const float* rk = raw + static_cast<size_t>(k) * cfg.horizon * 5;
      for (int t = 0; t < cfg.horizon; ++t) {
        WaypointGaussian& wp = hyp.waypoints[t];
        wp.mean = origin + aset.anchor(k)[t] +
                  Vec2{static_cast<double>(rk[t * 5 + 0]),
                       static_cast<double>(rk[t * 5 + 1])};
        wp.log_sigma_x = rk[t * 5 + 2];
        wp.log_sigma_y = rk[t * 5 + 3];
        wp.rho = std::tanh(static_cast<double>(rk[t * 5 + 4]));
      }
    }
    preds.push_back(std::move(pred));
  }
  return preds;
}

#define PILLARCAST_INSTANTIATE_MODEL(T)                                        \
  template struct ModelParams<T>;                                              \
  template struct AnchorBuffers<T>;                                            \
  template SceneInputs<T> prepare_scene<T>(const Scene&, const NetConfig&,     \
                                           const ClassAnchors*);               \
  template nn::NodeId extract_agent_patch_on_tape<T>(                          \
      nn::Tape<T>&, nn::NodeId, const GridSpec&, const Vec2&, int);            \
  template nn::NodeId encode_scene_points_on_tape<T>(                          \
      ForwardContext<T>&, nn::NodeId, const int*, int, bool);                  \
  template nn::NodeId backbone_on_tape<T>(ForwardContext<T>&, nn::NodeId,      \
                                          nn::NodeId);                         \
  template nn::NodeId occupancy_head_on_tape<T>(ForwardContext<T>&,            \
                                                nn::NodeId, int);              \
  template AgentHead trajectory_head_on_tape<T>(                               \
      ForwardContext<T>&, nn::NodeId,                                          \
      const typename SceneInputs<T>::AgentInput&);                             \
  template nn::NodeId occupancy_loss_on_tape<T>(                               \
      nn::Tape<T>&, const std::vector<nn::NodeId>&,                            \
      const std::vector<std::vector<T>>&, int, int);                           \
  template TrajectoryLossIds trajectory_loss_on_tape<T>(                       \
      nn::Tape<T>&, const AgentHead&,                                          \
      const typename SceneInputs<T>::AgentInput&, const AnchorBuffers<T>&,     \
      bool);                                                                   \
  template nn::NodeId total_loss_on_tape<T>(nn::Tape<T>&, nn::NodeId,          \
                                            nn::NodeId, nn::NodeId,            \
                                            nn::NodeId, const LossWeights&);   \
  template void forward_scene_on_tape<T>(ForwardContext<T>&, SceneInputs<T>&,  \
                                         bool, bool, bool, SceneForward&);

PILLARCAST_INSTANTIATE_MODEL(float)
PILLARCAST_INSTANTIATE_MODEL(double)

template void copy_params<double>(ModelParams<float>&, ModelParams<double>&);

}  // namespace pillarcast
