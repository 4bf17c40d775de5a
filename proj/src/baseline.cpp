#include "pillarcast/baseline.hpp"

#include <cmath>

namespace pillarcast {

AgentCentricBaseline::AgentCentricBaseline(const NetConfig& cfg,
                                           uint64_t init_seed)
    : cfg_(cfg), layout_(cfg.layout()) {
  cfg_.validate();
  Rng rng(mix_seed(init_seed, 0xbace));
  const int d_in = layout_.d_in;

  // width/depth matched to the whole-scene per-point encoder for a fair
  // flop comparison
  nn::Tensor<float>& w = store_.add("base.fc.w", nn::Shape::mat(d_in, cfg_.d_p));
  nn::fill_he(w, rng, d_in);
  store_.add("base.fc.b", nn::Shape::vec(cfg_.d_p));
  nn::Tensor<float>& g = store_.add("base.bn.gamma", nn::Shape::vec(cfg_.d_p));
  std::fill(g.data.begin(), g.data.end(), 1.0f);
  store_.add("base.bn.beta", nn::Shape::vec(cfg_.d_p));
  store_.add("base.bn.running_mean", nn::Shape::vec(cfg_.d_p), false);
  nn::Tensor<float>& rv = store_.add("base.bn.running_var", nn::Shape::vec(cfg_.d_p), false);
  std::fill(rv.data.begin(), rv.data.end(), 1.0f);

  nn::Tensor<float>& sw = store_.add("base.state.w", nn::Shape::mat(cfg_.state_dim(), cfg_.state_embed));
  nn::fill_he(sw, rng, cfg_.state_dim());
  store_.add("base.state.b", nn::Shape::vec(cfg_.state_embed));

  const int head_in = cfg_.d_p + cfg_.state_embed;
  nn::Tensor<float>& hw1 = store_.add("base.head.w1", nn::Shape::mat(head_in, cfg_.traj_hidden));
  nn::fill_he(hw1, rng, head_in);
  store_.add("base.head.b1", nn::Shape::vec(cfg_.traj_hidden));
  nn::Tensor<float>& hw2 = store_.add("base.head.w2", nn::Shape::mat(cfg_.traj_hidden, cfg_.traj_out_dim()));
  nn::fill_normal(hw2, rng, 0.01);
  store_.add("base.head.b2", nn::Shape::vec(cfg_.traj_out_dim()));

  fc_w_ = &store_.at("base.fc.w");
  fc_b_ = &store_.at("base.fc.b");
  gamma_ = &store_.at("base.bn.gamma");
  beta_ = &store_.at("base.bn.beta");
  rm_ = &store_.at("base.bn.running_mean");
  rv_ = &store_.at("base.bn.running_var");
  state_w_ = &store_.at("base.state.w");
  state_b_ = &store_.at("base.state.b");
  head_w1_ = &store_.at("base.head.w1");
  head_b1_ = &store_.at("base.head.b1");
  head_w2_ = &store_.at("base.head.w2");
  head_b2_ = &store_.at("base.head.b2");
}

nn::NodeId AgentCentricBaseline::encode_on_tape(nn::Tape<float>& tape,
                                                const Scene& scene,
                                                const FeaturePointSet& points,
                                                int64_t agent_id) {
  const AgentTrack* agent = nullptr;
  for (const AgentTrack& a : scene.agents)
    if (a.agent_id == agent_id) agent = &a;
  if (!agent) throw std::invalid_argument("baseline: unknown agent_id");
  if (agent->past.empty() || !agent->current().valid)
    throw std::invalid_argument("baseline: agent has no valid t=0 state");
  ++invocations_;

  const AgentState& now = agent->current();
  const double c = std::cos(-now.heading), s = std::sin(-now.heading);
  const int d_in = layout_.d_in;
  const size_t count = points.points.size();

  // re-express every point in the agent frame; this per-agent transform is
  // the cost the benchmark measures
  scratch_.features.resize(count * d_in);
  scratch_.seg.assign(count, 0);
  const double inv_fov = 1.0 / points.fov;
  for (size_t i = 0; i < count; ++i) {
    const FeaturePoint& p = points.points[i];
    float* out = scratch_.features.data() + i * d_in;
    for (int j = 0; j < d_in; ++j) out[j] = static_cast<float>(p.features[j]);
    const double px = p.position.x - now.center.x;
    const double py = p.position.y - now.center.y;
    out[layout_.pos] = static_cast<float>((c * px - s * py) * inv_fov);
    out[layout_.pos + 1] = static_cast<float>((s * px + c * py) * inv_fov);
    // rotate heading (cos,sin), velocity and acceleration pairs by -heading
    for (int off : {layout_.heading, layout_.velocity, layout_.accel}) {
      const double ux = p.features[off], uy = p.features[off + 1];
      out[off] = static_cast<float>(c * ux - s * uy);
      out[off + 1] = static_cast<float>(s * ux + c * uy);
    }
  }

  const nn::NodeId pts = tape.input_ref(
      scratch_.features.data(), nn::Shape::mat(static_cast<int>(count), d_in),
      false);
  nn::NodeId h = tape.linear(pts, tape.input(*fc_w_), tape.input(*fc_b_));
  h = tape.batchnorm(h, tape.input(*gamma_), tape.input(*beta_),
                     rm_->data.data(), rv_->data.data(), /*training=*/false);
  h = tape.relu(h);
  h = tape.segment_max(h, scratch_.seg.data(), 1);  // [1, d_p] global max

  // agent's own state in its frame: position zero, heading (1,0), speeds
  // rotated into the frame
  nn::Tensor<float> state(nn::Shape::mat(1, cfg_.state_dim()));
  const double vals[10] = {0.0,
                           0.0,
                           1.0,
                           0.0,
                           now.extent_w * kExtentScale,
                           now.extent_l * kExtentScale,
                           (c * now.velocity.x - s * now.velocity.y) * kVelocityScale,
                           (s * now.velocity.x + c * now.velocity.y) * kVelocityScale,
                           (c * now.acceleration.x - s * now.acceleration.y) * kAccelScale,
                           (s * now.acceleration.x + c * now.acceleration.y) * kAccelScale};
  for (int j = 0; j < 10; ++j) state.data[j] = static_cast<float>(vals[j]);
  state_scratch_ = std::move(state);
  const nn::NodeId st = tape.relu(tape.linear(tape.input(state_scratch_),
                                              tape.input(*state_w_),
                                              tape.input(*state_b_)));
  return tape.concat_vec(h, st);  // [1, d_p + state_embed]
}

nn::Tensor<float> AgentCentricBaseline::encode_agent_centric(
    const Scene& scene, const FeaturePointSet& points, int64_t agent_id) {
  tape_.rewind();
  const nn::NodeId emb = encode_on_tape(tape_, scene, points, agent_id);
  nn::Tensor<float> out(tape_.shape(emb));
  const float* v = tape_.value(emb);
  std::copy(v, v + out.shape.numel(), out.data.begin());
  return out;
}

void AgentCentricBaseline::forward_latency_pass(const Scene& scene,
                                                const FeaturePointSet& points) {
  for (const AgentTrack& agent : scene.agents) {
    if (agent.past.empty() || !agent.current().valid) continue;
    tape_.rewind();
    const nn::NodeId emb = encode_on_tape(tape_, scene, points, agent.agent_id);
    nn::NodeId h = tape_.relu(tape_.linear(emb, tape_.input(*head_w1_),
                                           tape_.input(*head_b1_)));
    const nn::NodeId out = tape_.linear(h, tape_.input(*head_w2_),
                                        tape_.input(*head_b2_));
    tape_.softmax(tape_.slice_cols(out, 0, cfg_.n_anchors));
  }
}

std::vector<AgentPrediction> AgentCentricBaseline::predict(
    const Scene& scene, const FeaturePointSet& points,
    const ClassAnchors& anchors) {
  std::vector<AgentPrediction> preds;
  nn::Tape<float>& tape = tape_;
  for (const AgentTrack& agent : scene.agents) {
    if (agent.past.empty() || !agent.current().valid) continue;
    tape.rewind();
    const nn::NodeId emb = encode_on_tape(tape, scene, points, agent.agent_id);
    nn::NodeId h = tape.relu(tape.linear(emb, tape.input(*head_w1_),
                                         tape.input(*head_b1_)));
    const nn::NodeId out = tape.linear(h, tape.input(*head_w2_),
                                       tape.input(*head_b2_));
    const nn::NodeId logits = tape.slice_cols(out, 0, cfg_.n_anchors);
    const nn::NodeId probs = tape.softmax(logits);

    const float* pv = tape.value(probs);
    const float* raw = tape.value(out);
    const AnchorSet& aset = anchors.per_class[static_cast<int>(agent.agent_class)];
    const Vec2 origin = agent.current().center;

    AgentPrediction pred;
    pred.agent_id = agent.agent_id;
    pred.agent_class = agent.agent_class;
    pred.trajectories.resize(cfg_.n_anchors);
    for (int k = 0; k < cfg_.n_anchors; ++k) {
      TrajectoryHypothesis& hyp = pred.trajectories[k];
      hyp.probability = pv[k];
      hyp.waypoints.resize(cfg_.horizon);
      const float* rk = raw + cfg_.n_anchors + static_cast<size_t>(k) * cfg_.horizon * 5;
      for (int t = 0; t < cfg_.horizon; ++t) {
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

}  // namespace pillarcast
