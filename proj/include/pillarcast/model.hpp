#pragma once

#include <string>
#include <vector>

#include "pillarcast/anchors.hpp"
#include "pillarcast/pillars.hpp"
#include "pillarcast/prediction.hpp"
#include "pillarcast/raster.hpp"
#include "pillarcast/sparse_input.hpp"

namespace pillarcast {

struct OutOfFovError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Network dimensions and scene layout. Defaults are the desk-scale
/// configuration (80x80 pillars, 128x128 output grids over a 160 m FOV).
struct NetConfig {
  int t_in{10};
  double dt_in{0.1};
  int horizon{10};            // T
  double horizon_seconds{6.0};
  double fov{80.0};

  int pillars_m{80}, pillars_n{80};
  int grid_w{128}, grid_h{128};
  int point_grid_u{8}, point_grid_v{8};  // 8x8 interior samples per box
  double road_spacing{1.0};
  int pillar_cap{64};

  int d_p{64};                // per-point encoder width
  int backbone_channels{64};
  int backbone_blocks{4};
  int d_s{32};                // scene feature channels
  int occ_hidden{48};
  int traj_hidden{64};
  int state_embed{16};
  int n_anchors{6};           // K
  int patch_half{5};          // 11x11 patches
  bool gaussian_regression{false};

  int n_classes() const { return kNumAgentClasses; }
  int state_dim() const { return 10; }
  int traj_out_dim() const { return n_anchors * (1 + horizon * 5); }
  GridSpec grid_spec() const { return {grid_w, grid_h, fov}; }
  FeatureLayout layout() const { return FeatureLayout::make(t_in); }

  void validate() const;  // throws std::invalid_argument
};

struct LossWeights {
  double lambda_o{100.0};
  double lambda_s{1.0};
  double lambda_r{0.16};
  double lambda_c{10.0};
};

enum class Variant { m_t, m_o, m_to };
const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

/// Typed parameter handles; templated so gradient checks can run the whole
/// model in double precision.
template <typename T>
struct ModelParams {
  NetConfig cfg;
  nn::ParamStore<T> store;

  nn::Tensor<T>*enc_w{}, *enc_b{}, *enc_gamma{}, *enc_beta{};
  nn::Tensor<T>*enc_rm{}, *enc_rv{};
  nn::Tensor<T>*bb_in_w{}, *bb_in_b{};
  std::vector<nn::Tensor<T>*> bb_w1, bb_b1, bb_w2, bb_b2;
  nn::Tensor<T>*fuse_w{}, *fuse_b{};
  nn::Tensor<T>*occ_w1{}, *occ_b1{}, *occ_w2{}, *occ_b2{};
  nn::Tensor<T>*state_w{}, *state_b{};
  nn::Tensor<T>*traj_w1{}, *traj_b1{}, *traj_w2{}, *traj_b2{};

  std::vector<std::vector<T>> t_channels;  // per t: constant (t+1)/horizon

  void build(const NetConfig& cfg, uint64_t init_seed);
  void bind();

  PointEncoderParams<T> encoder_params() {
    return {enc_w, enc_b, enc_gamma, enc_beta, enc_rm->data.data(),
            enc_rv->data.data()};
  }
};

/// One forward pass worth of tape state. Registers each parameter tensor on
/// the tape exactly once (so gradients of a multi-scene batch accumulate into
/// a single leaf) and reuses its slot vector across begin() calls.
template <typename T>
struct ForwardContext {
  nn::Tape<T>& tape;
  ModelParams<T>& params;
  std::vector<nn::NodeId> param_ids;

  ForwardContext(nn::Tape<T>& t, ModelParams<T>& p) : tape(t), params(p) {}

  /// Rewinds the tape and clears parameter registrations.
  void begin() {
    tape.rewind();
    param_ids.assign(params.store.size(), -1);
  }

  nn::NodeId input(nn::Tensor<T>& t) {
    if (t.store_index < 0) return tape.input(t);
    nn::NodeId& slot = param_ids[t.store_index];
    if (slot < 0) slot = tape.input(t);
    return slot;
  }

  /// Gradient buffer of a parameter after backward (empty if unreached).
  const std::vector<T>& grad_of(int store_index) const {
    static const std::vector<T> empty;
    const nn::NodeId id = param_ids[store_index];
    return id < 0 ? empty : tape.grad(id);
  }
};

/// Anchor constants in the tape's scalar type; [class][k*horizon].
template <typename T>
struct AnchorBuffers {
  int k{0}, horizon{0};
  std::vector<std::vector<T>> x, y;

  static AnchorBuffers make(const ClassAnchors& anchors);
  const T* anchor_x(int cls, int idx) const {
    return x[cls].data() + static_cast<size_t>(idx) * horizon;
  }
  const T* anchor_y(int cls, int idx) const {
    return y[cls].data() + static_cast<size_t>(idx) * horizon;
  }
};

/// Per-scene constants cached across training steps.
template <typename T>
struct SceneInputs {
  PillarGrid grid;                 // augmented, deterministic order
  nn::Tensor<T> point_matrix;      // [P, d_aug]
  nn::Tensor<T> current_boxes;     // [1, h, w]
  OccupancyGrids gt_occ;           // double, [class][t][iy][ix]
  std::vector<std::vector<T>> gt_occ_by_t;  // per t: [class][iy][ix]

  struct AgentInput {
    int scene_index{0};
    int64_t agent_id{0};
    AgentClass agent_class{AgentClass::vehicle};
    bool traj_ok{false};           // valid t=0 state inside the FOV
    int cell_x{0}, cell_y{0};
    nn::Tensor<T> state;           // [1, state_dim]
    bool has_future{false};
    std::vector<Vec2> gt_rel;      // future relative to t=0 center
    std::vector<T> gt_rel_x, gt_rel_y;
    int anchor_index{-1};
  };
  std::vector<AgentInput> agents;
  const Scene* scene{nullptr};
};

/// Builds all cached inputs for one scene; anchors may be null when only the
/// occupancy path is needed (anchor assignments stay -1).
template <typename T>
SceneInputs<T> prepare_scene(const Scene& scene, const NetConfig& cfg,
                             const ClassAnchors* anchors);

/// Feature-map cell of a position under the grid's half-open convention;
/// throws OutOfFovError outside the FOV square.
void agent_cell(const GridSpec& spec, const Vec2& pos, int& ix, int& iy);

/// 11x11 (2*half+1) patch centered on the agent's cell, zero-padded at the
/// borders; throws OutOfFovError when the agent is outside the FOV.
template <typename T>
nn::NodeId extract_agent_patch_on_tape(nn::Tape<T>& tape, nn::NodeId features,
                                       const GridSpec& spec, const Vec2& pos,
                                       int half);

/// Residual conv stack over the pillar map, resized to the output grid,
/// concatenated with the binary t=0 boxes and fused by a 1x1 conv.
template <typename T>
nn::NodeId backbone_on_tape(ForwardContext<T>& ctx, nn::NodeId pillar_map,
                            nn::NodeId boxes);

/// Occupancy probabilities for one timestep (shared weights, timestep
/// injected as a broadcast channel): sigmoid(conv1x1(relu(conv3x3(...)))).
template <typename T>
nn::NodeId occupancy_head_on_tape(ForwardContext<T>& ctx, nn::NodeId features,
                                  int t);

struct AgentHead {
  nn::NodeId logits{-1};  // [1, K]
  nn::NodeId probs{-1};   // softmax over K
  nn::NodeId raw{-1};     // [K, T*5] rows: (dx, dy, log_sx, log_sy, rho_raw)
};

template <typename T>
AgentHead trajectory_head_on_tape(
    ForwardContext<T>& ctx, nn::NodeId features,
    const typename SceneInputs<T>::AgentInput& agent);

/// FC+BN+ReLU+segment-max over a [P, d_aug] point matrix; returns the
/// transposed [d_p, n_segments] map. Batched training passes the
/// concatenation of several scenes' points with per-scene segment offsets and
/// slices the result per scene.
template <typename T>
nn::NodeId encode_scene_points_on_tape(ForwardContext<T>& ctx,
                                       nn::NodeId point_matrix, const int* seg,
                                       int n_segments, bool training);

/// (1/(W*H)) * sum over classes, timesteps and cells of clamped binary
/// cross-entropy; targets are constant per-timestep buffers.
template <typename T>
nn::NodeId occupancy_loss_on_tape(nn::Tape<T>& tape,
                                  const std::vector<nn::NodeId>& occ_probs,
                                  const std::vector<std::vector<T>>& targets_by_t,
                                  int w, int h);

struct TrajectoryLossIds {
  nn::NodeId l_s{-1};
  nn::NodeId l_r{-1};
};

/// L_s = softmax cross-entropy against the assigned anchor; L_r = mean
/// squared waypoint error of that anchor's regressed trajectory, or the mean
/// per-waypoint 2D Gaussian negative log-likelihood in gaussian mode.
template <typename T>
TrajectoryLossIds trajectory_loss_on_tape(
    nn::Tape<T>& tape, const AgentHead& head,
    const typename SceneInputs<T>::AgentInput& agent,
    const AnchorBuffers<T>& anchors, bool gaussian);

/// Weighted sum of whichever components are present (-1 skips a term).
template <typename T>
nn::NodeId total_loss_on_tape(nn::Tape<T>& tape, nn::NodeId l_o, nn::NodeId l_s,
                              nn::NodeId l_r, nn::NodeId l_c,
                              const LossWeights& w);

struct SceneForward {
  nn::NodeId features{-1};
  std::vector<nn::NodeId> occ_probs;  // per t, [n_classes, h, w]
  std::vector<AgentHead> agent_heads; // parallel to inputs.agents; unset when !traj_ok
};

/// Full per-scene forward on the context's tape. In training mode BatchNorm
/// uses batch statistics over this scene's points only; the training loop
/// batches scenes jointly through the encoder instead (see train.hpp). The
/// out overload reuses the struct's vectors (allocation-free steady state).
template <typename T>
void forward_scene_on_tape(ForwardContext<T>& ctx, SceneInputs<T>& inputs,
                           bool training, bool want_traj, bool want_occ,
                           SceneForward& out);

template <typename T>
SceneForward forward_scene_on_tape(ForwardContext<T>& ctx,
                                   SceneInputs<T>& inputs, bool training,
                                   bool want_traj, bool want_occ) {
  SceneForward out;
  forward_scene_on_tape(ctx, inputs, training, want_traj, want_occ, out);
  return out;
}

/// Production model wrapper.
class ForecastNet {
 public:
  ForecastNet(const NetConfig& cfg, uint64_t init_seed);

  NetConfig& config() { return params_.cfg; }
  const NetConfig& config() const { return params_.cfg; }
  ModelParams<float>& params() { return params_; }
  nn::ParamStore<float>& store() { return params_.store; }

  SceneForward forward_scene(ForwardContext<float>& ctx,
                             SceneInputs<float>& inputs, bool training,
                             bool want_traj, bool want_occ) {
    return forward_scene_on_tape(ctx, inputs, training, want_traj, want_occ);
  }

  /// Decoded trajectories of a completed forward pass: means are absolute
  /// (anchor + delta + agent t=0 center); rho = tanh(raw).
  std::vector<AgentPrediction> decode_predictions(
      const nn::Tape<float>& tape, const SceneInputs<float>& inputs,
      const SceneForward& fwd, const ClassAnchors& anchors) const;

 private:
  ModelParams<float> params_;
};

/// Copies float parameters (and config) into another scalar type.
template <typename T>
void copy_params(ModelParams<float>& src, ModelParams<T>& dst);

}  // namespace pillarcast
