#pragma once

#include "pillarcast/anchors.hpp"
#include "pillarcast/model.hpp"
#include "pillarcast/prediction.hpp"
#include "pillarcast/sparse_input.hpp"

namespace pillarcast {

/// Agent-centric point-set encoder baseline: the scene's point set is
/// re-expressed in every agent's frame and re-encoded per agent, so both
/// compute and latency grow with the agent count. Used for scaling
/// comparisons, not for competitive accuracy.
class AgentCentricBaseline {
 public:
  AgentCentricBaseline(const NetConfig& cfg, uint64_t init_seed);

  const NetConfig& config() const { return cfg_; }
  nn::ParamStore<float>& store() { return store_; }

  /// Number of encode_agent_centric invocations so far (instrumented).
  long encoder_invocations() const { return invocations_; }
  void reset_counter() { invocations_ = 0; }

  /// Transforms the point set into the agent frame (translate to the agent's
  /// t=0 center, rotate by -heading), re-encodes every point through the
  /// shared FC+BN+ReLU, max-pools globally, and concatenates the embedded
  /// agent state. Throws on an invalid agent.
  nn::Tensor<float> encode_agent_centric(const Scene& scene,
                                         const FeaturePointSet& points,
                                         int64_t agent_id);

  /// Full per-agent prediction with the same decoder head structure as the
  /// whole-scene trajectory decoder (minus patch extraction).
  std::vector<AgentPrediction> predict(const Scene& scene,
                                       const FeaturePointSet& points,
                                       const ClassAnchors& anchors);

  /// Forward pass over every agent without materializing predictions;
  /// allocation-free in steady state (benchmark inner loop).
  void forward_latency_pass(const Scene& scene, const FeaturePointSet& points);

 private:
  struct AgentFrameScratch {
    std::vector<float> features;  // [P, d_in] re-expressed per agent
    std::vector<int> seg;         // all zeros (global max)
  };

  nn::NodeId encode_on_tape(nn::Tape<float>& tape, const Scene& scene,
                            const FeaturePointSet& points, int64_t agent_id);

  NetConfig cfg_;
  FeatureLayout layout_;
  nn::ParamStore<float> store_;
  AgentFrameScratch scratch_;
  nn::Tensor<float> state_scratch_;
  nn::Tape<float> tape_;
  long invocations_{0};

  nn::Tensor<float>*fc_w_{}, *fc_b_{}, *gamma_{}, *beta_{}, *rm_{}, *rv_{};
  nn::Tensor<float>*state_w_{}, *state_b_{};
  nn::Tensor<float>*head_w1_{}, *head_b1_{}, *head_w2_{}, *head_b2_{};
};

}  // namespace pillarcast
