#pragma once

#include <vector>

#include "pillarcast/nn.hpp"
#include "pillarcast/sparse_input.hpp"

namespace pillarcast {

/// Points bucketed into an M x N pillar grid, kept in deterministic input
/// order with one pillar id per point. Feature rows are d_base wide until
/// augment() appends (x_c, y_c, x_offset, y_offset).
struct PillarGrid {
  int m{0}, n{0};
  double fov{0.0};
  int d_base{0};
  bool augmented{false};

  std::vector<Vec2> positions;   // raw point positions (meters)
  std::vector<int> pillar;       // linear pillar index iy * m + ix
  std::vector<double> features;  // row-major, width d()

  int d() const { return augmented ? d_base + 4 : d_base; }
  size_t count() const { return pillar.size(); }
  int pillar_count() const { return m * n; }

  /// Point indices grouped per pillar (test/diagnostic view).
  std::vector<std::vector<int>> cells() const;
};

/// Half-open cell convention: index = floor((x + fov) / dx); the upper FOV
/// edge is clamped into the last cell; out-of-FOV points are dropped. A
/// per-pillar cap keeps the first `cap` points in input order (cap <= 0
/// disables truncation).
PillarGrid assign_pillars(const FeaturePointSet& points, int m, int n,
                          double fov, int cap = 64);

/// Appends the 4-tuple offsets to every retained point.
PillarGrid augment(PillarGrid grid);

constexpr int kPillarAugDims = 4;

/// Shared per-point encoder parameters (FC + BatchNorm).
template <typename T>
struct PointEncoderParams {
  nn::Tensor<T>* fc_w{nullptr};     // [d_aug, d_p]
  nn::Tensor<T>* fc_b{nullptr};     // [d_p]
  nn::Tensor<T>* bn_gamma{nullptr}; // [d_p]
  nn::Tensor<T>* bn_beta{nullptr};  // [d_p]
  T* bn_running_mean{nullptr};      // [d_p], updated in training mode
  T* bn_running_var{nullptr};       // [d_p]
};

/// Parameter node handles for an encode pass (register each tensor on the
/// tape once per pass, then reuse the ids).
struct PointEncoderIds {
  nn::NodeId fc_w{-1}, fc_b{-1}, bn_gamma{-1}, bn_beta{-1};
};

/// ReLU(BN(FC(p))) per point followed by a coordinate-wise max within each
/// pillar; empty pillars are zero. Returns a [d_p, n, m] feature-map node.
/// point_matrix must be a [P, d_aug] node and seg the per-point pillar ids.
template <typename T>
nn::NodeId encode_pillars_on_tape(nn::Tape<T>& tape, nn::NodeId point_matrix,
                                  const int* seg, int m, int n,
                                  const PointEncoderIds& ids, T* running_mean,
                                  T* running_var, bool training);

/// Convenience wrapper over a scratch tape; returns the dense feature map.
nn::Tensor<float> encode_pillars(const PillarGrid& grid,
                                 const PointEncoderParams<float>& params,
                                 bool training);

/// Casts the grid's augmented rows into a [P, d_aug] float matrix.
nn::Tensor<float> pillar_point_matrix(const PillarGrid& grid);

}  // namespace pillarcast
