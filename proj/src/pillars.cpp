#include "pillarcast/pillars.hpp"

#include <cmath>

namespace pillarcast {

std::vector<std::vector<int>> PillarGrid::cells() const {
  std::vector<std::vector<int>> out(static_cast<size_t>(m) * n);
  for (size_t i = 0; i < pillar.size(); ++i)
    out[pillar[i]].push_back(static_cast<int>(i));
  return out;
}

PillarGrid assign_pillars(const FeaturePointSet& points, int m, int n,
                          double fov, int cap) {
  if (m < 1 || n < 1) throw ConfigError("pillar grid must be at least 1x1");
  PillarGrid grid;
  grid.m = m;
  grid.n = n;
  grid.fov = fov;
  grid.d_base = points.layout.d_in;

  const double dx = 2.0 * fov / m;
  const double dy = 2.0 * fov / n;
  std::vector<int> per_pillar(static_cast<size_t>(m) * n, 0);

  for (const FeaturePoint& p : points.points) {
    if (std::abs(p.position.x) > fov || std::abs(p.position.y) > fov) continue;
    int ix = static_cast<int>(std::floor((p.position.x + fov) / dx));
    int iy = static_cast<int>(std::floor((p.position.y + fov) / dy));
    if (ix == m) ix = m - 1;  // upper edge clamps into the last cell
    if (iy == n) iy = n - 1;
    const int lin = iy * m + ix;
    if (cap > 0 && per_pillar[lin] >= cap) continue;
    ++per_pillar[lin];
    grid.positions.push_back(p.position);
    grid.pillar.push_back(lin);
    grid.features.insert(grid.features.end(), p.features.begin(),
                         p.features.end());
  }
  return grid;
}

PillarGrid augment(PillarGrid grid) {
  if (grid.augmented) return grid;
  const int d = grid.d_base;
  const size_t count = grid.count();

  std::vector<double> sum_x(grid.pillar_count(), 0.0);
  std::vector<double> sum_y(grid.pillar_count(), 0.0);
  std::vector<int> cnt(grid.pillar_count(), 0);
  for (size_t i = 0; i < count; ++i) {
    sum_x[grid.pillar[i]] += grid.positions[i].x;
    sum_y[grid.pillar[i]] += grid.positions[i].y;
    ++cnt[grid.pillar[i]];
  }

  const double dx = 2.0 * grid.fov / grid.m;
  const double dy = 2.0 * grid.fov / grid.n;

  std::vector<double> out;
  out.reserve(count * (d + kPillarAugDims));
  for (size_t i = 0; i < count; ++i) {
    const int lin = grid.pillar[i];
    const double mean_x = sum_x[lin] / cnt[lin];
    const double mean_y = sum_y[lin] / cnt[lin];
    const int ix = lin % grid.m;
    const int iy = lin / grid.m;
    const double cx = -grid.fov + (ix + 0.5) * dx;
    const double cy = -grid.fov + (iy + 0.5) * dy;
    out.insert(out.end(), grid.features.begin() + i * d,
               grid.features.begin() + (i + 1) * d);
    out.push_back(grid.positions[i].x - mean_x);
    out.push_back(grid.positions[i].y - mean_y);
    out.push_back(grid.positions[i].x - cx);
    out.push_back(grid.positions[i].y - cy);
  }
  grid.features = std::move(out);
  grid.augmented = true;
  return grid;
}

nn::Tensor<float> pillar_point_matrix(const PillarGrid& grid) {
  if (!grid.augmented)
    throw ConfigError("pillar_point_matrix: grid must be augmented first");
  nn::Tensor<float> t(nn::Shape::mat(static_cast<int>(grid.count()), grid.d()));
  for (size_t i = 0; i < grid.features.size(); ++i)
    t.data[i] = static_cast<float>(grid.features[i]);
  return t;
}

template <typename T>
nn::NodeId encode_pillars_on_tape(nn::Tape<T>& tape, nn::NodeId point_matrix,
                                  const int* seg, int m, int n,
                                  const PointEncoderIds& ids, T* running_mean,
                                  T* running_var, bool training) {
  const nn::Shape& in_shape = tape.shape(point_matrix);
  const nn::Shape& w_shape = tape.shape(ids.fc_w);
  const int d_p = w_shape[1];
  if (in_shape[1] != w_shape[0])
    throw nn::ShapeError("encode_pillars: point width " +
                         std::to_string(in_shape[1]) + " != fc input " +
                         std::to_string(w_shape[0]));
  nn::NodeId h = tape.linear(point_matrix, ids.fc_w, ids.fc_b);
  h = tape.batchnorm(h, ids.bn_gamma, ids.bn_beta, running_mean, running_var,
                     training);
  h = tape.relu(h);
  h = tape.segment_max(h, seg, m * n);          // [m*n, d_p]
  h = tape.transpose2d(h);                      // [d_p, m*n]
  return tape.reshape(h, nn::Shape::chw(d_p, n, m));
}

template nn::NodeId encode_pillars_on_tape<float>(nn::Tape<float>&, nn::NodeId,
                                                  const int*, int, int,
                                                  const PointEncoderIds&,
                                                  float*, float*, bool);
template nn::NodeId encode_pillars_on_tape<double>(nn::Tape<double>&,
                                                   nn::NodeId, const int*, int,
                                                   int, const PointEncoderIds&,
                                                   double*, double*, bool);

nn::Tensor<float> encode_pillars(const PillarGrid& grid,
                                 const PointEncoderParams<float>& params,
                                 bool training) {
  nn::Tape<float> tape;
  const nn::Tensor<float> points = pillar_point_matrix(grid);
  const nn::NodeId in = tape.input(points);
  PointEncoderIds ids;
  ids.fc_w = tape.input(*params.fc_w);
  ids.fc_b = tape.input(*params.fc_b);
  ids.bn_gamma = tape.input(*params.bn_gamma);
  ids.bn_beta = tape.input(*params.bn_beta);
  const nn::NodeId out = encode_pillars_on_tape(
      tape, in, grid.pillar.data(), grid.m, grid.n, ids,
      params.bn_running_mean, params.bn_running_var, training);
  nn::Tensor<float> map(tape.shape(out));
  const float* v = tape.value(out);
  std::copy(v, v + map.shape.numel(), map.data.begin());
  return map;
}

}  // namespace pillarcast
