#include "pillarcast/anchors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "pillarcast/rng.hpp"

namespace pillarcast {

namespace {

double traj_sq_dist(const Vec2* a, const Vec2* b, int t) {
  double acc = 0.0;
  for (int i = 0; i < t; ++i) acc += (a[i] - b[i]).squared_norm();
  return acc;
}

}  // namespace

void ClassAnchors::rebuild_flat() {
  flat_x.assign(per_class.size(), {});
  flat_y.assign(per_class.size(), {});
  for (size_t c = 0; c < per_class.size(); ++c) {
    const AnchorSet& a = per_class[c];
    flat_x[c].resize(static_cast<size_t>(a.k) * a.horizon);
    flat_y[c].resize(static_cast<size_t>(a.k) * a.horizon);
    for (size_t i = 0; i < a.waypoints.size(); ++i) {
      flat_x[c][i] = static_cast<float>(a.waypoints[i].x);
      flat_y[c][i] = static_cast<float>(a.waypoints[i].y);
    }
  }
}

std::vector<int> kmeans_pp_init(const std::vector<std::vector<Vec2>>& futures,
                                int k, uint64_t seed) {
  Rng rng(mix_seed(seed, 0xa2c8));
  const int horizon = static_cast<int>(futures[0].size());
  std::vector<int> centers;
  centers.push_back(static_cast<int>(rng.uniform_int(0, futures.size() - 1)));
  std::vector<double> d2(futures.size());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (size_t i = 0; i < futures.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c : centers)
        best = std::min(best, traj_sq_dist(futures[i].data(),
                                           futures[c].data(), horizon));
      d2[i] = best;
      total += best;
    }
    int pick;
    if (total <= 0.0) {
      pick = static_cast<int>(rng.uniform_int(0, futures.size() - 1));
    } else {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      pick = static_cast<int>(futures.size()) - 1;
      for (size_t i = 0; i < futures.size(); ++i) {
        acc += d2[i];
        if (acc >= r) {
          pick = static_cast<int>(i);
          break;
        }
      }
    }
    centers.push_back(pick);
  }
  return centers;
}

AnchorSet cluster_anchors(const std::vector<std::vector<Vec2>>& futures, int k,
                          uint64_t seed) {
  if (k < 1) throw std::invalid_argument("cluster_anchors: k must be >= 1");
  if (static_cast<int>(futures.size()) < k)
    throw std::invalid_argument("cluster_anchors: fewer trajectories (" +
                                std::to_string(futures.size()) +
                                ") than anchors (" + std::to_string(k) + ")");
  const int horizon = static_cast<int>(futures[0].size());
  for (const auto& f : futures)
    if (static_cast<int>(f.size()) != horizon)
      throw std::invalid_argument("cluster_anchors: ragged futures");

  // distinctness check (exact duplicates collapse)
  {
    std::set<std::vector<std::pair<double, double>>> unique;
    for (const auto& f : futures) {
      std::vector<std::pair<double, double>> key;
      key.reserve(f.size());
      for (const Vec2& p : f) key.emplace_back(p.x, p.y);
      unique.insert(std::move(key));
    }
    if (static_cast<int>(unique.size()) < k)
      throw std::invalid_argument(
          "cluster_anchors: fewer distinct trajectories (" +
          std::to_string(unique.size()) + ") than anchors (" +
          std::to_string(k) + ")");
  }

  AnchorSet anchors;
  anchors.k = k;
  anchors.horizon = horizon;
  anchors.waypoints.resize(static_cast<size_t>(k) * horizon);

  const std::vector<int> init = kmeans_pp_init(futures, k, seed);
  for (int c = 0; c < k; ++c)
    std::copy(futures[init[c]].begin(), futures[init[c]].end(),
              anchors.anchor(c));

  std::vector<int> assign(futures.size(), -1);
  for (int iter = 0; iter < 100; ++iter) {
    bool changed = false;
    for (size_t i = 0; i < futures.size(); ++i) {
      int best_c = 0;
      double best = traj_sq_dist(futures[i].data(), anchors.anchor(0), horizon);
      for (int c = 1; c < k; ++c) {
        const double d = traj_sq_dist(futures[i].data(), anchors.anchor(c), horizon);
        if (d < best) {
          best = d;
          best_c = c;
        }
      }
      if (assign[i] != best_c) {
        assign[i] = best_c;
        changed = true;
      }
    }
    if (!changed && iter > 0) break;

    std::vector<int> counts(k, 0);
    std::vector<Vec2> sums(static_cast<size_t>(k) * horizon);
    for (size_t i = 0; i < futures.size(); ++i) {
      ++counts[assign[i]];
      for (int t = 0; t < horizon; ++t)
        sums[static_cast<size_t>(assign[i]) * horizon + t] += futures[i][t];
    }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // reseed an empty cluster with the future farthest from its center
        double worst = -1.0;
        size_t worst_i = 0;
        for (size_t i = 0; i < futures.size(); ++i) {
          const double d = traj_sq_dist(futures[i].data(),
                                        anchors.anchor(assign[i]), horizon);
          if (d > worst) {
            worst = d;
            worst_i = i;
          }
        }
        std::copy(futures[worst_i].begin(), futures[worst_i].end(),
                  anchors.anchor(c));
        assign[worst_i] = c;
        continue;
      }
      for (int t = 0; t < horizon; ++t)
        anchors.anchor(c)[t] =
            sums[static_cast<size_t>(c) * horizon + t] * (1.0 / counts[c]);
    }
  }
  return anchors;
}

double anchor_cost(const AnchorSet& anchors,
                   const std::vector<std::vector<Vec2>>& futures) {
  double total = 0.0;
  for (const auto& f : futures) {
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < anchors.k; ++c)
      best = std::min(best,
                      traj_sq_dist(f.data(), anchors.anchor(c), anchors.horizon));
    total += best;
  }
  return total;
}

int assign_anchor(const std::vector<Vec2>& gt_future, const AnchorSet& anchors) {
  if (static_cast<int>(gt_future.size()) != anchors.horizon)
    throw std::invalid_argument("assign_anchor: length mismatch");
  int best_c = 0;
  double best = traj_sq_dist(gt_future.data(), anchors.anchor(0), anchors.horizon);
  for (int c = 1; c < anchors.k; ++c) {
    const double d = traj_sq_dist(gt_future.data(), anchors.anchor(c), anchors.horizon);
    if (d < best) {
      best = d;
      best_c = c;
    }
  }
  return best_c;
}

ClassAnchors cluster_class_anchors(const std::vector<Scene>& scenes, int k,
                                   uint64_t seed) {
  ClassAnchors out;
  out.per_class.resize(kNumAgentClasses);
  for (int c = 0; c < kNumAgentClasses; ++c) {
    std::vector<std::vector<Vec2>> futures;
    for (const Scene& s : scenes)
      for (const AgentTrack& a : s.agents) {
        if (static_cast<int>(a.agent_class) != c || !a.has_future()) continue;
        std::vector<Vec2> rel;
        rel.reserve(a.future.size());
        for (const Vec2& p : a.future) rel.push_back(p - a.current().center);
        futures.push_back(std::move(rel));
      }
    out.per_class[c] = cluster_anchors(futures, k, seed + c);
  }
  out.rebuild_flat();
  return out;
}

void save_anchors(const ClassAnchors& anchors, const std::string& path) {
  nlohmann::json j;
  j["k"] = anchors.per_class.empty() ? 0 : anchors.per_class[0].k;
  j["horizon"] = anchors.per_class.empty() ? 0 : anchors.per_class[0].horizon;
  nlohmann::json classes = nlohmann::json::object();
  for (size_t c = 0; c < anchors.per_class.size(); ++c) {
    const AnchorSet& a = anchors.per_class[c];
    nlohmann::json arr = nlohmann::json::array();
    for (int i = 0; i < a.k; ++i) {
      nlohmann::json traj = nlohmann::json::array();
      for (int t = 0; t < a.horizon; ++t)
        traj.push_back({a.anchor(i)[t].x, a.anchor(i)[t].y});
      arr.push_back(std::move(traj));
    }
    classes[to_string(static_cast<AgentClass>(c))] = std::move(arr);
  }
  j["classes"] = std::move(classes);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << j.dump() << '\n';
}

ClassAnchors load_anchors(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open anchors: " + path);
  nlohmann::json j;
  in >> j;
  ClassAnchors out;
  out.per_class.resize(kNumAgentClasses);
  for (int c = 0; c < kNumAgentClasses; ++c) {
    const auto& arr = j.at("classes").at(to_string(static_cast<AgentClass>(c)));
    AnchorSet& a = out.per_class[c];
    a.k = static_cast<int>(arr.size());
    a.horizon = a.k > 0 ? static_cast<int>(arr[0].size()) : 0;
    a.waypoints.resize(static_cast<size_t>(a.k) * a.horizon);
    for (int i = 0; i < a.k; ++i)
      for (int t = 0; t < a.horizon; ++t)
        a.anchor(i)[t] = {arr[i][t][0].get<double>(), arr[i][t][1].get<double>()};
  }
  out.rebuild_flat();
  return out;
}

}  // namespace pillarcast
