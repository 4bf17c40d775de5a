#pragma once

#include <deque>
#include <string>
#include <unordered_map>
#include <vector>

#include "pillarcast/rng.hpp"
#include "pillarcast/tape.hpp"

namespace pillarcast::nn {

/// Named parameter arrays in registration order (checkpoint order). Entries
/// with trainable=false (BatchNorm running statistics) are saved but never
/// touched by the optimizer. Entry storage is a deque so references returned
/// by add() stay valid while more entries are added.
template <typename T>
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor<T> tensor;
    bool trainable = true;
  };

  Tensor<T>& add(const std::string& name, Shape shape, bool trainable = true) {
    if (index_.count(name))
      throw ContractError("duplicate parameter name: " + name);
    index_[name] = static_cast<int>(entries_.size());
    entries_.push_back({name, Tensor<T>(shape, T(0), trainable), trainable});
    entries_.back().tensor.store_index = static_cast<int>(entries_.size()) - 1;
    return entries_.back().tensor;
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }
  Tensor<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter: " + name);
    return entries_[it->second].tensor;
  }
  const Tensor<T>& at(const std::string& name) const {
    return const_cast<ParamStore*>(this)->at(name);
  }

  std::deque<Entry>& entries() { return entries_; }
  const std::deque<Entry>& entries() const { return entries_; }
  size_t size() const { return entries_.size(); }

 private:
  std::deque<Entry> entries_;
  std::unordered_map<std::string, int> index_;
};

template <typename T>
void fill_normal(Tensor<T>& t, Rng& rng, double stddev) {
  for (T& v : t.data) v = static_cast<T>(rng.normal() * stddev);
}

template <typename T>
void fill_he(Tensor<T>& t, Rng& rng, int fan_in) {
  fill_normal(t, rng, std::sqrt(2.0 / fan_in));
}

/// Scales all gradients by max_norm/g when the global L2 norm g exceeds
/// max_norm. Returns the pre-clip norm.
template <typename T>
double clip_grad_norm(std::vector<std::vector<T>>& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw ContractError("clip_grad_norm: max_norm <= 0");
  double sq = 0.0;
  for (const auto& g : grads)
    for (T v : g) sq += static_cast<double>(v) * static_cast<double>(v);
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const T scale = static_cast<T>(max_norm / norm);
    for (auto& g : grads)
      for (T& v : g) v *= scale;
  }
  return norm;
}

/// Adam with bias correction; moments are laid out parallel to the store's
/// trainable entries.
template <typename T>
class Adam {
 public:
  struct Hyper {
    double lr = 4e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam() = default;
  Adam(const ParamStore<T>& store, Hyper hyper) : hyper_(hyper) {
    for (const auto& e : store.entries()) {
      m_.emplace_back(e.trainable ? e.tensor.data.size() : 0, T(0));
      v_.emplace_back(e.trainable ? e.tensor.data.size() : 0, T(0));
    }
  }

  int64_t step_count() const { return step_; }

  /// grads[i] applies to store entry i; empty vectors mean zero gradient.
  void step(ParamStore<T>& store, const std::vector<std::vector<T>>& grads) {
    if (grads.size() != store.size())
      throw ShapeError("adam: gradient list size mismatch");
    ++step_;
    const double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(step_));
    for (size_t i = 0; i < grads.size(); ++i) {
      auto& e = store.entries()[i];
      if (!e.trainable) continue;
      if (!grads[i].empty() && grads[i].size() != e.tensor.data.size())
        throw ShapeError("adam: gradient shape mismatch for " + e.name);
      auto& m = m_[i];
      auto& v = v_[i];
      for (size_t j = 0; j < e.tensor.data.size(); ++j) {
        const T g = grads[i].empty() ? T(0) : grads[i][j];
        m[j] = static_cast<T>(hyper_.beta1) * m[j] +
               static_cast<T>(1.0 - hyper_.beta1) * g;
        v[j] = static_cast<T>(hyper_.beta2) * v[j] +
               static_cast<T>(1.0 - hyper_.beta2) * g * g;
        const double mhat = static_cast<double>(m[j]) / bc1;
        const double vhat = static_cast<double>(v[j]) / bc2;
        e.tensor.data[j] -=
            static_cast<T>(hyper_.lr * mhat / (std::sqrt(vhat) + hyper_.eps));
      }
    }
  }

 private:
  Hyper hyper_;
  int64_t step_ = 0;
  std::vector<std::vector<T>> m_, v_;
};

/// Checkpoint format: magic "STPN", u32 version, u32 count, then per array
/// u32 name length, name bytes, u32 rank, u32 dims, float32 LE values.
void save_checkpoint(const ParamStore<float>& store, const std::string& path);
void load_checkpoint(ParamStore<float>& store, const std::string& path);

}  // namespace pillarcast::nn
