#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "pillarcast/kernels.hpp"

namespace pillarcast::nn {

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Shape {
  int dims[4] = {0, 0, 0, 0};
  int rank = 0;

  static Shape scalar() { return Shape{{1}, 1}; }
  static Shape vec(int n) { return Shape{{n}, 1}; }
  static Shape mat(int m, int n) { return Shape{{m, n}, 2}; }
  static Shape chw(int c, int h, int w) { return Shape{{c, h, w}, 3}; }
  static Shape conv_w(int co, int ci, int kh, int kw) {
    return Shape{{co, ci, kh, kw}, 4};
  }

  long numel() const {
    long n = 1;
    for (int i = 0; i < rank; ++i) n *= dims[i];
    return rank == 0 ? 0 : n;
  }
  int operator[](int i) const { return dims[i]; }
  bool operator==(const Shape& o) const {
    if (rank != o.rank) return false;
    for (int i = 0; i < rank; ++i)
      if (dims[i] != o.dims[i]) return false;
    return true;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }
  std::string str() const {
    std::string s = "[";
    for (int i = 0; i < rank; ++i)
      s += std::to_string(dims[i]) + (i + 1 < rank ? "," : "");
    return s + "]";
  }
};

/// Dense tensor living outside the tape (parameters, cached inputs).
template <typename T>
struct Tensor {
  Shape shape;
  std::vector<T> data;
  bool requires_grad = false;
  int store_index = -1;  // position in its ParamStore, -1 for free tensors

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0), bool rg = false)
      : shape(s), data(static_cast<size_t>(s.numel()), fill), requires_grad(rg) {}
};

using NodeId = int;

enum class Op : uint8_t {
  input,
  add,
  sub,
  mul,
  divide,
  scale_shift,
  relu,
  sigmoid,
  tanh_fn,
  exp_fn,
  log_fn,
  cosh_fn,
  sum_all,
  mean_all,
  linear,
  conv2d,
  batchnorm,
  segment_max,
  avg_pool2,
  resize_nearest,
  softmax,
  concat_chan,
  concat_vec,
  slice_cols,
  take_row,
  reshape,
  transpose2d,
  extract_patch,
  add_const,
  sub_const,
  bce_sum,
  ce_logits,
};

const char* op_name(Op op);

/// Reverse-mode tape over dense tensors. Recording is eager (each op computes
/// its value immediately); node slots and buffers are reused across rewind()
/// calls so steady-state forward passes allocate nothing.
template <typename T>
class Tape {
 public:
  struct Node {
    Op op = Op::input;
    int a = -1, b = -1, c = -1;  // parents
    Shape shape;
    std::vector<T> val;         // owned value (unused when vptr set)
    const T* vptr = nullptr;    // external/aliased value
    std::vector<T> grad;
    bool needs_grad = false;
    bool grad_ready = false;
    // op payload
    int i0 = 0, i1 = 0, i2 = 0, i3 = 0;
    T f0 = T(0), f1 = T(0);
    const T* cptr = nullptr;    // const tensor payload (targets, anchors)
    const int* iptr = nullptr;  // const int payload (segment ids)
    std::vector<int> iaux;      // owned scratch (argmax)
    std::vector<T> taux;        // owned scratch (bn stats, softmax cache)
    T* state0 = nullptr;        // mutable external state (bn running mean)
    T* state1 = nullptr;        // (bn running var)

    const T* value() const { return vptr ? vptr : val.data(); }
  };

  int size() const { return size_; }
  void rewind() { size_ = 0; }

  /// Node access is transient: recording another op may relocate nodes.
  const Node& node(NodeId id) const { return nodes_[check(id)]; }
  const T* value(NodeId id) const { return nodes_[check(id)].value(); }
  /// By value: recording ops reallocates node storage, so a reference into a
  /// node would dangle across the next op.
  Shape shape(NodeId id) const { return nodes_[check(id)].shape; }
  T scalar_value(NodeId id) const {
    const Node& n = nodes_[check(id)];
    if (n.shape.numel() != 1)
      throw ContractError("scalar_value on non-scalar node");
    return n.value()[0];
  }
  /// Gradient from the last backward(); empty when the node was unreached.
  const std::vector<T>& grad(NodeId id) const {
    static const std::vector<T> empty;
    const Node& n = nodes_[check(id)];
    return n.grad_ready ? n.grad : empty;
  }

  // ---- leaves ----
  NodeId input(const Tensor<T>& t) { return input_ref(t.data.data(), t.shape, t.requires_grad); }
  NodeId input_ref(const T* data, Shape s, bool requires_grad) {
    Node& n = fresh(Op::input, s);
    n.vptr = data;
    n.needs_grad = requires_grad;
    return size_ - 1;
  }

  // ---- elementwise ----
  NodeId add(NodeId a, NodeId b) { return binary(Op::add, a, b); }
  NodeId sub(NodeId a, NodeId b) { return binary(Op::sub, a, b); }
  NodeId mul(NodeId a, NodeId b) { return binary(Op::mul, a, b); }
  NodeId divide(NodeId a, NodeId b) { return binary(Op::divide, a, b); }

  /// y = scale * x + shift
  NodeId scale_shift(NodeId a, T scale, T shift = T(0)) {
    Node& n = fresh(Op::scale_shift, shape(a), a);
    n.f0 = scale;
    n.f1 = shift;
    const T* x = parent_val(n.a);
    for (long i = 0; i < n.shape.numel(); ++i) n.val[i] = scale * x[i] + shift;
    return size_ - 1;
  }

  NodeId relu(NodeId a) { return unary(Op::relu, a, [](T x) { return x > T(0) ? x : T(0); }); }
  NodeId sigmoid(NodeId a) {
    return unary(Op::sigmoid, a, [](T x) { return T(1) / (T(1) + std::exp(-x)); });
  }
  NodeId tanh_fn(NodeId a) { return unary(Op::tanh_fn, a, [](T x) { return std::tanh(x); }); }
  NodeId exp_fn(NodeId a) { return unary(Op::exp_fn, a, [](T x) { return std::exp(x); }); }
  NodeId log_fn(NodeId a) { return unary(Op::log_fn, a, [](T x) { return std::log(x); }); }
  NodeId cosh_fn(NodeId a) { return unary(Op::cosh_fn, a, [](T x) { return std::cosh(x); }); }

  NodeId sum_all(NodeId a) {
    Node& n = fresh(Op::sum_all, Shape::scalar(), a);
    const T* x = parent_val(n.a);
    T acc = 0;
    for (long i = 0; i < nodes_[n.a].shape.numel(); ++i) acc += x[i];
    n.val[0] = acc;
    return size_ - 1;
  }
  NodeId mean_all(NodeId a) {
    const long count = shape(a).numel();
    Node& n = fresh(Op::mean_all, Shape::scalar(), a);
    const T* x = parent_val(n.a);
    T acc = 0;
    for (long i = 0; i < count; ++i) acc += x[i];
    n.val[0] = acc / static_cast<T>(count);
    return size_ - 1;
  }

  // ---- layers ----
  /// x[m,k] * w[k,n] + b[n]; b may be -1 for no bias.
  NodeId linear(NodeId x, NodeId w, NodeId b) {
    const Shape& sx = shape(x);
    const Shape& sw = shape(w);
    if (sx.rank != 2 || sw.rank != 2 || sx[1] != sw[0])
      throw ShapeError("linear: incompatible shapes " + sx.str() + " x " + sw.str());
    if (b >= 0 && (shape(b).rank != 1 || shape(b)[0] != sw[1]))
      throw ShapeError("linear: bias shape " + shape(b).str() + " != [" +
                       std::to_string(sw[1]) + "]");
    Node& n = fresh(Op::linear, Shape::mat(sx[0], sw[1]), x, w, b);
    kernels::linear_forward(parent_val(x), parent_val(w),
                            b >= 0 ? parent_val(b) : nullptr, n.val.data(),
                            sx[0], sx[1], sw[1]);
    return size_ - 1;
  }

  NodeId conv2d(NodeId x, NodeId w, NodeId b, int stride, int pad) {
    const Shape& sx = shape(x);
    const Shape& sw = shape(w);
    if (sx.rank != 3 || sw.rank != 4 || sx[0] != sw[1])
      throw ShapeError("conv2d: incompatible shapes " + sx.str() + " x " + sw.str());
    if (b >= 0 && (shape(b).rank != 1 || shape(b)[0] != sw[0]))
      throw ShapeError("conv2d: bias shape mismatch");
    kernels::ConvSpec spec{sx[0], sx[1], sx[2], sw[0], sw[2], sw[3], stride, pad};
    if (spec.oh() < 1 || spec.ow() < 1)
      throw ShapeError("conv2d: empty output for input " + sx.str());
    Node& n = fresh(Op::conv2d, Shape::chw(sw[0], spec.oh(), spec.ow()), x, w, b);
    n.i0 = stride;
    n.i1 = pad;
    kernels::conv2d_forward(spec, parent_val(x), parent_val(w),
                            b >= 0 ? parent_val(b) : nullptr, n.val.data());
    return size_ - 1;
  }

  /// BatchNorm over rows of x[m,c]. In training mode batch statistics are
  /// used and running stats (external, length c each) are updated in place;
  /// in eval mode the running stats are used.
  NodeId batchnorm(NodeId x, NodeId gamma, NodeId beta, T* running_mean,
                   T* running_var, bool training, T eps = T(1e-5),
                   T momentum = T(0.99)) {
    const Shape& sx = shape(x);
    if (sx.rank != 2) throw ShapeError("batchnorm: expected [m,c], got " + sx.str());
    const int m = sx[0], c = sx[1];
    if (shape(gamma) != Shape::vec(c) || shape(beta) != Shape::vec(c))
      throw ShapeError("batchnorm: param shape mismatch");
    Node& n = fresh(Op::batchnorm, sx, x, gamma, beta);
    n.i0 = training ? 1 : 0;
    n.f0 = eps;
    n.state0 = running_mean;
    n.state1 = running_var;
    n.taux.resize(2 * c);
    const T* xv = parent_val(x);
    const T* g = parent_val(gamma);
    const T* be = parent_val(beta);
    if (training) {
      for (int j = 0; j < c; ++j) {
        T mean = 0;
        for (int i = 0; i < m; ++i) mean += xv[static_cast<long>(i) * c + j];
        mean /= static_cast<T>(m);
        T var = 0;
        for (int i = 0; i < m; ++i) {
          const T d = xv[static_cast<long>(i) * c + j] - mean;
          var += d * d;
        }
        var /= static_cast<T>(m);
        n.taux[j] = mean;
        n.taux[c + j] = T(1) / std::sqrt(var + eps);
        running_mean[j] = momentum * running_mean[j] + (T(1) - momentum) * mean;
        running_var[j] = momentum * running_var[j] + (T(1) - momentum) * var;
      }
    } else {
      for (int j = 0; j < c; ++j) {
        n.taux[j] = running_mean[j];
        n.taux[c + j] = T(1) / std::sqrt(running_var[j] + eps);
      }
    }
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < c; ++j) {
        const long idx = static_cast<long>(i) * c + j;
        n.val[idx] = g[j] * (xv[idx] - n.taux[j]) * n.taux[c + j] + be[j];
      }
    return size_ - 1;
  }

  /// Coordinate-wise max over segments; empty segments map to zeros. seg must
  /// outlive the tape pass. Ties route gradient to the lowest point index.
  NodeId segment_max(NodeId x, const int* seg, int n_segments) {
    const Shape& sx = shape(x);
    if (sx.rank != 2) throw ShapeError("segment_max: expected [n,c]");
    Node& n = fresh(Op::segment_max, Shape::mat(n_segments, sx[1]), x);
    n.iptr = seg;
    n.i0 = n_segments;
    n.iaux.resize(static_cast<size_t>(n_segments) * sx[1]);
    kernels::segment_max_forward(parent_val(x), seg, n.val.data(),
                                 n.iaux.data(), sx[0], sx[1], n_segments);
    return size_ - 1;
  }

  NodeId avg_pool2(NodeId x) {
    const Shape& sx = shape(x);
    if (sx.rank != 3 || sx[1] % 2 != 0 || sx[2] % 2 != 0)
      throw ShapeError("avg_pool2: expected [c,2i,2j], got " + sx.str());
    Node& n = fresh(Op::avg_pool2, Shape::chw(sx[0], sx[1] / 2, sx[2] / 2), x);
    const T* xv = parent_val(x);
    const int oh = sx[1] / 2, ow = sx[2] / 2;
    for (int ci = 0; ci < sx[0]; ++ci)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          const T* base = xv + (static_cast<long>(ci) * sx[1] + 2 * oy) * sx[2] + 2 * ox;
          n.val[(static_cast<long>(ci) * oh + oy) * ow + ox] =
              (base[0] + base[1] + base[sx[2]] + base[sx[2] + 1]) * T(0.25);
        }
    return size_ - 1;
  }

  /// Nearest-neighbor resize to oh x ow (source index floor((i+0.5)*in/out)).
  NodeId resize_nearest(NodeId x, int oh, int ow) {
    const Shape& sx = shape(x);
    if (sx.rank != 3) throw ShapeError("resize_nearest: expected [c,h,w]");
    Node& n = fresh(Op::resize_nearest, Shape::chw(sx[0], oh, ow), x);
    n.i0 = oh;
    n.i1 = ow;
    const T* xv = parent_val(x);
    for (int ci = 0; ci < sx[0]; ++ci)
      for (int oy = 0; oy < oh; ++oy) {
        const int sy = src_index(oy, sx[1], oh);
        for (int ox = 0; ox < ow; ++ox) {
          const int sxi = src_index(ox, sx[2], ow);
          n.val[(static_cast<long>(ci) * oh + oy) * ow + ox] =
              xv[(static_cast<long>(ci) * sx[1] + sy) * sx[2] + sxi];
        }
      }
    return size_ - 1;
  }

  NodeId upsample_nearest2(NodeId x) {
    const Shape& sx = shape(x);
    if (sx.rank != 3) throw ShapeError("upsample_nearest2: expected [c,h,w]");
    return resize_nearest(x, sx[1] * 2, sx[2] * 2);
  }

  NodeId softmax(NodeId x) {
    const Shape& sx = shape(x);
    Node& n = fresh(Op::softmax, sx, x);
    const T* xv = parent_val(x);
    const long count = sx.numel();
    T mx = xv[0];
    for (long i = 1; i < count; ++i) mx = std::max(mx, xv[i]);
    T z = 0;
    for (long i = 0; i < count; ++i) {
      n.val[i] = std::exp(xv[i] - mx);
      z += n.val[i];
    }
    for (long i = 0; i < count; ++i) n.val[i] /= z;
    return size_ - 1;
  }

  NodeId concat_chan(NodeId a, NodeId b) {
    const Shape& sa = shape(a);
    const Shape& sb = shape(b);
    if (sa.rank != 3 || sb.rank != 3 || sa[1] != sb[1] || sa[2] != sb[2])
      throw ShapeError("concat_chan: " + sa.str() + " vs " + sb.str());
    Node& n = fresh(Op::concat_chan, Shape::chw(sa[0] + sb[0], sa[1], sa[2]), a, b);
    const long na = sa.numel(), nb = sb.numel();
    const T* av = parent_val(a);
    const T* bv = parent_val(b);
    for (long i = 0; i < na; ++i) n.val[i] = av[i];
    for (long i = 0; i < nb; ++i) n.val[na + i] = bv[i];
    return size_ - 1;
  }

  /// Concatenate two row vectors [1,na] + [1,nb] -> [1,na+nb].
  NodeId concat_vec(NodeId a, NodeId b) {
    const Shape& sa = shape(a);
    const Shape& sb = shape(b);
    if (sa.rank != 2 || sb.rank != 2 || sa[0] != 1 || sb[0] != 1)
      throw ShapeError("concat_vec: expected [1,n] rows");
    Node& n = fresh(Op::concat_vec, Shape::mat(1, sa[1] + sb[1]), a, b);
    const T* av = parent_val(a);
    const T* bv = parent_val(b);
    for (int i = 0; i < sa[1]; ++i) n.val[i] = av[i];
    for (int i = 0; i < sb[1]; ++i) n.val[sa[1] + i] = bv[i];
    return size_ - 1;
  }

  NodeId slice_cols(NodeId x, int c0, int c1) {
    const Shape& sx = shape(x);
    if (sx.rank != 2 || c0 < 0 || c1 > sx[1] || c0 >= c1)
      throw ShapeError("slice_cols: bad range on " + sx.str());
    Node& n = fresh(Op::slice_cols, Shape::mat(sx[0], c1 - c0), x);
    n.i0 = c0;
    n.i1 = c1;
    const T* xv = parent_val(x);
    for (int i = 0; i < sx[0]; ++i)
      for (int j = c0; j < c1; ++j)
        n.val[static_cast<long>(i) * (c1 - c0) + (j - c0)] =
            xv[static_cast<long>(i) * sx[1] + j];
    return size_ - 1;
  }

  NodeId take_row(NodeId x, int row) {
    const Shape& sx = shape(x);
    if (sx.rank != 2 || row < 0 || row >= sx[0])
      throw ShapeError("take_row: bad row on " + sx.str());
    Node& n = fresh(Op::take_row, Shape::mat(1, sx[1]), x);
    n.i0 = row;
    const T* xv = parent_val(x);
    for (int j = 0; j < sx[1]; ++j) n.val[j] = xv[static_cast<long>(row) * sx[1] + j];
    return size_ - 1;
  }

  /// Zero-copy view with a different shape (same element count/order).
  NodeId reshape(NodeId x, Shape s) {
    if (s.numel() != shape(x).numel())
      throw ShapeError("reshape: " + shape(x).str() + " -> " + s.str());
    Node& n = fresh(Op::reshape, s, x, -1, -1, /*alloc=*/false);
    n.vptr = parent_val(x);
    return size_ - 1;
  }

  NodeId transpose2d(NodeId x) {
    const Shape& sx = shape(x);
    if (sx.rank != 2) throw ShapeError("transpose2d: expected [m,n]");
    Node& n = fresh(Op::transpose2d, Shape::mat(sx[1], sx[0]), x);
    const T* xv = parent_val(x);
    for (int i = 0; i < sx[0]; ++i)
      for (int j = 0; j < sx[1]; ++j)
        n.val[static_cast<long>(j) * sx[0] + i] = xv[static_cast<long>(i) * sx[1] + j];
    return size_ - 1;
  }

  /// Square patch of half-width `half` centered on cell (cx, cy); cells
  /// outside the feature map are zero-filled.
  NodeId extract_patch(NodeId x, int cx, int cy, int half) {
    const Shape& sx = shape(x);
    if (sx.rank != 3) throw ShapeError("extract_patch: expected [c,h,w]");
    const int p = 2 * half + 1;
    Node& n = fresh(Op::extract_patch, Shape::chw(sx[0], p, p), x);
    n.i0 = cx;
    n.i1 = cy;
    n.i2 = half;
    const T* xv = parent_val(x);
    for (int ci = 0; ci < sx[0]; ++ci)
      for (int py = 0; py < p; ++py) {
        const int iy = cy - half + py;
        for (int px = 0; px < p; ++px) {
          const int ix = cx - half + px;
          n.val[(static_cast<long>(ci) * p + py) * p + px] =
              (iy >= 0 && iy < sx[1] && ix >= 0 && ix < sx[2])
                  ? xv[(static_cast<long>(ci) * sx[1] + iy) * sx[2] + ix]
                  : T(0);
        }
      }
    return size_ - 1;
  }

  /// y = x + k (k constant, not differentiated; must outlive the pass).
  NodeId add_const(NodeId x, const T* k) {
    Node& n = fresh(Op::add_const, shape(x), x);
    n.cptr = k;
    const T* xv = parent_val(x);
    for (long i = 0; i < n.shape.numel(); ++i) n.val[i] = xv[i] + k[i];
    return size_ - 1;
  }
  NodeId sub_const(NodeId x, const T* k) {
    Node& n = fresh(Op::sub_const, shape(x), x);
    n.cptr = k;
    const T* xv = parent_val(x);
    for (long i = 0; i < n.shape.numel(); ++i) n.val[i] = xv[i] - k[i];
    return size_ - 1;
  }

  /// Sum of binary cross-entropies against a constant target in {0,1};
  /// predictions clamped to [clamp, 1-clamp].
  NodeId bce_sum(NodeId pred, const T* target, T clamp = T(1e-7)) {
    Node& n = fresh(Op::bce_sum, Shape::scalar(), pred);
    n.cptr = target;
    n.f0 = clamp;
    const T* p = parent_val(pred);
    const long count = nodes_[n.a].shape.numel();
    T acc = 0;
    for (long i = 0; i < count; ++i) {
      const T pc = std::min(std::max(p[i], clamp), T(1) - clamp);
      acc += -(target[i] * std::log(pc) + (T(1) - target[i]) * std::log(T(1) - pc));
    }
    n.val[0] = acc;
    return size_ - 1;
  }

  /// Softmax cross-entropy of logits against a fixed class index.
  NodeId ce_logits(NodeId logits, int target) {
    const Shape& sx = shape(logits);
    const long count = sx.numel();
    if (target < 0 || target >= count) throw ContractError("ce_logits: bad target");
    Node& n = fresh(Op::ce_logits, Shape::scalar(), logits);
    n.i0 = target;
    n.taux.resize(count);
    const T* xv = parent_val(logits);
    T mx = xv[0];
    for (long i = 1; i < count; ++i) mx = std::max(mx, xv[i]);
    T z = 0;
    for (long i = 0; i < count; ++i) z += std::exp(xv[i] - mx);
    const T lse = mx + std::log(z);
    for (long i = 0; i < count; ++i) n.taux[i] = std::exp(xv[i] - lse);
    n.val[0] = lse - xv[target];
    return size_ - 1;
  }

  /// Reverse pass from a scalar loss; gradients accumulate in fixed node
  /// order. Leaf gradients are readable via grad().
  void backward(NodeId loss);

 private:
  std::vector<Node> nodes_;
  int size_ = 0;

  int check(NodeId id) const {
    if (id < 0 || id >= size_) throw ContractError("bad node id");
    return id;
  }

  const T* parent_val(NodeId id) const { return nodes_[check(id)].value(); }

  Node& fresh(Op op, Shape s, int a = -1, int b = -1, int c = -1,
              bool alloc = true) {
    if (size_ == static_cast<int>(nodes_.size())) nodes_.emplace_back();
    Node& n = nodes_[size_++];
    n.op = op;
    n.a = a;
    n.b = b;
    n.c = c;
    n.shape = s;
    n.vptr = nullptr;
    n.cptr = nullptr;
    n.iptr = nullptr;
    n.state0 = n.state1 = nullptr;
    n.i0 = n.i1 = n.i2 = n.i3 = 0;
    n.f0 = n.f1 = T(0);
    n.grad_ready = false;
    n.needs_grad = false;
    for (int pid : {a, b, c})
      if (pid >= 0) n.needs_grad = n.needs_grad || nodes_[check(pid)].needs_grad;
    if (alloc) n.val.resize(static_cast<size_t>(s.numel()));
    return n;
  }

  template <typename F>
  NodeId unary(Op op, NodeId a, F f) {
    Node& n = fresh(op, shape(a), a);
    const T* x = parent_val(n.a);
    for (long i = 0; i < n.shape.numel(); ++i) n.val[i] = f(x[i]);
    return size_ - 1;
  }

  NodeId binary(Op op, NodeId a, NodeId b) {
    if (shape(a) != shape(b))
      throw ShapeError(std::string(op_name(op)) + ": shape mismatch " +
                       shape(a).str() + " vs " + shape(b).str());
    Node& n = fresh(op, shape(a), a, b);
    const T* av = parent_val(a);
    const T* bv = parent_val(b);
    const long count = n.shape.numel();
    switch (op) {
      case Op::add:
        for (long i = 0; i < count; ++i) n.val[i] = av[i] + bv[i];
        break;
      case Op::sub:
        for (long i = 0; i < count; ++i) n.val[i] = av[i] - bv[i];
        break;
      case Op::mul:
        for (long i = 0; i < count; ++i) n.val[i] = av[i] * bv[i];
        break;
      case Op::divide:
        for (long i = 0; i < count; ++i) n.val[i] = av[i] / bv[i];
        break;
      default:
        throw ContractError("not a binary op");
    }
    return size_ - 1;
  }

  static int src_index(int out, int in, int out_total) {
    int s = static_cast<int>((static_cast<long>(out) * 2 + 1) * in / (2 * out_total));
    if (s >= in) s = in - 1;
    return s;
  }

  std::vector<T>& grad_buf(NodeId id) {
    Node& n = nodes_[id];
    if (!n.grad_ready) {
      n.grad.assign(static_cast<size_t>(n.shape.numel()), T(0));
      n.grad_ready = true;
    }
    return n.grad;
  }

  void backward_node(int id);
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace pillarcast::nn
