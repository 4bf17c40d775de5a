#include "pillarcast/tape.hpp"

namespace pillarcast::nn {

const char* op_name(Op op) {
  switch (op) {
    case Op::input: return "input";
    case Op::add: return "add";
    case Op::sub: return "sub";
    case Op::mul: return "mul";
    case Op::divide: return "divide";
    case Op::scale_shift: return "scale_shift";
    case Op::relu: return "relu";
    case Op::sigmoid: return "sigmoid";
    case Op::tanh_fn: return "tanh";
    case Op::exp_fn: return "exp";
    case Op::log_fn: return "log";
    case Op::cosh_fn: return "cosh";
    case Op::sum_all: return "sum";
    case Op::mean_all: return "mean";
    case Op::linear: return "linear";
    case Op::conv2d: return "conv2d";
    case Op::batchnorm: return "batchnorm";
    case Op::segment_max: return "segment_max";
    case Op::avg_pool2: return "avg_pool2";
    case Op::resize_nearest: return "resize_nearest";
    case Op::softmax: return "softmax";
    case Op::concat_chan: return "concat_chan";
    case Op::concat_vec: return "concat_vec";
    case Op::slice_cols: return "slice_cols";
    case Op::take_row: return "take_row";
    case Op::reshape: return "reshape";
    case Op::transpose2d: return "transpose2d";
    case Op::extract_patch: return "extract_patch";
    case Op::add_const: return "add_const";
    case Op::sub_const: return "sub_const";
    case Op::bce_sum: return "bce_sum";
    case Op::ce_logits: return "ce_logits";
  }
  return "?";
}

template <typename T>
void Tape<T>::backward(NodeId loss) {
  check(loss);
  if (nodes_[loss].shape.numel() != 1)
    throw ContractError("backward: loss must be a scalar, got " +
                        nodes_[loss].shape.str());
  for (int i = 0; i < size_; ++i) nodes_[i].grad_ready = false;
  grad_buf(loss)[0] = T(1);
  for (int id = loss; id >= 0; --id) {
    const Node& n = nodes_[id];
    if (n.op == Op::input || !n.needs_grad || !n.grad_ready) continue;
    backward_node(id);
  }
}

template <typename T>
void Tape<T>::backward_node(int id) {
  Node& n = nodes_[id];
  const T* dy = n.grad.data();
  const long count = n.shape.numel();

  auto wants = [&](int pid) { return pid >= 0 && nodes_[pid].needs_grad; };

  switch (n.op) {
    case Op::input:
      break;

    case Op::add: {
      if (wants(n.a)) {
        T* da = grad_buf(n.a).data();
        for (long i = 0; i < count; ++i) da[i] += dy[i];
      }
      if (wants(n.b)) {
        T* db = grad_buf(n.b).data();
        for (long i = 0; i < count; ++i) db[i] += dy[i];
      }
      break;
    }
    case Op::sub: {
      if (wants(n.a)) {
        T* da = grad_buf(n.a).data();
        for (long i = 0; i < count; ++i) da[i] += dy[i];
      }
      if (wants(n.b)) {
        T* db = grad_buf(n.b).data();
        for (long i = 0; i < count; ++i) db[i] -= dy[i];
      }
      break;
    }
    case Op::mul: {
      const T* av = nodes_[n.a].value();
      const T* bv = nodes_[n.b].value();
      if (wants(n.a)) {
        T* da = grad_buf(n.a).data();
        for (long i = 0; i < count; ++i) da[i] += dy[i] * bv[i];
      }
      if (wants(n.b)) {
        T* db = grad_buf(n.b).data();
        for (long i = 0; i < count; ++i) db[i] += dy[i] * av[i];
      }
      break;
    }
    case Op::divide: {
      const T* bv = nodes_[n.b].value();
      const T* yv = n.val.data();
      if (wants(n.a)) {
        T* da = grad_buf(n.a).data();
        for (long i = 0; i < count; ++i) da[i] += dy[i] / bv[i];
      }
      if (wants(n.b)) {
        T* db = grad_buf(n.b).data();
        for (long i = 0; i < count; ++i) db[i] -= dy[i] * yv[i] / bv[i];
      }
      break;
    }
    case Op::scale_shift: {
      if (wants(n.a)) {
        T* da = grad_buf(n.a).data();
        for (long i = 0; i < count; ++i) da[i] += n.f0 * dy[i];
      }
      break;
    }
    case Op::relu: {
      if (wants(n.a)) {
        const T* xv = nodes_[n.a].value();
        T* da = grad_buf(n.a).data();
        for (long i = 0; i < count; ++i)
          if (xv[i] > T(0)) da[i] += dy[i];
      }
      break;
    }
    case Op::sigmoid: {
      if (wants(n.a)) {
        T* da = grad_buf(n.a).data();
        for (long i = 0; i < count; ++i)
          da[i] += dy[i] * n.val[i] * (T(1) - n.val[i]);
      }
      break;
    }
    case Op::tanh_fn: {
      if (wants(n.a)) {
        T* da = grad_buf(n.a).data();
        for (long i = 0; i < count; ++i)
          da[i] += dy[i] * (T(1) - n.val[i] * n.val[i]);
      }
      break;
    }
    case Op::exp_fn: {
      if (wants(n.a)) {
        T* da = grad_buf(n.a).data();
        for (long i = 0; i < count; ++i) da[i] += dy[i] * n.val[i];
      }
      break;
    }
    case Op::log_fn: {
      if (wants(n.a)) {
        const T* xv = nodes_[n.a].value();
        T* da = grad_buf(n.a).data();
        for (long i = 0; i < count; ++i) da[i] += dy[i] / xv[i];
      }
      break;
    }
    case Op::cosh_fn: {
      if (wants(n.a)) {
        const T* xv = nodes_[n.a].value();
        T* da = grad_buf(n.a).data();
        for (long i = 0; i < count; ++i) da[i] += dy[i] * std::sinh(xv[i]);
      }
      break;
    }
    case Op::sum_all: {
      if (wants(n.a)) {
        const long pc = nodes_[n.a].shape.numel();
        T* da = grad_buf(n.a).data();
        for (long i = 0; i < pc; ++i) da[i] += dy[0];
      }
      break;
    }
    case Op::mean_all: {
      if (wants(n.a)) {
        const long pc = nodes_[n.a].shape.numel();
        const T g = dy[0] / static_cast<T>(pc);
        T* da = grad_buf(n.a).data();
        for (long i = 0; i < pc; ++i) da[i] += g;
      }
      break;
    }
    case Op::linear: {
      const Shape& sx = nodes_[n.a].shape;
      const Shape& sw = nodes_[n.b].shape;
      const int m = sx[0], k = sx[1], nn = sw[1];
      if (wants(n.a))
        kernels::linear_backward_x(dy, nodes_[n.b].value(),
                                   grad_buf(n.a).data(), m, k, nn);
      if (wants(n.b))
        kernels::linear_backward_w(nodes_[n.a].value(), dy,
                                   grad_buf(n.b).data(), m, k, nn);
      if (wants(n.c))
        kernels::linear_backward_b(dy, grad_buf(n.c).data(), m, nn);
      break;
    }
    case Op::conv2d: {
      const Shape& sx = nodes_[n.a].shape;
      const Shape& sw = nodes_[n.b].shape;
      kernels::ConvSpec spec{sx[0], sx[1], sx[2], sw[0],
                             sw[2], sw[3], n.i0,  n.i1};
      if (wants(n.a))
        kernels::conv2d_backward_x(spec, dy, nodes_[n.b].value(),
                                   grad_buf(n.a).data());
      if (wants(n.b))
        kernels::conv2d_backward_w(spec, nodes_[n.a].value(), dy,
                                   grad_buf(n.b).data());
      if (wants(n.c)) kernels::conv2d_backward_b(spec, dy, grad_buf(n.c).data());
      break;
    }
    case Op::batchnorm: {
      const Shape& sx = nodes_[n.a].shape;
      const int m = sx[0], c = sx[1];
      const T* xv = nodes_[n.a].value();
      const T* g = nodes_[n.b].value();
      const bool training = n.i0 == 1;
      std::vector<T> dbeta(c, T(0)), dgamma(c, T(0));
      for (int j = 0; j < c; ++j) {
        const T mu = n.taux[j], is = n.taux[c + j];
        T sb = 0, sg = 0;
        for (int i = 0; i < m; ++i) {
          const long idx = static_cast<long>(i) * c + j;
          sb += dy[idx];
          sg += dy[idx] * (xv[idx] - mu) * is;
        }
        dbeta[j] = sb;
        dgamma[j] = sg;
      }
      if (wants(n.c)) {
        T* dc = grad_buf(n.c).data();
        for (int j = 0; j < c; ++j) dc[j] += dbeta[j];
      }
      if (wants(n.b)) {
        T* db = grad_buf(n.b).data();
        for (int j = 0; j < c; ++j) db[j] += dgamma[j];
      }
      if (wants(n.a)) {
        T* da = grad_buf(n.a).data();
        for (int j = 0; j < c; ++j) {
          const T mu = n.taux[j], is = n.taux[c + j];
          const T gj = g[j];
          if (training) {
            const T mb = dbeta[j] / static_cast<T>(m);
            const T mg = dgamma[j] / static_cast<T>(m);
            for (int i = 0; i < m; ++i) {
              const long idx = static_cast<long>(i) * c + j;
              const T xhat = (xv[idx] - mu) * is;
              da[idx] += gj * is * (dy[idx] - mb - xhat * mg);
            }
          } else {
            for (int i = 0; i < m; ++i) {
              const long idx = static_cast<long>(i) * c + j;
              da[idx] += dy[idx] * gj * is;
            }
          }
        }
      }
      break;
    }
    case Op::segment_max: {
      if (wants(n.a)) {
        const int c = n.shape[1];
        T* da = grad_buf(n.a).data();
        for (int s = 0; s < n.i0; ++s)
          for (int j = 0; j < c; ++j) {
            const int i = n.iaux[static_cast<long>(s) * c + j];
            if (i >= 0) da[static_cast<long>(i) * c + j] += dy[static_cast<long>(s) * c + j];
          }
      }
      break;
    }
    case Op::avg_pool2: {
      if (wants(n.a)) {
        const Shape& sx = nodes_[n.a].shape;
        const int oh = n.shape[1], ow = n.shape[2];
        T* da = grad_buf(n.a).data();
        for (int ci = 0; ci < sx[0]; ++ci)
          for (int oy = 0; oy < oh; ++oy)
            for (int ox = 0; ox < ow; ++ox) {
              const T gq = dy[(static_cast<long>(ci) * oh + oy) * ow + ox] * T(0.25);
              T* base = da + (static_cast<long>(ci) * sx[1] + 2 * oy) * sx[2] + 2 * ox;
              base[0] += gq;
              base[1] += gq;
              base[sx[2]] += gq;
              base[sx[2] + 1] += gq;
            }
      }
      break;
    }
    case Op::resize_nearest: {
      if (wants(n.a)) {
        const Shape& sx = nodes_[n.a].shape;
        const int oh = n.i0, ow = n.i1;
        T* da = grad_buf(n.a).data();
        for (int ci = 0; ci < sx[0]; ++ci)
          for (int oy = 0; oy < oh; ++oy) {
            const int sy = src_index(oy, sx[1], oh);
            for (int ox = 0; ox < ow; ++ox) {
              const int sxi = src_index(ox, sx[2], ow);
              da[(static_cast<long>(ci) * sx[1] + sy) * sx[2] + sxi] +=
                  dy[(static_cast<long>(ci) * oh + oy) * ow + ox];
            }
          }
      }
      break;
    }
    case Op::softmax: {
      if (wants(n.a)) {
        T dot = 0;
        for (long i = 0; i < count; ++i) dot += dy[i] * n.val[i];
        T* da = grad_buf(n.a).data();
        for (long i = 0; i < count; ++i) da[i] += n.val[i] * (dy[i] - dot);
      }
      break;
    }
    case Op::concat_chan:
    case Op::concat_vec: {
      const long na = nodes_[n.a].shape.numel();
      const long nb = nodes_[n.b].shape.numel();
      if (wants(n.a)) {
        T* da = grad_buf(n.a).data();
        for (long i = 0; i < na; ++i) da[i] += dy[i];
      }
      if (wants(n.b)) {
        T* db = grad_buf(n.b).data();
        for (long i = 0; i < nb; ++i) db[i] += dy[na + i];
      }
      break;
    }
    case Op::slice_cols: {
      if (wants(n.a)) {
        const Shape& sx = nodes_[n.a].shape;
        const int w = n.i1 - n.i0;
        T* da = grad_buf(n.a).data();
        for (int i = 0; i < sx[0]; ++i)
          for (int j = 0; j < w; ++j)
            da[static_cast<long>(i) * sx[1] + n.i0 + j] +=
                dy[static_cast<long>(i) * w + j];
      }
      break;
    }
    case Op::take_row: {
      if (wants(n.a)) {
        const Shape& sx = nodes_[n.a].shape;
        T* da = grad_buf(n.a).data();
        for (int j = 0; j < sx[1]; ++j)
          da[static_cast<long>(n.i0) * sx[1] + j] += dy[j];
      }
      break;
    }
    case Op::reshape: {
      if (wants(n.a)) {
        T* da = grad_buf(n.a).data();
        for (long i = 0; i < count; ++i) da[i] += dy[i];
      }
      break;
    }
    case Op::transpose2d: {
      if (wants(n.a)) {
        const Shape& sx = nodes_[n.a].shape;
        T* da = grad_buf(n.a).data();
        for (int i = 0; i < sx[0]; ++i)
          for (int j = 0; j < sx[1]; ++j)
            da[static_cast<long>(i) * sx[1] + j] +=
                dy[static_cast<long>(j) * sx[0] + i];
      }
      break;
    }
    case Op::extract_patch: {
      if (wants(n.a)) {
        const Shape& sx = nodes_[n.a].shape;
        const int p = 2 * n.i2 + 1;
        T* da = grad_buf(n.a).data();
        for (int ci = 0; ci < sx[0]; ++ci)
          for (int py = 0; py < p; ++py) {
            const int iy = n.i1 - n.i2 + py;
            if (iy < 0 || iy >= sx[1]) continue;
            for (int px = 0; px < p; ++px) {
              const int ix = n.i0 - n.i2 + px;
              if (ix < 0 || ix >= sx[2]) continue;
              da[(static_cast<long>(ci) * sx[1] + iy) * sx[2] + ix] +=
                  dy[(static_cast<long>(ci) * p + py) * p + px];
            }
          }
      }
      break;
    }
    case Op::add_const:
    case Op::sub_const: {
      if (wants(n.a)) {
        T* da = grad_buf(n.a).data();
        for (long i = 0; i < count; ++i) da[i] += dy[i];
      }
      break;
    }
    case Op::bce_sum: {
      if (wants(n.a)) {
        const T* p = nodes_[n.a].value();
        const long pc = nodes_[n.a].shape.numel();
        const T lo = n.f0, hi = T(1) - n.f0;
        T* da = grad_buf(n.a).data();
        for (long i = 0; i < pc; ++i) {
          if (p[i] <= lo || p[i] >= hi) continue;  // clamped: zero slope
          da[i] += dy[0] * (p[i] - n.cptr[i]) / (p[i] * (T(1) - p[i]));
        }
      }
      break;
    }
    case Op::ce_logits: {
      if (wants(n.a)) {
        const long pc = nodes_[n.a].shape.numel();
        T* da = grad_buf(n.a).data();
        for (long i = 0; i < pc; ++i)
          da[i] += dy[0] * (n.taux[i] - (i == n.i0 ? T(1) : T(0)));
      }
      break;
    }
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace pillarcast::nn
