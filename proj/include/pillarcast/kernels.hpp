#pragma once

// Hot inner loops of the network, each in a serial reference version and an
// OpenMP version. The parallel kernels assign every output element to exactly
// one thread and keep each element's reduction order fixed, so results are
// bit-identical to the serial reference at any thread count. Dispatch is
// runtime-switchable; benchmarks and determinism-sensitive paths force the
// serial path.

namespace pillarcast::kernels {

void set_parallel(bool enabled);
bool parallel_enabled();

/// Forces the serial path within a scope (used inside timed regions).
struct SerialGuard {
  SerialGuard();
  ~SerialGuard();
  bool saved;
};

// y[m,n] = x[m,k] * w[k,n] + b[n]   (b optional)
template <typename T>
void linear_forward_serial(const T* x, const T* w, const T* b, T* y, int m,
                           int k, int n);
template <typename T>
void linear_forward_parallel(const T* x, const T* w, const T* b, T* y, int m,
                             int k, int n);
template <typename T>
void linear_forward(const T* x, const T* w, const T* b, T* y, int m, int k,
                    int n);

// dx[m,k] += dy[m,n] * w^T;  dw[k,n] += x^T * dy;  db[n] += colsum(dy)
template <typename T>
void linear_backward_x_serial(const T* dy, const T* w, T* dx, int m, int k, int n);
template <typename T>
void linear_backward_x_parallel(const T* dy, const T* w, T* dx, int m, int k, int n);
template <typename T>
void linear_backward_x(const T* dy, const T* w, T* dx, int m, int k, int n);

template <typename T>
void linear_backward_w_serial(const T* x, const T* dy, T* dw, int m, int k, int n);
template <typename T>
void linear_backward_w_parallel(const T* x, const T* dy, T* dw, int m, int k, int n);
template <typename T>
void linear_backward_w(const T* x, const T* dy, T* dw, int m, int k, int n);

template <typename T>
void linear_backward_b(const T* dy, T* db, int m, int n);

// Conv2d on [C,H,W] tensors, weights [Co,Ci,kh,kw], zero padding.
struct ConvSpec {
  int ci, h, w;
  int co, kh, kw;
  int stride, pad;
  int oh() const { return (h + 2 * pad - kh) / stride + 1; }
  int ow() const { return (w + 2 * pad - kw) / stride + 1; }
};

template <typename T>
void conv2d_forward_serial(const ConvSpec& s, const T* x, const T* wgt,
                           const T* b, T* y);
template <typename T>
void conv2d_forward_parallel(const ConvSpec& s, const T* x, const T* wgt,
                             const T* b, T* y);
template <typename T>
void conv2d_forward(const ConvSpec& s, const T* x, const T* wgt, const T* b,
                    T* y);

template <typename T>
void conv2d_backward_x_serial(const ConvSpec& s, const T* dy, const T* wgt, T* dx);
template <typename T>
void conv2d_backward_x_parallel(const ConvSpec& s, const T* dy, const T* wgt, T* dx);
template <typename T>
void conv2d_backward_x(const ConvSpec& s, const T* dy, const T* wgt, T* dx);

template <typename T>
void conv2d_backward_w_serial(const ConvSpec& s, const T* x, const T* dy, T* dw);
template <typename T>
void conv2d_backward_w_parallel(const ConvSpec& s, const T* x, const T* dy, T* dw);
template <typename T>
void conv2d_backward_w(const ConvSpec& s, const T* x, const T* dy, T* dw);

template <typename T>
void conv2d_backward_b(const ConvSpec& s, const T* dy, T* db);

// Per-segment coordinate-wise max over x[n,c] with segment ids seg[n] in
// [0,S). Empty segments yield zeros; argmax[S*c] records winners (-1 when
// empty), ties go to the lowest point index.
template <typename T>
void segment_max_forward_serial(const T* x, const int* seg, T* y, int* argmax,
                                int n, int c, int S);
template <typename T>
void segment_max_forward_parallel(const T* x, const int* seg, T* y, int* argmax,
                                  int n, int c, int S);
template <typename T>
void segment_max_forward(const T* x, const int* seg, T* y, int* argmax, int n,
                         int c, int S);

}  // namespace pillarcast::kernels
