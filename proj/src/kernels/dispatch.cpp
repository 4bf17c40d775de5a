#include <atomic>

#include "pillarcast/kernels.hpp"

namespace pillarcast::kernels {

namespace {
std::atomic<bool> g_parallel{true};
}

void set_parallel(bool enabled) { g_parallel.store(enabled); }
bool parallel_enabled() { return g_parallel.load(); }

SerialGuard::SerialGuard() : saved(parallel_enabled()) { set_parallel(false); }
SerialGuard::~SerialGuard() { set_parallel(saved); }

template <typename T>
void linear_forward(const T* x, const T* w, const T* b, T* y, int m, int k,
                    int n) {
  if (parallel_enabled())
    linear_forward_parallel(x, w, b, y, m, k, n);
  else
    linear_forward_serial(x, w, b, y, m, k, n);
}

template <typename T>
void linear_backward_x(const T* dy, const T* w, T* dx, int m, int k, int n) {
  if (parallel_enabled())
    linear_backward_x_parallel(dy, w, dx, m, k, n);
  else
    linear_backward_x_serial(dy, w, dx, m, k, n);
}

template <typename T>
void linear_backward_w(const T* x, const T* dy, T* dw, int m, int k, int n) {
  if (parallel_enabled())
    linear_backward_w_parallel(x, dy, dw, m, k, n);
  else
    linear_backward_w_serial(x, dy, dw, m, k, n);
}

template <typename T>
void conv2d_forward(const ConvSpec& s, const T* x, const T* wgt, const T* b,
                    T* y) {
  if (parallel_enabled())
    conv2d_forward_parallel(s, x, wgt, b, y);
  else
    conv2d_forward_serial(s, x, wgt, b, y);
}

template <typename T>
void conv2d_backward_x(const ConvSpec& s, const T* dy, const T* wgt, T* dx) {
  if (parallel_enabled())
    conv2d_backward_x_parallel(s, dy, wgt, dx);
  else
    conv2d_backward_x_serial(s, dy, wgt, dx);
}

template <typename T>
void conv2d_backward_w(const ConvSpec& s, const T* x, const T* dy, T* dw) {
  if (parallel_enabled())
    conv2d_backward_w_parallel(s, x, dy, dw);
  else
    conv2d_backward_w_serial(s, x, dy, dw);
}

template <typename T>
void segment_max_forward(const T* x, const int* seg, T* y, int* argmax, int n,
                         int c, int S) {
  if (parallel_enabled())
    segment_max_forward_parallel(x, seg, y, argmax, n, c, S);
  else
    segment_max_forward_serial(x, seg, y, argmax, n, c, S);
}

#define PILLARCAST_INSTANTIATE_DISPATCH(T)                                     \
  template void linear_forward<T>(const T*, const T*, const T*, T*, int, int, \
                                  int);                                       \
  template void linear_backward_x<T>(const T*, const T*, T*, int, int, int);  \
  template void linear_backward_w<T>(const T*, const T*, T*, int, int, int);  \
  template void conv2d_forward<T>(const ConvSpec&, const T*, const T*,        \
                                  const T*, T*);                              \
  template void conv2d_backward_x<T>(const ConvSpec&, const T*, const T*,     \
                                     T*);                                     \
  template void conv2d_backward_w<T>(const ConvSpec&, const T*, const T*,     \
                                     T*);                                     \
  template void segment_max_forward<T>(const T*, const int*, T*, int*, int,   \
                                       int, int);

PILLARCAST_INSTANTIATE_DISPATCH(float)
PILLARCAST_INSTANTIATE_DISPATCH(double)

}  // namespace pillarcast::kernels
