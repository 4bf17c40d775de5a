#include "pillarcast/kernels.hpp"

#include "conv_detail.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pillarcast::kernels {

template <typename T>
void linear_forward_parallel(const T* x, const T* w, const T* b, T* y, int m,
                             int k, int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    T* yi = y + static_cast<long>(i) * n;
    for (int j = 0; j < n; ++j) yi[j] = b ? b[j] : T(0);
    const T* xi = x + static_cast<long>(i) * k;
    for (int p = 0; p < k; ++p) {
      const T xv = xi[p];
      const T* wp = w + static_cast<long>(p) * n;
      for (int j = 0; j < n; ++j) yi[j] += xv * wp[j];
    }
  }
}

template <typename T>
void linear_backward_x_parallel(const T* dy, const T* w, T* dx, int m, int k,
                                int n) {
#pragma omp parallel for schedule(static)
  for (int i = 0; i < m; ++i) {
    const T* dyi = dy + static_cast<long>(i) * n;
    T* dxi = dx + static_cast<long>(i) * k;
    for (int p = 0; p < k; ++p) {
      const T* wp = w + static_cast<long>(p) * n;
      T a0 = 0, a1 = 0, a2 = 0, a3 = 0;
      int j = 0;
      for (; j + 3 < n; j += 4) {
        a0 += dyi[j] * wp[j];
        a1 += dyi[j + 1] * wp[j + 1];
        a2 += dyi[j + 2] * wp[j + 2];
        a3 += dyi[j + 3] * wp[j + 3];
      }
      for (; j < n; ++j) a0 += dyi[j] * wp[j];
      dxi[p] += ((a0 + a1) + (a2 + a3));
    }
  }
}

template <typename T>
void linear_backward_w_parallel(const T* x, const T* dy, T* dw, int m, int k,
                                int n) {
#pragma omp parallel for schedule(static)
  for (int p = 0; p < k; ++p) {
    T* dwp = dw + static_cast<long>(p) * n;
    for (int i = 0; i < m; ++i) {
      const T xv = x[static_cast<long>(i) * k + p];
      const T* dyi = dy + static_cast<long>(i) * n;
      for (int j = 0; j < n; ++j) dwp[j] += xv * dyi[j];
    }
  }
}

template <typename T>
void conv2d_forward_parallel(const ConvSpec& s, const T* x, const T* wgt,
                             const T* b, T* y) {
  const int oh = s.oh(), ow = s.ow();
#pragma omp parallel for collapse(2) schedule(static)
  for (int co = 0; co < s.co; ++co)
    for (int oy = 0; oy < oh; ++oy)
      detail::conv_row(s, x, wgt, b,
                       y + (static_cast<long>(co) * oh + oy) * ow, co, oy);
}

template <typename T>
void conv2d_backward_x_parallel(const ConvSpec& s, const T* dy, const T* wgt,
                                T* dx) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int ci = 0; ci < s.ci; ++ci)
    for (int iy = 0; iy < s.h; ++iy)
      detail::conv_bwd_x_row(s, dy, wgt,
                             dx + (static_cast<long>(ci) * s.h + iy) * s.w, ci,
                             iy);
}

template <typename T>
void conv2d_backward_w_parallel(const ConvSpec& s, const T* x, const T* dy,
                                T* dw) {
#pragma omp parallel for collapse(2) schedule(static)
  for (int co = 0; co < s.co; ++co)
    for (int ci = 0; ci < s.ci; ++ci)
      detail::conv_bwd_w_pair(
          s, x, dy, dw + ((static_cast<long>(co) * s.ci + ci) * s.kh) * s.kw,
          co, ci);
}

template <typename T>
void segment_max_forward_parallel(const T* x, const int* seg, T* y, int* argmax,
                                  int n, int c, int S) {
  // threads own disjoint channel ranges; per channel the scan order matches
  // the serial reference, so ties resolve identically
#pragma omp parallel for schedule(static)
  for (int j = 0; j < c; ++j) {
    for (int sgi = 0; sgi < S; ++sgi) {
      y[static_cast<long>(sgi) * c + j] = T(0);
      argmax[static_cast<long>(sgi) * c + j] = -1;
    }
    for (int i = 0; i < n; ++i) {
      const int sgi = seg[i];
      if (sgi < 0 || sgi >= S) continue;
      const T xv = x[static_cast<long>(i) * c + j];
      T& yv = y[static_cast<long>(sgi) * c + j];
      int& av = argmax[static_cast<long>(sgi) * c + j];
      if (av < 0 || xv > yv) {
        yv = xv;
        av = i;
      }
    }
  }
}

#define PILLARCAST_INSTANTIATE_PARALLEL(T)                                     \
  template void linear_forward_parallel<T>(const T*, const T*, const T*, T*,  \
                                           int, int, int);                    \
  template void linear_backward_x_parallel<T>(const T*, const T*, T*, int,    \
                                              int, int);                      \
  template void linear_backward_w_parallel<T>(const T*, const T*, T*, int,    \
                                              int, int);                      \
  template void conv2d_forward_parallel<T>(const ConvSpec&, const T*,         \
                                           const T*, const T*, T*);           \
  template void conv2d_backward_x_parallel<T>(const ConvSpec&, const T*,      \
                                              const T*, T*);                  \
  template void conv2d_backward_w_parallel<T>(const ConvSpec&, const T*,      \
                                              const T*, T*);                  \
  template void segment_max_forward_parallel<T>(const T*, const int*, T*,     \
                                                int*, int, int, int);

PILLARCAST_INSTANTIATE_PARALLEL(float)
PILLARCAST_INSTANTIATE_PARALLEL(double)

}  // namespace pillarcast::kernels
