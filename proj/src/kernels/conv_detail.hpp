#pragma once

#include <algorithm>

#include "pillarcast/kernels.hpp"

// Shared per-row conv helpers. Serial and OpenMP kernels both call these, so
// any parallel split over rows reproduces the serial reduction order exactly.

namespace pillarcast::kernels {
namespace detail {

// One output row with hoisted bounds (stride-1 fast path): for every weight
// tap, accumulate a contiguous span of the input row.
template <typename T>
void conv_row_stride1(const ConvSpec& s, const T* x, const T* wgt, const T* b,
                      T* yrow, int co, int oy) {
  const int ow = s.ow();
  const T bias = b ? b[co] : T(0);
  for (int ox = 0; ox < ow; ++ox) yrow[ox] = bias;
  for (int ci = 0; ci < s.ci; ++ci) {
    const T* xc = x + static_cast<long>(ci) * s.h * s.w;
    const T* wc = wgt + ((static_cast<long>(co) * s.ci + ci) * s.kh) * s.kw;
    for (int ky = 0; ky < s.kh; ++ky) {
      const int iy = oy - s.pad + ky;
      if (iy < 0 || iy >= s.h) continue;
      const T* xrow = xc + static_cast<long>(iy) * s.w;
      for (int kx = 0; kx < s.kw; ++kx) {
        const T wv = wc[ky * s.kw + kx];
        const int shift = kx - s.pad;
        const int ox0 = std::max(0, -shift);
        const int ox1 = std::min(ow, s.w - shift);
        const T* xs = xrow + shift;
        for (int ox = ox0; ox < ox1; ++ox) yrow[ox] += wv * xs[ox];
      }
    }
  }
}

template <typename T>
void conv_row_generic(const ConvSpec& s, const T* x, const T* wgt, const T* b,
                      T* yrow, int co, int oy) {
  const int ow = s.ow();
  const T bias = b ? b[co] : T(0);
  const int iy0 = oy * s.stride - s.pad;
  for (int ox = 0; ox < ow; ++ox) {
    T acc = bias;
    const int ix0 = ox * s.stride - s.pad;
    for (int ci = 0; ci < s.ci; ++ci) {
      const T* xc = x + static_cast<long>(ci) * s.h * s.w;
      const T* wc = wgt + ((static_cast<long>(co) * s.ci + ci) * s.kh) * s.kw;
      for (int ky = 0; ky < s.kh; ++ky) {
        const int iy = iy0 + ky;
        if (iy < 0 || iy >= s.h) continue;
        for (int kx = 0; kx < s.kw; ++kx) {
          const int ix = ix0 + kx;
          if (ix < 0 || ix >= s.w) continue;
          acc += xc[static_cast<long>(iy) * s.w + ix] * wc[ky * s.kw + kx];
        }
      }
    }
    yrow[ox] = acc;
  }
}

template <typename T>
void conv_row(const ConvSpec& s, const T* x, const T* wgt, const T* b, T* yrow,
              int co, int oy) {
  if (s.stride == 1)
    conv_row_stride1(s, x, wgt, b, yrow, co, oy);
  else
    conv_row_generic(s, x, wgt, b, yrow, co, oy);
}

// Gradient of one input row (stride-1 fast path), gather formulation.
template <typename T>
void conv_bwd_x_row_stride1(const ConvSpec& s, const T* dy, const T* wgt,
                            T* dxrow, int ci, int iy) {
  const int oh = s.oh(), ow = s.ow();
  for (int co = 0; co < s.co; ++co) {
    const T* dyc = dy + static_cast<long>(co) * oh * ow;
    const T* wc = wgt + ((static_cast<long>(co) * s.ci + ci) * s.kh) * s.kw;
    for (int ky = 0; ky < s.kh; ++ky) {
      const int oy = iy + s.pad - ky;
      if (oy < 0 || oy >= oh) continue;
      const T* dyrow = dyc + static_cast<long>(oy) * ow;
      for (int kx = 0; kx < s.kw; ++kx) {
        const T wv = wc[ky * s.kw + kx];
        const int shift = s.pad - kx;  // ox = ix + shift
        const int ix0 = std::max(0, -shift);
        const int ix1 = std::min(s.w, ow - shift);
        const T* ds = dyrow + shift;
        for (int ix = ix0; ix < ix1; ++ix) dxrow[ix] += wv * ds[ix];
      }
    }
  }
}

template <typename T>
void conv_bwd_x_row_generic(const ConvSpec& s, const T* dy, const T* wgt,
                            T* dxrow, int ci, int iy) {
  const int oh = s.oh(), ow = s.ow();
  for (int ix = 0; ix < s.w; ++ix) {
    T acc = 0;
    for (int co = 0; co < s.co; ++co) {
      const T* dyc = dy + static_cast<long>(co) * oh * ow;
      const T* wc = wgt + ((static_cast<long>(co) * s.ci + ci) * s.kh) * s.kw;
      for (int ky = 0; ky < s.kh; ++ky) {
        const int num = iy + s.pad - ky;
        if (num < 0 || num % s.stride != 0) continue;
        const int oy = num / s.stride;
        if (oy >= oh) continue;
        for (int kx = 0; kx < s.kw; ++kx) {
          const int numx = ix + s.pad - kx;
          if (numx < 0 || numx % s.stride != 0) continue;
          const int ox = numx / s.stride;
          if (ox >= ow) continue;
          acc += dyc[static_cast<long>(oy) * ow + ox] * wc[ky * s.kw + kx];
        }
      }
    }
    dxrow[ix] += acc;
  }
}

template <typename T>
void conv_bwd_x_row(const ConvSpec& s, const T* dy, const T* wgt, T* dxrow,
                    int ci, int iy) {
  if (s.stride == 1)
    conv_bwd_x_row_stride1(s, dy, wgt, dxrow, ci, iy);
  else
    conv_bwd_x_row_generic(s, dy, wgt, dxrow, ci, iy);
}

// Weight gradient for one (co, ci) pair with hoisted ox spans.
template <typename T>
void conv_bwd_w_pair(const ConvSpec& s, const T* x, const T* dy, T* wc, int co,
                     int ci) {
  const int oh = s.oh(), ow = s.ow();
  const T* dyc = dy + static_cast<long>(co) * oh * ow;
  const T* xc = x + static_cast<long>(ci) * s.h * s.w;
  for (int ky = 0; ky < s.kh; ++ky) {
    for (int kx = 0; kx < s.kw; ++kx) {
      T acc = 0;
      if (s.stride == 1) {
        const int shift = kx - s.pad;  // ix = ox + shift
        const int ox0 = std::max(0, -shift);
        const int ox1 = std::min(ow, s.w - shift);
        T a0 = 0, a1 = 0, a2 = 0, a3 = 0;  // 4-way dot product
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy - s.pad + ky;
          if (iy < 0 || iy >= s.h) continue;
          const T* xrow = xc + static_cast<long>(iy) * s.w + shift;
          const T* dyrow = dyc + static_cast<long>(oy) * ow;
          int ox = ox0;
          for (; ox + 3 < ox1; ox += 4) {
            a0 += xrow[ox] * dyrow[ox];
            a1 += xrow[ox + 1] * dyrow[ox + 1];
            a2 += xrow[ox + 2] * dyrow[ox + 2];
            a3 += xrow[ox + 3] * dyrow[ox + 3];
          }
          for (; ox < ox1; ++ox) a0 += xrow[ox] * dyrow[ox];
        }
        acc = ((a0 + a1) + (a2 + a3));
      } else {
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * s.stride - s.pad + ky;
          if (iy < 0 || iy >= s.h) continue;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * s.stride - s.pad + kx;
            if (ix < 0 || ix >= s.w) continue;
            acc += xc[static_cast<long>(iy) * s.w + ix] *
                   dyc[static_cast<long>(oy) * ow + ox];
          }
        }
      }
      wc[ky * s.kw + kx] += acc;
    }
  }
}

}  // namespace detail

}  // namespace pillarcast::kernels
