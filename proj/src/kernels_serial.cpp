// Reference kernels: plain loops, no threading. The parallel variants in
// kernels_omp.cpp must match these bitwise.

#include "psim/kernels.hpp"

namespace psim::kernels::serial {

void conv2d_forward(const double* x, const double* w, const double* b, double* y, const Conv2dDims& d) {
  const int64_t in_plane = static_cast<int64_t>(d.h) * d.w;
  const int64_t out_plane = static_cast<int64_t>(d.oh) * d.ow;
  for (int n = 0; n < d.n; ++n) {
    for (int co = 0; co < d.cout; ++co) {
      double* yp = y + (static_cast<int64_t>(n) * d.cout + co) * out_plane;
      for (int oh = 0; oh < d.oh; ++oh) {
        for (int ow = 0; ow < d.ow; ++ow) {
          double acc = b ? b[co] : 0.0;
          for (int ci = 0; ci < d.cin; ++ci) {
            const double* xp = x + (static_cast<int64_t>(n) * d.cin + ci) * in_plane;
            const double* wp = w + (static_cast<int64_t>(co) * d.cin + ci) * d.kh * d.kw;
            for (int kh = 0; kh < d.kh; ++kh) {
              const int ih = oh * d.stride + kh - d.pt;
              if (ih < 0 || ih >= d.h) continue;
              for (int kw = 0; kw < d.kw; ++kw) {
                const int iw = ow * d.stride + kw - d.pl;
                if (iw < 0 || iw >= d.w) continue;
                acc += xp[static_cast<int64_t>(ih) * d.w + iw] * wp[kh * d.kw + kw];
              }
            }
          }
          yp[static_cast<int64_t>(oh) * d.ow + ow] = acc;
        }
      }
    }
  }
}

void conv2d_backward_input(const double* gy, const double* w, double* gx, const Conv2dDims& d) {
  const int64_t in_plane = static_cast<int64_t>(d.h) * d.w;
  const int64_t out_plane = static_cast<int64_t>(d.oh) * d.ow;
  for (int n = 0; n < d.n; ++n) {
    for (int ci = 0; ci < d.cin; ++ci) {
      double* gxp = gx + (static_cast<int64_t>(n) * d.cin + ci) * in_plane;
      for (int co = 0; co < d.cout; ++co) {
        const double* gyp = gy + (static_cast<int64_t>(n) * d.cout + co) * out_plane;
        const double* wp = w + (static_cast<int64_t>(co) * d.cin + ci) * d.kh * d.kw;
        for (int oh = 0; oh < d.oh; ++oh) {
          for (int ow = 0; ow < d.ow; ++ow) {
            const double g = gyp[static_cast<int64_t>(oh) * d.ow + ow];
            for (int kh = 0; kh < d.kh; ++kh) {
              const int ih = oh * d.stride + kh - d.pt;
              if (ih < 0 || ih >= d.h) continue;
              for (int kw = 0; kw < d.kw; ++kw) {
                const int iw = ow * d.stride + kw - d.pl;
                if (iw < 0 || iw >= d.w) continue;
                gxp[static_cast<int64_t>(ih) * d.w + iw] += g * wp[kh * d.kw + kw];
              }
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_weight(const double* gy, const double* x, double* gw, const Conv2dDims& d) {
  const int64_t in_plane = static_cast<int64_t>(d.h) * d.w;
  const int64_t out_plane = static_cast<int64_t>(d.oh) * d.ow;
  for (int co = 0; co < d.cout; ++co) {
    for (int ci = 0; ci < d.cin; ++ci) {
      double* gwp = gw + (static_cast<int64_t>(co) * d.cin + ci) * d.kh * d.kw;
      for (int n = 0; n < d.n; ++n) {
        const double* gyp = gy + (static_cast<int64_t>(n) * d.cout + co) * out_plane;
        const double* xp = x + (static_cast<int64_t>(n) * d.cin + ci) * in_plane;
        for (int oh = 0; oh < d.oh; ++oh) {
          for (int ow = 0; ow < d.ow; ++ow) {
            const double g = gyp[static_cast<int64_t>(oh) * d.ow + ow];
            for (int kh = 0; kh < d.kh; ++kh) {
              const int ih = oh * d.stride + kh - d.pt;
              if (ih < 0 || ih >= d.h) continue;
              for (int kw = 0; kw < d.kw; ++kw) {
                const int iw = ow * d.stride + kw - d.pl;
                if (iw < 0 || iw >= d.w) continue;
                gwp[kh * d.kw + kw] += g * xp[static_cast<int64_t>(ih) * d.w + iw];
              }
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_bias(const double* gy, double* gb, const Conv2dDims& d) {
  const int64_t out_plane = static_cast<int64_t>(d.oh) * d.ow;
  for (int co = 0; co < d.cout; ++co) {
    double acc = 0.0;
    for (int n = 0; n < d.n; ++n) {
      const double* gyp = gy + (static_cast<int64_t>(n) * d.cout + co) * out_plane;
      for (int64_t i = 0; i < out_plane; ++i) acc += gyp[i];
    }
    gb[co] += acc;
  }
}

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    double* ci = c + static_cast<int64_t>(i) * n;
    for (int j = 0; j < n; ++j) ci[j] = 0.0;
    for (int p = 0; p < k; ++p) {
      const double aip = a[static_cast<int64_t>(i) * k + p];
      const double* bp = b + static_cast<int64_t>(p) * n;
      for (int j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_at_b(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int p = 0; p < k; ++p) {
    double* cp = c + static_cast<int64_t>(p) * n;
    for (int j = 0; j < n; ++j) cp[j] = 0.0;
    for (int i = 0; i < m; ++i) {
      const double aip = a[static_cast<int64_t>(i) * k + p];
      const double* bi = b + static_cast<int64_t>(i) * n;
      for (int j = 0; j < n; ++j) cp[j] += aip * bi[j];
    }
  }
}

void matmul_a_bt(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    const double* ai = a + static_cast<int64_t>(i) * n;
    double* ci = c + static_cast<int64_t>(i) * k;
    for (int p = 0; p < k; ++p) {
      const double* bp = b + static_cast<int64_t>(p) * n;
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += ai[j] * bp[j];
      ci[p] = acc;
    }
  }
}

void maxpool_forward(const double* x, double* y, int64_t* argmax, const PoolDims& d) {
  const int64_t in_plane = static_cast<int64_t>(d.h) * d.w;
  const int64_t out_plane = static_cast<int64_t>(d.oh) * d.ow;
  for (int nc = 0; nc < d.n * d.c; ++nc) {
    const double* xp = x + nc * in_plane;
    double* yp = y + nc * out_plane;
    int64_t* ap = argmax + nc * out_plane;
    for (int oh = 0; oh < d.oh; ++oh) {
      for (int ow = 0; ow < d.ow; ++ow) {
        double best = -1e300;
        int64_t best_idx = -1;
        for (int kh = 0; kh < d.kernel; ++kh) {
          const int ih = oh * d.stride + kh;
          for (int kw = 0; kw < d.kernel; ++kw) {
            const int iw = ow * d.stride + kw;
            const double v = xp[static_cast<int64_t>(ih) * d.w + iw];
            if (v > best) {
              best = v;
              best_idx = nc * in_plane + static_cast<int64_t>(ih) * d.w + iw;
            }
          }
        }
        yp[static_cast<int64_t>(oh) * d.ow + ow] = best;
        ap[static_cast<int64_t>(oh) * d.ow + ow] = best_idx;
      }
    }
  }
}

void maxpool_backward(const double* gy, const int64_t* argmax, double* gx, const PoolDims& d) {
  const int64_t out_plane = static_cast<int64_t>(d.oh) * d.ow;
  for (int nc = 0; nc < d.n * d.c; ++nc) {
    const double* gyp = gy + nc * out_plane;
    const int64_t* ap = argmax + nc * out_plane;
    for (int64_t i = 0; i < out_plane; ++i) gx[ap[i]] += gyp[i];
  }
}

void global_avg_pool_forward(const double* x, double* y, int n, int c, int h, int w) {
  const int64_t plane = static_cast<int64_t>(h) * w;
  for (int nc = 0; nc < n * c; ++nc) {
    const double* xp = x + nc * plane;
    double acc = 0.0;
    for (int64_t i = 0; i < plane; ++i) acc += xp[i];
    y[nc] = acc / static_cast<double>(plane);
  }
}

void global_avg_pool_backward(const double* gy, double* gx, int n, int c, int h, int w) {
  const int64_t plane = static_cast<int64_t>(h) * w;
  for (int nc = 0; nc < n * c; ++nc) {
    const double g = gy[nc] / static_cast<double>(plane);
    double* gxp = gx + nc * plane;
    for (int64_t i = 0; i < plane; ++i) gxp[i] += g;
  }
}

void upsample_nails_forward(const double* x, double* y, int n, int c, int h, int w, int factor) {
  const int64_t in_plane = static_cast<int64_t>(h) * w;
  const int oh = h * factor, ow = w * factor;
  const int64_t out_plane = static_cast<int64_t>(oh) * ow;
  for (int nc = 0; nc < n * c; ++nc) {
    const double* xp = x + nc * in_plane;
    double* yp = y + nc * out_plane;
    for (int64_t i = 0; i < out_plane; ++i) yp[i] = 0.0;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        yp[static_cast<int64_t>(i) * factor * ow + static_cast<int64_t>(j) * factor] =
            xp[static_cast<int64_t>(i) * w + j];
  }
}

void upsample_nails_backward(const double* gy, double* gx, int n, int c, int h, int w, int factor) {
  const int64_t in_plane = static_cast<int64_t>(h) * w;
  const int ow = w * factor;
  const int64_t out_plane = static_cast<int64_t>(h) * factor * ow;
  for (int nc = 0; nc < n * c; ++nc) {
    const double* gyp = gy + nc * out_plane;
    double* gxp = gx + nc * in_plane;
    for (int i = 0; i < h; ++i)
      for (int j = 0; j < w; ++j)
        gxp[static_cast<int64_t>(i) * w + j] +=
            gyp[static_cast<int64_t>(i) * factor * ow + static_cast<int64_t>(j) * factor];
  }
}

}  // namespace psim::kernels::serial
