#pragma once

// Dense compute kernels behind the autodiff ops. The default entry points are
// OpenMP-parallel; psim::kernels::serial holds the plain-loop reference
// implementations used by the parity tests and the benchmark. Both variants
// compute every output element with the same serial reduction order, so their
// results are bitwise identical for any thread count.

#include <cstdint>

namespace psim::kernels {

struct Conv2dDims {
  int n, cin, h, w;        // input
  int cout, kh, kw;        // kernel
  int stride;
  int pt, pb, pl, pr;      // padding: top, bottom, left, right
  int oh, ow;              // output spatial extents
};

struct PoolDims {
  int n, c, h, w;
  int kernel, stride;
  int oh, ow;
};

// y[n,co,oh,ow] = b[co] + sum_{ci,kh,kw} x[n,ci,oh*s+kh-pt, ow*s+kw-pl] * w[co,ci,kh,kw]
void conv2d_forward(const double* x, const double* w, const double* b, double* y, const Conv2dDims& d);
void conv2d_backward_input(const double* gy, const double* w, double* gx, const Conv2dDims& d);
void conv2d_backward_weight(const double* gy, const double* x, double* gw, const Conv2dDims& d);
void conv2d_backward_bias(const double* gy, double* gb, const Conv2dDims& d);

// c[m,n] = a[m,k] * b[k,n]
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
// c[k,n] = a[m,k]^T * b[m,n]
void matmul_at_b(const double* a, const double* b, double* c, int m, int k, int n);
// c[m,k] = a[m,n] * b[k,n]^T
void matmul_a_bt(const double* a, const double* b, double* c, int m, int k, int n);

// argmax holds the flat input index of the selected element; ties go to the
// first maximum in row-major scan order.
void maxpool_forward(const double* x, double* y, int64_t* argmax, const PoolDims& d);
void maxpool_backward(const double* gy, const int64_t* argmax, double* gx, const PoolDims& d);

void global_avg_pool_forward(const double* x, double* y, int n, int c, int h, int w);
void global_avg_pool_backward(const double* gy, double* gx, int n, int c, int h, int w);

// Bed-of-nails upsampling: the copied pixel sits at the top-left cell of each
// factor x factor block, every other cell is exactly zero.
void upsample_nails_forward(const double* x, double* y, int n, int c, int h, int w, int factor);
void upsample_nails_backward(const double* gy, double* gx, int n, int c, int h, int w, int factor);

namespace serial {
void conv2d_forward(const double* x, const double* w, const double* b, double* y, const Conv2dDims& d);
void conv2d_backward_input(const double* gy, const double* w, double* gx, const Conv2dDims& d);
void conv2d_backward_weight(const double* gy, const double* x, double* gw, const Conv2dDims& d);
void conv2d_backward_bias(const double* gy, double* gb, const Conv2dDims& d);
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_at_b(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_a_bt(const double* a, const double* b, double* c, int m, int k, int n);
void maxpool_forward(const double* x, double* y, int64_t* argmax, const PoolDims& d);
void maxpool_backward(const double* gy, const int64_t* argmax, double* gx, const PoolDims& d);
void global_avg_pool_forward(const double* x, double* y, int n, int c, int h, int w);
void global_avg_pool_backward(const double* gy, double* gx, int n, int c, int h, int w);
void upsample_nails_forward(const double* x, double* y, int n, int c, int h, int w, int factor);
void upsample_nails_backward(const double* gy, double* gx, int n, int c, int h, int w, int factor);
}  // namespace serial

}  // namespace psim::kernels
