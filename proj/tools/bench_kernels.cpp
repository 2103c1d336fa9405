// Times the parallel kernels against the serial reference and checks that
// both produce bitwise-identical results on random inputs.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "psim/kernels.hpp"
#include "psim/rng.hpp"
#include "psim/tensor.hpp"

using namespace psim;
using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

struct Row {
  std::string name;
  double serial_ms;
  double parallel_ms;
  bool identical;
};

template <typename F, typename G>
Row time_pair(const std::string& name, int reps, std::vector<double>& out_serial,
              std::vector<double>& out_parallel, F serial_fn, G parallel_fn) {
  serial_fn();  // warm up and materialize reference output
  auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) serial_fn();
  const double ts = ms_since(t0) / reps;

  parallel_fn();
  t0 = Clock::now();
  for (int r = 0; r < reps; ++r) parallel_fn();
  const double tp = ms_since(t0) / reps;

  return Row{name, ts, tp, bitwise_equal(out_serial, out_parallel)};
}

}  // namespace

int main(int argc, char** argv) {
  int reps = 5;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--reps") == 0 && i + 1 < argc) reps = std::atoi(argv[++i]);
  }
#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("openmp: unavailable, parallel path falls back to serial\n");
#endif
  std::printf("reps per measurement: %d\n\n", reps);

  RngStream rng(12345);
  std::vector<Row> rows;

  {
    // conv2d forward + backward, batch 8, 32ch 64x64 -> 64ch
    kernels::Conv2dDims d{8, 32, 64, 64, 64, 3, 3, 1, 1, 1, 1, 1, 64, 64};
    Tensor x = Tensor::gaussian({d.n, d.cin, d.h, d.w}, rng);
    Tensor w = Tensor::gaussian({d.cout, d.cin, d.kh, d.kw}, rng, 0.0, 0.05);
    Tensor b = Tensor::gaussian({d.cout}, rng);
    Tensor ys({d.n, d.cout, d.oh, d.ow}), yp = ys;
    rows.push_back(time_pair(
        "conv2d forward", reps, ys.data, yp.data,
        [&] { kernels::serial::conv2d_forward(x.data.data(), w.data.data(), b.data.data(), ys.data.data(), d); },
        [&] { kernels::conv2d_forward(x.data.data(), w.data.data(), b.data.data(), yp.data.data(), d); }));

    Tensor gy = Tensor::gaussian({d.n, d.cout, d.oh, d.ow}, rng);
    Tensor gxs({d.n, d.cin, d.h, d.w}), gxp = gxs;
    rows.push_back(time_pair(
        "conv2d backward input", reps, gxs.data, gxp.data,
        [&] {
          std::fill(gxs.data.begin(), gxs.data.end(), 0.0);
          kernels::serial::conv2d_backward_input(gy.data.data(), w.data.data(), gxs.data.data(), d);
        },
        [&] {
          std::fill(gxp.data.begin(), gxp.data.end(), 0.0);
          kernels::conv2d_backward_input(gy.data.data(), w.data.data(), gxp.data.data(), d);
        }));

    Tensor gws({d.cout, d.cin, d.kh, d.kw}), gwp = gws;
    rows.push_back(time_pair(
        "conv2d backward weight", reps, gws.data, gwp.data,
        [&] {
          std::fill(gws.data.begin(), gws.data.end(), 0.0);
          kernels::serial::conv2d_backward_weight(gy.data.data(), x.data.data(), gws.data.data(), d);
        },
        [&] {
          std::fill(gwp.data.begin(), gwp.data.end(), 0.0);
          kernels::conv2d_backward_weight(gy.data.data(), x.data.data(), gwp.data.data(), d);
        }));
  }

  {
    const int m = 256, k = 4096, n = 512;
    Tensor a = Tensor::gaussian({m, k}, rng);
    Tensor b = Tensor::gaussian({k, n}, rng, 0.0, 0.02);
    Tensor cs({m, n}), cp = cs;
    rows.push_back(time_pair(
        "matmul 256x4096x512", reps, cs.data, cp.data,
        [&] { kernels::serial::matmul(a.data.data(), b.data.data(), cs.data.data(), m, k, n); },
        [&] { kernels::matmul(a.data.data(), b.data.data(), cp.data.data(), m, k, n); }));
  }

  {
    kernels::PoolDims d{16, 64, 64, 64, 2, 2, 32, 32};
    Tensor x = Tensor::gaussian({d.n, d.c, d.h, d.w}, rng);
    Tensor ys({d.n, d.c, d.oh, d.ow}), yp = ys;
    std::vector<int64_t> args(static_cast<size_t>(ys.numel())), argp = args;
    rows.push_back(time_pair(
        "maxpool forward", reps, ys.data, yp.data,
        [&] { kernels::serial::maxpool_forward(x.data.data(), ys.data.data(), args.data(), d); },
        [&] { kernels::maxpool_forward(x.data.data(), yp.data.data(), argp.data(), d); }));
  }

  {
    const int n = 16, c = 64, h = 64, w = 64, f = 2;
    Tensor x = Tensor::gaussian({n, c, h, w}, rng);
    Tensor ys({n, c, h * f, w * f}), yp = ys;
    rows.push_back(time_pair(
        "upsample nails x2", reps, ys.data, yp.data,
        [&] { kernels::serial::upsample_nails_forward(x.data.data(), ys.data.data(), n, c, h, w, f); },
        [&] { kernels::upsample_nails_forward(x.data.data(), yp.data.data(), n, c, h, w, f); }));
  }

  std::printf("%-26s %12s %12s %9s %10s\n", "kernel", "serial ms", "parallel ms", "speedup", "bitwise");
  bool all_ok = true;
  for (const Row& r : rows) {
    std::printf("%-26s %12.3f %12.3f %8.2fx %10s\n", r.name.c_str(), r.serial_ms, r.parallel_ms,
                r.serial_ms / r.parallel_ms, r.identical ? "match" : "MISMATCH");
    all_ok = all_ok && r.identical;
  }
  if (!all_ok) {
    std::fprintf(stderr, "error: parallel kernels diverged from serial reference\n");
    return 1;
  }
  return 0;
}
