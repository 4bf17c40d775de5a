// Compares the serial reference kernels against their OpenMP counterparts:
// verifies bit-identical outputs, then reports wall-clock medians.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "pillarcast/kernels.hpp"
#include "pillarcast/rng.hpp"

using namespace pillarcast;

namespace {

using Clock = std::chrono::steady_clock;

double median_ms(const std::vector<double>& runs_in) {
  std::vector<double> runs = runs_in;
  std::sort(runs.begin(), runs.end());
  return runs[runs.size() / 2];
}

template <typename F>
double time_median(F&& fn, int reps) {
  std::vector<double> runs;
  fn();  // warmup
  for (int i = 0; i < reps; ++i) {
    const auto t0 = Clock::now();
    fn();
    const auto t1 = Clock::now();
    runs.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return median_ms(runs);
}

void fill(std::vector<float>& v, Rng& rng) {
  for (float& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
}

}  // namespace

int main(int argc, char** argv) {
  int reps = 9;
  if (argc > 1) reps = std::atoi(argv[1]);
  Rng rng(123);

#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("openmp: disabled at build time\n");
#endif
  std::printf("%-28s %12s %12s %8s %s\n", "kernel", "serial ms", "omp ms",
              "speedup", "bitwise");

  bool all_equal = true;
  auto report = [&](const char* name, double ts, double tp, bool equal) {
    all_equal = all_equal && equal;
    std::printf("%-28s %12.3f %12.3f %7.2fx %s\n", name, ts, tp, ts / tp,
                equal ? "equal" : "DIFFER");
  };

  {  // linear forward: 20000 x 37 -> 64
    const int m = 20000, k = 37, n = 64;
    std::vector<float> x(static_cast<size_t>(m) * k), w(static_cast<size_t>(k) * n), b(n);
    std::vector<float> ys(static_cast<size_t>(m) * n), yp(ys.size());
    fill(x, rng);
    fill(w, rng);
    fill(b, rng);
    const double ts = time_median(
        [&] { kernels::linear_forward_serial(x.data(), w.data(), b.data(), ys.data(), m, k, n); },
        reps);
    const double tp = time_median(
        [&] { kernels::linear_forward_parallel(x.data(), w.data(), b.data(), yp.data(), m, k, n); },
        reps);
    report("linear_forward", ts, tp,
           std::memcmp(ys.data(), yp.data(), ys.size() * sizeof(float)) == 0);
  }

  {  // conv2d 3x3 forward: 32ch 128x128 -> 32ch
    const kernels::ConvSpec spec{32, 128, 128, 32, 3, 3, 1, 1};
    std::vector<float> x(static_cast<size_t>(spec.ci) * spec.h * spec.w);
    std::vector<float> w(static_cast<size_t>(spec.co) * spec.ci * 9), b(spec.co);
    std::vector<float> ys(static_cast<size_t>(spec.co) * spec.oh() * spec.ow());
    std::vector<float> yp(ys.size());
    fill(x, rng);
    fill(w, rng);
    fill(b, rng);
    const double ts = time_median(
        [&] { kernels::conv2d_forward_serial(spec, x.data(), w.data(), b.data(), ys.data()); },
        reps);
    const double tp = time_median(
        [&] { kernels::conv2d_forward_parallel(spec, x.data(), w.data(), b.data(), yp.data()); },
        reps);
    report("conv2d_3x3_forward", ts, tp,
           std::memcmp(ys.data(), yp.data(), ys.size() * sizeof(float)) == 0);
  }

  {  // conv2d backward wrt input
    const kernels::ConvSpec spec{32, 128, 128, 32, 3, 3, 1, 1};
    std::vector<float> dy(static_cast<size_t>(spec.co) * spec.oh() * spec.ow());
    std::vector<float> w(static_cast<size_t>(spec.co) * spec.ci * 9);
    std::vector<float> dxs(static_cast<size_t>(spec.ci) * spec.h * spec.w);
    std::vector<float> dxp(dxs.size());
    fill(dy, rng);
    fill(w, rng);
    const double ts = time_median(
        [&] {
          std::fill(dxs.begin(), dxs.end(), 0.0f);
          kernels::conv2d_backward_x_serial(spec, dy.data(), w.data(), dxs.data());
        },
        reps);
    const double tp = time_median(
        [&] {
          std::fill(dxp.begin(), dxp.end(), 0.0f);
          kernels::conv2d_backward_x_parallel(spec, dy.data(), w.data(), dxp.data());
        },
        reps);
    report("conv2d_3x3_backward_x", ts, tp,
           std::memcmp(dxs.data(), dxp.data(), dxs.size() * sizeof(float)) == 0);
  }

  {  // conv2d backward wrt weights
    const kernels::ConvSpec spec{32, 128, 128, 32, 3, 3, 1, 1};
    std::vector<float> dy(static_cast<size_t>(spec.co) * spec.oh() * spec.ow());
    std::vector<float> x(static_cast<size_t>(spec.ci) * spec.h * spec.w);
    std::vector<float> dws(static_cast<size_t>(spec.co) * spec.ci * 9);
    std::vector<float> dwp(dws.size());
    fill(dy, rng);
    fill(x, rng);
    const double ts = time_median(
        [&] {
          std::fill(dws.begin(), dws.end(), 0.0f);
          kernels::conv2d_backward_w_serial(spec, x.data(), dy.data(), dws.data());
        },
        reps);
    const double tp = time_median(
        [&] {
          std::fill(dwp.begin(), dwp.end(), 0.0f);
          kernels::conv2d_backward_w_parallel(spec, x.data(), dy.data(), dwp.data());
        },
        reps);
    report("conv2d_3x3_backward_w", ts, tp,
           std::memcmp(dws.data(), dwp.data(), dws.size() * sizeof(float)) == 0);
  }

  {  // segment max over 80x80 pillars
    const int n = 60000, c = 64, S = 6400;
    std::vector<float> x(static_cast<size_t>(n) * c);
    std::vector<int> seg(n);
    std::vector<float> ys(static_cast<size_t>(S) * c), yp(ys.size());
    std::vector<int> as(ys.size()), ap(ys.size());
    fill(x, rng);
    for (int i = 0; i < n; ++i)
      seg[i] = static_cast<int>(rng.uniform_int(0, S - 1));
    const double ts = time_median(
        [&] { kernels::segment_max_forward_serial(x.data(), seg.data(), ys.data(), as.data(), n, c, S); },
        reps);
    const double tp = time_median(
        [&] { kernels::segment_max_forward_parallel(x.data(), seg.data(), yp.data(), ap.data(), n, c, S); },
        reps);
    report("segment_max_forward", ts, tp,
           std::memcmp(ys.data(), yp.data(), ys.size() * sizeof(float)) == 0 &&
               std::memcmp(as.data(), ap.data(), as.size() * sizeof(int)) == 0);
  }

  if (!all_equal) {
    std::fprintf(stderr, "FAIL: parallel kernels diverged from the serial reference\n");
    return 1;
  }
  return 0;
}
