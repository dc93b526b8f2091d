// Serial reference kernels against their OpenMP builds, plus window-parallel
// evaluation at one thread and at the machine's thread count.
//
//   bench_kernels [--repeat R]

#include <algorithm>
#include <chrono>
#include <cstring>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include "starnet/eval.hpp"
#include "starnet/kernels.hpp"
#include "starnet/synthetic.hpp"

using namespace starnet;

namespace {

template <class F>
double median_seconds(std::size_t repeat, F&& f) {
  f();  // warm-up
  std::vector<double> t;
  for (std::size_t i = 0; i < repeat; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    t.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

std::vector<double> random_values(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = u(rng);
  return v;
}

void row(const std::string& name, double serial, double parallel, bool same) {
  std::cout << name << "  serial " << serial * 1e3 << " ms  omp " << parallel * 1e3 << " ms  speedup "
            << serial / parallel << (same ? "  bit-identical\n" : "  MISMATCH\n");
}

}  // namespace

int main(int argc, char** argv) {
  std::size_t repeat = 20;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::strcmp(argv[i], "--repeat") == 0) repeat = static_cast<std::size_t>(std::stoul(argv[i + 1]));
  }
  std::cout << "threads available: " << kernels::max_threads() << "\n";
  std::mt19937_64 rng(1);
  bool all_same = true;

  // Shapes seen in the model: N pedestrians x 4H gate rows, plus a large
  // square case where threading has room to pay off.
  const std::size_t shapes[][3] = {{64, 74, 256}, {512, 66, 256}, {256, 256, 256}};
  for (const auto& s : shapes) {
    const std::size_t m = s[0], k = s[1], n = s[2];
    const auto a = random_values(m * k, rng), b = random_values(n * k, rng);
    std::vector<double> c1(m * n), c2(m * n);
    const double ts = median_seconds(repeat, [&] { kernels::serial::gemm_nt(m, k, n, a, b, c1, false); });
    const double tp = median_seconds(repeat, [&] { kernels::omp::gemm_nt(m, k, n, a, b, c2, false); });
    const bool same = c1 == c2;
    all_same = all_same && same;
    row("gemm_nt " + std::to_string(m) + "x" + std::to_string(k) + "x" + std::to_string(n), ts, tp, same);

    const auto g = random_values(m * n, rng);
    std::vector<double> d1(n * k), d2(n * k);
    const double ts2 = median_seconds(repeat, [&] { kernels::serial::gemm_tn(m, n, k, g, a, d1, false); });
    const double tp2 = median_seconds(repeat, [&] { kernels::omp::gemm_tn(m, n, k, g, a, d2, false); });
    const bool same2 = d1 == d2;
    all_same = all_same && same2;
    row("gemm_tn " + std::to_string(m) + "x" + std::to_string(n) + "x" + std::to_string(k), ts2, tp2, same2);
  }
  {
    const std::size_t rows = 4096, cols = 64;
    const auto m = random_values(rows * cols, rng);
    std::vector<double> o1(cols), o2(cols);
    std::vector<std::size_t> a1(cols), a2(cols);
    const double ts = median_seconds(repeat, [&] { kernels::serial::colwise_max(rows, cols, m, o1, a1); });
    const double tp = median_seconds(repeat, [&] { kernels::omp::colwise_max(rows, cols, m, o2, a2); });
    const bool same = o1 == o2 && a1 == a2;
    all_same = all_same && same;
    row("colwise_max 4096x64", ts, tp, same);
  }
  {
    const auto params = model::ParamSet::init(model::ModelKind::starnet, model::ModelConfig{}, 3);
    std::vector<data::Window> windows;
    for (std::uint64_t s = 0; s < 16; ++s) windows.push_back(synthetic::smooth_scene(8, 8, 12, s));
    const int threads = kernels::max_threads();
    eval::MetricsReport r1, rn;
    kernels::set_threads(1);
    const double t1 = median_seconds(3, [&] { r1 = eval::evaluate(params, windows, 20, eval::MetricMode::all_steps, 5); });
    kernels::set_threads(threads);
    const double tn = median_seconds(3, [&] { rn = eval::evaluate(params, windows, 20, eval::MetricMode::all_steps, 5); });
    const bool same = r1.ade == rn.ade && r1.fde == rn.fde;
    all_same = all_same && same;
    row("evaluate 16 windows K=20 (1 vs " + std::to_string(threads) + " threads)", t1, tn, same);
  }
  return all_same ? 0 : 1;
}
