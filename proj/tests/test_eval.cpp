#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "starnet/error.hpp"
#include "starnet/eval.hpp"
#include "starnet/json_io.hpp"
#include "starnet/kernels.hpp"
#include "starnet/rng.hpp"
#include "starnet/synthetic.hpp"

using namespace starnet;
using namespace starnet::eval;

namespace {

Tensor random_track(std::size_t t, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Tensor out = Tensor::zeros({t, 2});
  for (double& v : out.data()) v = normal(rng);
  return out;
}

// Everyone stands still, so a zero-weight model predicts the truth exactly.
data::Window standing_scene(std::size_t n) {
  data::Window w;
  std::vector<double> pos;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t t = 0; t < 20; ++t) {
      pos.push_back(static_cast<double>(i) * 1.5);
      pos.push_back(-static_cast<double>(i));
    }
  w.positions = Tensor({n, 20, 2}, std::move(pos));
  for (std::size_t i = 0; i < n; ++i) w.ped_ids.push_back(static_cast<std::int64_t>(i));
  w.t_obs = 8;
  w.t_pred = 12;
  return w;
}

}  // namespace

TEST_CASE("ade and fde examples") {
  const Tensor a = random_track(12, 1);
  CHECK(ade(a, a) == 0.0);
  CHECK(fde(a, a) == 0.0);
  Tensor shifted = a;
  for (std::size_t t = 0; t < 12; ++t) {
    shifted[t * 2] += 3.0;
    shifted[t * 2 + 1] += 4.0;
  }
  CHECK(ade(shifted, a) == doctest::Approx(5.0).epsilon(1e-12));
  const Tensor z = Tensor::matrix({{5, 5}, {0, 0}}), o = Tensor::matrix({{5, 5}, {1, 1}});
  CHECK(fde(z, o) == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("ade equals a per-step brute force and fde obeys its bound") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Tensor p = random_track(12, 2 * s), t = random_track(12, 2 * s + 1);
    double sum = 0.0, worst = 0.0;
    for (std::size_t u = 0; u < 12; ++u) {
      const double d = std::sqrt(std::pow(p.at(u, 0) - t.at(u, 0), 2) + std::pow(p.at(u, 1) - t.at(u, 1), 2));
      sum += d;
      worst = std::max(worst, d);
    }
    CHECK(ade(p, t) == doctest::Approx(sum / 12).epsilon(1e-14));
    CHECK(fde(p, t) <= 12 * worst);
  }
}

TEST_CASE("ade is translation invariant") {
  // Dyadic values keep every shift exact.
  const Tensor p = Tensor::matrix({{0.5, 1.25}, {2, -3.5}, {0.75, 0}}), t = Tensor::matrix({{1, 1}, {2.5, -3}, {0, 0.25}});
  Tensor ps = p, ts = t;
  for (std::size_t i = 0; i < 6; ++i) {
    ps[i] += 64.0;
    ts[i] += 64.0;
  }
  CHECK(ade(ps, ts) == ade(p, t));
}

TEST_CASE("metric errors") {
  CHECK_THROWS_AS(ade(random_track(12, 1), random_track(11, 2)), DimensionError);
  CHECK_THROWS_AS(fde(Tensor::zeros({0, 2}), Tensor::zeros({0, 2})), DimensionError);
  CHECK_THROWS_AS(metric_steps(7, MetricMode::sample8), DimensionError);
  CHECK(parse_mode("sample8") == MetricMode::sample8);
  CHECK_THROWS(parse_mode("every"));
}

TEST_CASE("sample8 picks eight evenly spaced steps ending at the last") {
  CHECK(metric_steps(12, MetricMode::sample8) == std::vector<std::size_t>{1, 2, 4, 5, 7, 8, 10, 11});
  CHECK(metric_steps(8, MetricMode::sample8) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7});
  CHECK(metric_steps(16, MetricMode::sample8) == std::vector<std::size_t>{1, 3, 5, 7, 9, 11, 13, 15});
  CHECK(metric_steps(3, MetricMode::all_steps) == std::vector<std::size_t>{0, 1, 2});
  // Error only at the selected steps counts.
  const Tensor t = Tensor::zeros({12, 2});
  Tensor p = Tensor::zeros({12, 2});
  p.at(0, 0) = 8.0;  // step 0 is skipped by sample8
  CHECK(ade(p, t, MetricMode::sample8) == 0.0);
  CHECK(ade(p, t, MetricMode::all_steps) == doctest::Approx(8.0 / 12));
}

TEST_CASE("perfect predictor scores zero") {
  const auto zero = model::ParamSet::zeros(model::ModelKind::starnet, model::ModelConfig{});
  const auto r = evaluate(zero, {standing_scene(3), standing_scene(2)}, 5, MetricMode::all_steps, 0);
  CHECK(r.ade == 0.0);
  CHECK(r.fde == 0.0);
  CHECK(r.windows == 2);
  CHECK(r.pedestrians == 5);
}

TEST_CASE("K = 1 equals plain single-sample metrics") {
  const auto p = model::ParamSet::init(model::ModelKind::starnet, model::ModelConfig{}, 1);
  const auto w = synthetic::smooth_scene(3, 8, 12, 2);
  const auto r = evaluate(p, {w}, 1, MetricMode::all_steps, 7);
  const Tensor pred = model::rollout(w, p, 1, mix_seed(7, 0)).world_predictions();
  const Tensor truth = w.future();
  double a = 0.0, f = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    const Tensor pi({12, 2}, std::vector<double>(pred.data().begin() + static_cast<std::ptrdiff_t>(i * 24),
                                                 pred.data().begin() + static_cast<std::ptrdiff_t>(i * 24 + 24)));
    const Tensor ti({12, 2}, std::vector<double>(truth.data().begin() + static_cast<std::ptrdiff_t>(i * 24),
                                                 truth.data().begin() + static_cast<std::ptrdiff_t>(i * 24 + 24)));
    a += ade(pi, ti);
    f += fde(pi, ti);
    CHECK(r.per_pedestrian[i].ade == ade(pi, ti));
  }
  CHECK(r.ade == doctest::Approx(a / 3).epsilon(1e-15));
  CHECK(r.fde == doctest::Approx(f / 3).epsilon(1e-15));
}

TEST_CASE("best-of-K is non-increasing in K and uses the FDE of the best-ADE sample") {
  const auto p = model::ParamSet::init(model::ModelKind::starnet, model::ModelConfig{}, 3);
  std::vector<data::Window> windows;
  for (std::uint64_t s = 0; s < 3; ++s) windows.push_back(synthetic::smooth_scene(4, 8, 12, 10 + s));
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto r1 = evaluate(p, windows, 1, MetricMode::all_steps, seed);
    const auto r5 = evaluate(p, windows, 5, MetricMode::all_steps, seed);
    const auto r20 = evaluate(p, windows, 20, MetricMode::all_steps, seed);
    for (std::size_t i = 0; i < r1.per_pedestrian.size(); ++i) {
      CHECK(r5.per_pedestrian[i].ade <= r1.per_pedestrian[i].ade);
      CHECK(r20.per_pedestrian[i].ade <= r5.per_pedestrian[i].ade);
    }
  }
  // Recompute one pedestrian by hand.
  const auto r = evaluate(p, {windows[0]}, 6, MetricMode::all_steps, 4);
  const Tensor pred = model::rollout(windows[0], p, 6, mix_seed(4, 0)).world_predictions();
  const Tensor truth = windows[0].future();
  const Tensor t0({12, 2}, std::vector<double>(truth.data().begin(), truth.data().begin() + 24));
  double best = 1e300, best_fde = 0.0;
  std::size_t best_k = 0;
  for (std::size_t k = 0; k < 6; ++k) {
    const auto off = static_cast<std::ptrdiff_t>(k * 4 * 24);
    const Tensor pk({12, 2}, std::vector<double>(pred.data().begin() + off, pred.data().begin() + off + 24));
    if (ade(pk, t0) < best) {
      best = ade(pk, t0);
      best_fde = fde(pk, t0);
      best_k = k;
    }
  }
  CHECK(r.per_pedestrian[0].ade == best);
  CHECK(r.per_pedestrian[0].fde == best_fde);
  CHECK(r.per_pedestrian[0].best_k == best_k);
}

TEST_CASE("evaluation is reproducible and independent of thread count") {
  const auto p = model::ParamSet::init(model::ModelKind::starnet, model::ModelConfig{}, 5);
  std::vector<data::Window> windows;
  for (std::uint64_t s = 0; s < 6; ++s) windows.push_back(synthetic::smooth_scene(3, 8, 12, s));
  const int threads = kernels::max_threads();
  kernels::set_threads(1);
  const auto a = report_json(evaluate(p, windows, 4, MetricMode::sample8, 9, "SYN"));
  kernels::set_threads(std::max(threads, 4));
  const auto b = report_json(evaluate(p, windows, 4, MetricMode::sample8, 9, "SYN"));
  kernels::set_threads(threads);
  CHECK(a == b);
  const auto j = ojson::parse(a);
  CHECK(j["dataset"] == "SYN");
  CHECK(j["metric_mode"] == "sample8");
  CHECK(j["k"] == 4);
  CHECK(j.contains("ade"));
  CHECK(j.contains("fde"));
}

TEST_CASE("evaluate rejects bad input") {
  const auto p = model::ParamSet::init(model::ModelKind::starnet, model::ModelConfig{}, 6);
  const auto w = synthetic::smooth_scene(2, 8, 12, 1);
  CHECK_THROWS(evaluate(p, {}, 3, MetricMode::all_steps, 0));
  CHECK_THROWS(evaluate(p, {w}, 0, MetricMode::all_steps, 0));
  training::Checkpoint ck;
  ck.params = p;
  ck.config.t_obs = 6;
  CHECK_THROWS_AS(evaluate(ck, {w}, 3, MetricMode::all_steps, 0), FormatError);
  auto no_future = w;
  no_future.has_future = false;
  CHECK_THROWS(evaluate(p, {no_future}, 1, MetricMode::all_steps, 0));
}

TEST_CASE("per-pedestrian CSV") {
  const auto p = model::ParamSet::init(model::ModelKind::baseline, model::ModelConfig{}, 7);
  const auto r = evaluate(p, {synthetic::smooth_scene(2, 8, 12, 1)}, 2, MetricMode::all_steps, 0);
  const std::string csv = report_csv(r);
  CHECK(csv.rfind("window_id,ped_id,ade,fde\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("scaling bench: affine op count and argument checks") {
  const auto p = model::ParamSet::init(model::ModelKind::starnet, model::ModelConfig::uniform(8, 2), 8);
  const std::size_t sizes[] = {2, 4, 8};
  const auto r = bench_scaling(p, sizes, kMinBenchRepeats, 4, 3, 0);
  REQUIRE(r.points.size() == 3);
  CHECK(r.op_count_affine);
  // host.embed + hub.embed: 2 N (T_obs + T_pred); encoder N T_obs; decoder N T_pred; hub LSTM T_obs + T_pred.
  CHECK(r.op_slope == doctest::Approx(2.0 * 7 + 4 + 3));
  CHECK(r.op_intercept == doctest::Approx(7.0));
  for (const auto& pt : r.points) CHECK(pt.mean_seconds > 0.0);
  CHECK(r.growth_ratio > 0.0);
  const auto j = ojson::parse(scaling_json(r));
  CHECK(j["points"].size() == 3);

  const std::size_t one[] = {4};
  const std::size_t down[] = {8, 4};
  CHECK_THROWS(bench_scaling(p, one, kMinBenchRepeats));
  CHECK_THROWS(bench_scaling(p, down, kMinBenchRepeats));
  CHECK_THROWS(bench_scaling(p, sizes, 0));
  CHECK_THROWS(bench_scaling(p, sizes, kMinBenchRepeats - 1));
}
