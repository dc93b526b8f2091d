#include "starnet/eval.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <sstream>

#include "starnet/error.hpp"
#include "starnet/json_io.hpp"
#include "starnet/rng.hpp"
#include "starnet/synthetic.hpp"

namespace starnet::eval {

std::string_view mode_name(MetricMode mode) { return mode == MetricMode::all_steps ? "all_steps" : "sample8"; }

MetricMode parse_mode(std::string_view name) {
  if (name == "all_steps") return MetricMode::all_steps;
  if (name == "sample8") return MetricMode::sample8;
  throw Error("unknown metric mode '" + std::string(name) + "' (expected all_steps or sample8)");
}

std::vector<std::size_t> metric_steps(std::size_t t_pred, MetricMode mode) {
  std::vector<std::size_t> out;
  if (mode == MetricMode::all_steps) {
    for (std::size_t t = 0; t < t_pred; ++t) out.push_back(t);
    return out;
  }
  if (t_pred < 8) throw DimensionError("sample8 needs a horizon of at least 8 steps, got " + std::to_string(t_pred));
  for (std::size_t j = 1; j <= 8; ++j) out.push_back((j * t_pred + 7) / 8 - 1);
  return out;
}

namespace {

void check_track_pair(const Tensor& pred, const Tensor& truth) {
  if (pred.rank() != 2 || pred.dim(1) != 2 || pred.shape() != truth.shape()) {
    throw DimensionError("trajectories must both be [T x 2], got " + shape_string(pred.shape()) + " and " +
                         shape_string(truth.shape()));
  }
  if (pred.dim(0) == 0) throw DimensionError("empty trajectory");
}

double dist(const double* a, const double* b) { return std::hypot(a[0] - b[0], a[1] - b[1]); }

}  // namespace

double ade(const Tensor& pred, const Tensor& truth, MetricMode mode) {
  check_track_pair(pred, truth);
  const auto steps = metric_steps(pred.dim(0), mode);
  double s = 0.0;
  for (std::size_t t : steps) s += dist(&pred.data()[t * 2], &truth.data()[t * 2]);
  return s / static_cast<double>(steps.size());
}

double fde(const Tensor& pred, const Tensor& truth) {
  check_track_pair(pred, truth);
  const std::size_t last = pred.dim(0) - 1;
  return dist(&pred.data()[last * 2], &truth.data()[last * 2]);
}

namespace {

// Best-of-K metrics for every pedestrian of one window.
std::vector<PedestrianMetric> evaluate_window(const model::ParamSet& params, const data::Window& w, std::size_t k,
                                              MetricMode mode, std::uint64_t seed, std::size_t index) {
  const model::RolloutResult r = model::rollout(w, params, k, seed);
  const Tensor world = r.world_predictions();
  const std::size_t n = w.num_peds(), t_pred = w.t_pred;
  const Tensor truth_all = w.future();
  std::vector<PedestrianMetric> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> truth(truth_all.data().begin() + static_cast<std::ptrdiff_t>(i * t_pred * 2),
                              truth_all.data().begin() + static_cast<std::ptrdiff_t>((i + 1) * t_pred * 2));
    const Tensor gt({t_pred, 2}, std::move(truth));
    PedestrianMetric best;
    best.window = index;
    best.ped_id = w.ped_ids[i];
    for (std::size_t s = 0; s < k; ++s) {
      const std::size_t off = (s * n + i) * t_pred * 2;
      std::vector<double> p(world.data().begin() + static_cast<std::ptrdiff_t>(off),
                            world.data().begin() + static_cast<std::ptrdiff_t>(off + t_pred * 2));
      const Tensor pred({t_pred, 2}, std::move(p));
      const double a = ade(pred, gt, mode);
      if (s == 0 || a < best.ade) {
        best.ade = a;
        best.fde = fde(pred, gt);
        best.best_k = s;
      }
    }
    out.push_back(best);
  }
  return out;
}

}  // namespace

MetricsReport evaluate(const model::ParamSet& params, const std::vector<data::Window>& windows, std::size_t k,
                       MetricMode mode, std::uint64_t seed, std::string_view label) {
  if (k < 1) throw Error("evaluate: K must be at least 1");
  if (windows.empty()) throw Error("evaluate: no test windows");
  params.validate();
  for (const auto& w : windows) {
    if (!w.has_future) throw Error("evaluate: window " + w.label + " has no ground truth");
    if (w.t_obs != windows.front().t_obs || w.t_pred != windows.front().t_pred) {
      throw FormatError("evaluate: windows disagree on t_obs/t_pred");
    }
  }
  metric_steps(windows.front().t_pred, mode);  // validates the mode against the horizon

  std::vector<std::vector<PedestrianMetric>> per_window(windows.size());
  std::vector<std::exception_ptr> errors(windows.size());
  const auto count = static_cast<std::int64_t>(windows.size());
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < count; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    try {
      per_window[idx] = evaluate_window(params, windows[idx], k, mode, mix_seed(seed, idx), idx);
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  MetricsReport report;
  report.label = std::string(label);
  report.model_kind = std::string(model::kind_name(params.kind));
  report.k = k;
  report.mode = mode;
  report.seed = seed;
  report.windows = windows.size();
  double ade_sum = 0.0, fde_sum = 0.0;
  for (const auto& pw : per_window) {
    for (const auto& m : pw) {
      ade_sum += m.ade;
      fde_sum += m.fde;
      report.per_pedestrian.push_back(m);
    }
  }
  report.pedestrians = report.per_pedestrian.size();
  report.ade = ade_sum / static_cast<double>(report.pedestrians);
  report.fde = fde_sum / static_cast<double>(report.pedestrians);
  return report;
}

MetricsReport evaluate(const training::Checkpoint& ck, const std::vector<data::Window>& windows, std::size_t k,
                       MetricMode mode, std::uint64_t seed, std::string_view label) {
  for (const auto& w : windows) {
    if (w.t_obs != ck.config.t_obs || w.t_pred != ck.config.t_pred) {
      throw FormatError("checkpoint was trained with t_obs/t_pred " + std::to_string(ck.config.t_obs) + "/" +
                        std::to_string(ck.config.t_pred) + " but windows have " + std::to_string(w.t_obs) + "/" +
                        std::to_string(w.t_pred));
    }
  }
  return evaluate(ck.params, windows, k, mode, seed, label);
}

std::string report_json(const MetricsReport& r, const std::string& provenance_json) {
  ojson j;
  j["report"] = "metrics";
  j["dataset"] = r.label;
  j["model_kind"] = r.model_kind;
  j["ade"] = r.ade;
  j["fde"] = r.fde;
  j["k"] = r.k;
  j["metric_mode"] = std::string(mode_name(r.mode));
  j["seed"] = r.seed;
  j["windows"] = r.windows;
  j["pedestrians"] = r.pedestrians;
  j["config"] = ojson::parse(provenance_json);
  return j.dump(2) + "\n";
}

std::string report_csv(const MetricsReport& r) {
  std::ostringstream out;
  out << "window_id,ped_id,ade,fde\n";
  for (const auto& m : r.per_pedestrian) {
    out << m.window << ',' << m.ped_id << ',' << ojson(m.ade).dump() << ',' << ojson(m.fde).dump() << '\n';
  }
  return out.str();
}

ScalingReport bench_scaling(const model::ParamSet& params, std::span<const std::size_t> sizes, std::size_t repeats,
                            std::size_t t_obs, std::size_t t_pred, std::uint64_t seed, std::size_t warmup) {
  if (sizes.size() < 2) throw Error("bench_scaling needs at least two pedestrian counts");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] == 0 || (i > 0 && sizes[i] <= sizes[i - 1])) {
      throw Error("bench_scaling: pedestrian counts must be positive and strictly increasing");
    }
  }
  if (repeats < kMinBenchRepeats) {
    throw Error("bench_scaling: need at least " + std::to_string(kMinBenchRepeats) + " repetitions, got " +
                std::to_string(repeats));
  }
  if (warmup < kMinBenchWarmup) {
    throw Error("bench_scaling: need at least " + std::to_string(kMinBenchWarmup) + " warm-up runs");
  }
  ScalingReport report;
  report.repeats = repeats;
  report.warmup = warmup;
  report.t_obs = t_obs;
  report.t_pred = t_pred;
  for (std::size_t n : sizes) {
    const data::Window w = synthetic::smooth_scene(n, t_obs, t_pred, mix_seed(seed, n));
    ScalingPoint pt;
    pt.n = n;
    for (std::size_t i = 0; i < warmup; ++i) pt.census = model::rollout(w, params, 1, seed).census;
    std::vector<double> times;
    for (std::size_t i = 0; i < repeats; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto r = model::rollout(w, params, 1, seed);
      times.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      if (r.predictions.empty()) throw Error("bench_scaling: empty rollout");
    }
    double mean = 0.0;
    for (double t : times) mean += t;
    mean /= static_cast<double>(times.size());
    double var = 0.0;
    for (double t : times) var += (t - mean) * (t - mean);
    pt.mean_seconds = mean;
    pt.std_seconds = std::sqrt(var / static_cast<double>(times.size() > 1 ? times.size() - 1 : 1));
    for (const auto& [role, rows] : pt.census) pt.op_count += rows;
    report.points.push_back(std::move(pt));
  }
  double ratio_sum = 0.0;
  for (std::size_t i = 1; i < report.points.size(); ++i) {
    ratio_sum += report.points[i].mean_seconds / report.points[i - 1].mean_seconds;
  }
  report.growth_ratio = ratio_sum / static_cast<double>(report.points.size() - 1);

  const auto& p0 = report.points[0];
  const auto& p1 = report.points[1];
  report.op_slope = (static_cast<double>(p1.op_count) - static_cast<double>(p0.op_count)) /
                    static_cast<double>(p1.n - p0.n);
  report.op_intercept = static_cast<double>(p0.op_count) - report.op_slope * static_cast<double>(p0.n);
  report.op_count_affine = true;
  for (const auto& p : report.points) {
    const double predicted = report.op_slope * static_cast<double>(p.n) + report.op_intercept;
    if (predicted != static_cast<double>(p.op_count)) report.op_count_affine = false;
  }
  return report;
}

std::string scaling_json(const ScalingReport& r, const std::string& provenance_json) {
  ojson j;
  j["report"] = "scaling";
  j["t_obs"] = r.t_obs;
  j["t_pred"] = r.t_pred;
  j["repeats"] = r.repeats;
  j["warmup"] = r.warmup;
  ojson pts = ojson::array();
  for (const auto& p : r.points) {
    ojson e;
    e["n"] = p.n;
    e["mean_seconds"] = p.mean_seconds;
    e["std_seconds"] = p.std_seconds;
    e["op_count"] = p.op_count;
    ojson c;
    for (const auto& [role, rows] : p.census) c[role] = rows;
    e["census"] = c;
    pts.push_back(e);
  }
  j["points"] = pts;
  j["growth_ratio"] = r.growth_ratio;
  j["op_slope"] = r.op_slope;
  j["op_intercept"] = r.op_intercept;
  j["op_count_affine"] = r.op_count_affine;
  j["config"] = ojson::parse(provenance_json);
  return j.dump(2) + "\n";
}

}  // namespace starnet::eval
