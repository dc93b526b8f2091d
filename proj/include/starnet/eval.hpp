#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "starnet/data.hpp"
#include "starnet/model.hpp"
#include "starnet/training.hpp"

namespace starnet::eval {

enum class MetricMode {
  all_steps,  // every predicted step
  sample8,    // 8 steps spaced evenly over the horizon, final step included
};

std::string_view mode_name(MetricMode mode);
MetricMode parse_mode(std::string_view name);

// 0-based step indices used by a mode for a horizon of t_pred steps. sample8
// takes ceil(j * t_pred / 8) - 1 for j = 1..8 and needs t_pred >= 8.
std::vector<std::size_t> metric_steps(std::size_t t_pred, MetricMode mode);

// pred and truth are [T x 2].
double ade(const Tensor& pred, const Tensor& truth, MetricMode mode = MetricMode::all_steps);
double fde(const Tensor& pred, const Tensor& truth);

struct PedestrianMetric {
  std::size_t window = 0;
  std::int64_t ped_id = 0;
  std::size_t best_k = 0;
  double ade = 0.0;
  double fde = 0.0;
};

struct MetricsReport {
  std::string label;
  std::string model_kind;
  double ade = 0.0;
  double fde = 0.0;
  std::size_t k = 0;
  MetricMode mode = MetricMode::all_steps;
  std::uint64_t seed = 0;
  std::size_t windows = 0;
  std::size_t pedestrians = 0;
  std::vector<PedestrianMetric> per_pedestrian;
};

// Best-of-K per pedestrian: the sample with the smallest ADE (lowest k on
// ties) supplies both its ADE and its FDE. Averages run over every
// pedestrian of every window. Windows are rolled out in parallel with a seed
// derived from (seed, window index), so the report does not depend on the
// thread count.
MetricsReport evaluate(const model::ParamSet& params, const std::vector<data::Window>& windows, std::size_t k,
                       MetricMode mode, std::uint64_t seed, std::string_view label = {});
// Same, after checking the windows against the checkpoint's t_obs/t_pred.
MetricsReport evaluate(const training::Checkpoint& ck, const std::vector<data::Window>& windows, std::size_t k,
                       MetricMode mode, std::uint64_t seed, std::string_view label = {});

// Fixed key order; `provenance` is embedded verbatim under "config".
std::string report_json(const MetricsReport& report, const std::string& provenance_json = "{}");
std::string report_csv(const MetricsReport& report);

struct ScalingPoint {
  std::size_t n = 0;
  double mean_seconds = 0.0;
  double std_seconds = 0.0;
  std::size_t op_count = 0;  // rows through every census role
  std::map<std::string, std::size_t> census;
};

struct ScalingReport {
  std::vector<ScalingPoint> points;
  double growth_ratio = 0.0;  // mean of time(n_{i+1}) / time(n_i)
  double op_slope = 0.0;      // op_count = slope * N + intercept over the first two points
  double op_intercept = 0.0;
  bool op_count_affine = false;  // every point lies on that line exactly
  std::size_t repeats = 0;
  std::size_t warmup = 0;
  std::size_t t_obs = 0;
  std::size_t t_pred = 0;
};

inline constexpr std::size_t kMinBenchRepeats = 30;
inline constexpr std::size_t kMinBenchWarmup = 5;

// Times one K=1 rollout per repetition on a synthetic scene of each size.
// Requires at least two sizes, strictly increasing, and at least
// kMinBenchRepeats repetitions after kMinBenchWarmup warm-up runs.
ScalingReport bench_scaling(const model::ParamSet& params, std::span<const std::size_t> sizes, std::size_t repeats,
                            std::size_t t_obs = 8, std::size_t t_pred = 12, std::uint64_t seed = 0,
                            std::size_t warmup = kMinBenchWarmup);

std::string scaling_json(const ScalingReport& report, const std::string& provenance_json = "{}");

}  // namespace starnet::eval
