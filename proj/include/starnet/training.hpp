#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "starnet/adam.hpp"
#include "starnet/data.hpp"
#include "starnet/graph.hpp"
#include "starnet/model.hpp"

namespace starnet::training {

struct TrainConfig {
  model::ModelKind kind = model::ModelKind::starnet;
  model::ModelConfig model;
  std::size_t epochs = 1;
  std::size_t k = 20;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  std::size_t t_obs = 8;
  std::size_t t_pred = 12;
  bool rotate_augment = true;
  std::optional<double> grad_clip;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

// Best-of-K mean squared displacement:
//   L_k = 1/(N T) sum_j sum_t |p_hat_jk^t - p_j^t|^2,   loss = min_k L_k
// `samples[k]` is [N x 2T] (t-major, then x/y), `truth` is [N x T x 2].
// Only the minimising sample (lowest k on ties) receives gradient.
Var variety_loss(std::span<const Var> samples, const Tensor& truth);
// Per-sample L_k values for the same layout, without a graph.
std::vector<double> per_sample_losses(const Tensor& predictions, const Tensor& truth);
// Value form for predictions [K x N x T x 2].
double variety_loss(const Tensor& predictions, const Tensor& truth);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double mean_loss = 0.0;
  double wall_seconds = 0.0;
};

struct RunInfo {
  std::size_t epochs_completed = 0;
  std::size_t iterations = 0;
  std::optional<double> final_loss;  // mean loss of the last epoch
};

struct Checkpoint {
  static constexpr int kVersion = 1;
  TrainConfig config;
  model::ParamSet params;
  std::optional<AdamState> optimizer;
  RunInfo run;
};

// One optimiser over one parameter set. The RNG stream (shuffle order, rotation
// angles, sample seeds) is seeded from config.seed, so two trainers with the
// same config and data produce identical parameters.
class Trainer {
 public:
  explicit Trainer(TrainConfig config);
  Trainer(TrainConfig config, model::ParamSet initial);

  // One forward/backward/update on a centered window with the given sample
  // seeds. Returns the loss before the update.
  double step(const data::Window& centered, std::span<const std::uint64_t> seeds);

  // One pass over `centered_windows` in shuffled order.
  EpochLog run_epoch(const std::vector<data::Window>& centered_windows);

  const model::ParamSet& params() const { return params_; }
  const AdamState& optimizer() const { return adam_; }
  const TrainConfig& config() const { return config_; }
  Checkpoint checkpoint() const;

 private:
  TrainConfig config_;
  model::ParamSet params_;
  AdamState adam_;
  std::mt19937_64 rng_;
  RunInfo run_;
};

// Centers every window, then trains for config.epochs. Throws NonFiniteError
// naming the epoch and window if a loss is NaN/Inf.
Checkpoint train(const std::vector<data::Window>& windows, const TrainConfig& config,
                 const std::function<void(const EpochLog&)>& on_epoch = {});

std::string format_epoch_log(const EpochLog& log);

std::string serialize_checkpoint(const Checkpoint& ck);
Checkpoint parse_checkpoint(std::string_view text);
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace starnet::training
