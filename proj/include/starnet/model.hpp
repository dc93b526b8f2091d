#pragma once

// Star-topology trajectory predictor.
//
// A single hub network sees every pedestrian of a scene at each time step:
// positions are embedded row-wise, max-pooled into one crowd vector and fed
// to an LSTM whose projected output r^t describes the crowd so far. Every
// pedestrian has a host encoder-decoder (one weight set shared by all hosts,
// run as one batch) that gates its own embedded position with r^t and rolls
// out displacements. Cost per step is linear in the number of pedestrians.
//
// All forward functions expect centered coordinates (see data::center_window).

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "starnet/data.hpp"
#include "starnet/graph.hpp"
#include "starnet/lstm.hpp"

namespace starnet::model {

// Roles used in the graph census.
inline constexpr std::string_view kHubEmbedRole = "hub.embed";
inline constexpr std::string_view kHubLstmRole = "hub.lstm";
inline constexpr std::string_view kHostEmbedRole = "host.embed";
inline constexpr std::string_view kEncoderRole = "host.encoder";
inline constexpr std::string_view kDecoderRole = "host.decoder";

struct ModelConfig {
  std::size_t hub_embed = 64;    // W1 rows: per-pedestrian spatial embedding
  std::size_t hub_input = 64;    // W2 rows: hub LSTM input width
  std::size_t hub_hidden = 32;   // hub LSTM hidden size
  std::size_t host_embed = 64;   // W5 rows; also W4 rows (r^t width)
  std::size_t host_hidden = 64;  // encoder and decoder hidden size
  std::size_t noise_dim = 8;

  std::size_t encoder_input() const { return host_embed + 2; }
  std::size_t decoder_input() const { return host_embed + 2 + noise_dim; }

  // Same width everywhere; handy for tests and oracles.
  static ModelConfig uniform(std::size_t width, std::size_t noise_dim = 2);
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

enum class ModelKind { starnet, baseline };

std::string_view kind_name(ModelKind kind);
ModelKind parse_kind(std::string_view name);

struct HubParams {
  Tensor w1;  // [hub_embed x 2]
  Tensor w2;  // [hub_input x hub_embed]
  LstmParams lstm;
  Tensor w4;  // [host_embed x hub_hidden]
};

// For the baseline, w5 is empty, the encoder reads only displacements (2)
// and the decoder reads displacement + noise (2 + noise_dim).
struct HostParams {
  Tensor w5;  // [host_embed x 2]
  LstmParams encoder;
  LstmParams decoder;
  Tensor w8;  // [2 x host_hidden]
};

struct ParamSet {
  ModelKind kind = ModelKind::starnet;
  ModelConfig config;
  HubParams hub;
  HostParams host;

  // Xavier-uniform weights, zero biases except LSTM forget gates (1.0).
  static ParamSet init(ModelKind kind, const ModelConfig& config, std::uint64_t seed);
  static ParamSet zeros(ModelKind kind, const ModelConfig& config);

  // Learnable tensors in a fixed order. The baseline has no hub and no w5.
  std::vector<ParamRef> refs();
  std::vector<ConstParamRef> refs() const;
  // Throws DimensionError unless every tensor matches `config`.
  void validate() const;
};

std::size_t param_count(const ParamSet& params);

// ---- graph-level building blocks ------------------------------------------

struct HubVars {
  Var w1, w2, w4;
  LstmVars lstm;
};

struct HostVars {
  Var w5, w8;
  LstmVars encoder, decoder;
};

struct BoundParams {
  ModelKind kind = ModelKind::starnet;
  ModelConfig config;
  HubVars hub;
  HostVars host;
  std::vector<Var> vars;  // aligned with ParamSet::refs()
};

BoundParams bind(Graph& g, const ParamSet& params);

// Row-wise W x, no bias or nonlinearity.
Var embed(Var x, Var w, std::string_view role = {});

// s^t = max over pedestrians of W1 p_i, positions [N x 2] -> [1 x hub_embed].
Var hub_spatial(Var positions, Var w1);

struct HubState {
  LstmState lstm;
  Var output;  // LSTM emitted vector (o_c)
  Var r;       // W4 o_c, [1 x host_embed]
};

HubState hub_initial_state(Graph& g, const ModelConfig& config);
// e = W2 s;  (o, h) = LSTM(h, e);  r = W4 o.
HubState hub_step(Var s, const HubState& state, const HubVars& hub);

// q = r (.) W5 p for every pedestrian row; r [1 x E], positions [N x 2].
Var host_integrate(Var r, Var positions, Var w5);

// Runs the shared encoder over the observed steps. `positions[t]` and
// `r_series[t]` are step t (0-based) of the observation; the displacement
// fed at step t is p^t - p^{t-1} (zero at t = 0). Pass an empty r_series for
// the baseline, which reads displacements only.
LstmState host_encode(Graph& g, std::span<const Var> positions, std::span<const Var> r_series, const HostVars& host,
                      std::size_t hidden);

struct HostState {
  LstmState lstm;
  Var position;      // p_hat, [N x 2]
  Var displacement;  // dp_hat, [N x 2]
  Var noise;         // z, [N x noise_dim], fixed for the whole rollout
};

// Decoder seeded from the encoder: state copied, position = last observed,
// displacement = last observed step.
HostState host_decode_init(Graph& g, const LstmState& encoded, const data::Window& window, Var noise);

// One decoder step consuming the previous position and displacement:
//   q = r (.) W5 p_hat;  o = LSTM_D([q, dp_hat, z]);  dp' = W8 o;  p' = p_hat + dp'.
// A null r (baseline) drops q from the input.
HostState host_decode_step(const HostState& state, const Var* r, const HostVars& host);

// Gaussian noise for one sample: row i is drawn from a stream keyed by
// (sample_seed, ped_ids[i]) so it follows the pedestrian, not its row.
Tensor sample_noise(std::uint64_t sample_seed, std::span<const std::int64_t> ped_ids, std::size_t noise_dim);

std::vector<std::uint64_t> sample_seeds(std::uint64_t seed, std::size_t k);

struct RolloutVars {
  std::vector<Var> samples;             // per sample, [N x 2*t_pred] (t-major, then x/y)
  std::vector<Var> r_observed;          // hub r^t for the observed steps
  std::vector<std::vector<Var>> r_predicted;  // per sample, per predicted step
};

// Builds the whole rollout in `g` for a centered window, one sample per seed.
// The hub and host states at the end of observation are shared; each sample
// then forks them and feeds its own predictions back into the hub.
RolloutVars forward(Graph& g, const BoundParams& params, const data::Window& centered,
                    std::span<const std::uint64_t> seeds);

// ---- value-level API ------------------------------------------------------

struct RolloutResult {
  Tensor predictions;  // [K x N x t_pred x 2], centered frame
  Tensor centroid;     // [2]
  Tensor r_observed;   // [t_obs x host_embed]; empty for the baseline
  Tensor r_predicted;  // [K x t_pred x host_embed]; empty for the baseline
  std::map<std::string, std::size_t> census;

  std::size_t k() const { return predictions.dim(0); }
  // predictions + centroid.
  Tensor world_predictions() const;
};

// Centers `window`, then rolls out K samples with seeds derived from `seed`.
RolloutResult rollout(const data::Window& window, const ParamSet& params, std::size_t k, std::uint64_t seed);
RolloutResult rollout(const data::Window& window, const ParamSet& params, std::span<const std::uint64_t> seeds);

RolloutResult starnet_rollout(const data::Window& window, const ParamSet& params, std::size_t k,
                              std::uint64_t seed);
RolloutResult baseline_rollout(const data::Window& window, const ParamSet& params, std::size_t k,
                               std::uint64_t seed);

}  // namespace starnet::model
