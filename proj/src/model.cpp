#include "starnet/model.hpp"

#include <random>

#include "starnet/error.hpp"
#include "starnet/rng.hpp"

namespace starnet::model {

ModelConfig ModelConfig::uniform(std::size_t width, std::size_t noise_dim) {
  ModelConfig c;
  c.hub_embed = c.hub_input = c.hub_hidden = c.host_embed = c.host_hidden = width;
  c.noise_dim = noise_dim;
  return c;
}

void ModelConfig::validate() const {
  if (hub_embed == 0 || hub_input == 0 || hub_hidden == 0 || host_embed == 0 || host_hidden == 0) {
    throw DimensionError("model dimensions must be positive");
  }
}

std::string_view kind_name(ModelKind kind) { return kind == ModelKind::starnet ? "starnet" : "baseline"; }

ModelKind parse_kind(std::string_view name) {
  if (name == "starnet") return ModelKind::starnet;
  if (name == "baseline") return ModelKind::baseline;
  throw Error("unknown model kind '" + std::string(name) + "' (expected starnet or baseline)");
}

namespace {

std::size_t encoder_input(ModelKind kind, const ModelConfig& c) {
  return kind == ModelKind::starnet ? c.encoder_input() : 2;
}

std::size_t decoder_input(ModelKind kind, const ModelConfig& c) {
  return kind == ModelKind::starnet ? c.decoder_input() : 2 + c.noise_dim;
}

void expect_shape(const Tensor& t, const Shape& shape, const std::string& name) {
  if (t.shape() != shape) {
    throw DimensionError("parameter " + name + " has shape " + shape_string(t.shape()) + ", expected " +
                         shape_string(shape));
  }
}

void expect_lstm(const LstmParams& p, std::size_t in, std::size_t hidden, const std::string& name) {
  expect_shape(p.input_weights, {4 * hidden, in}, name + ".input_weights");
  expect_shape(p.recurrent_weights, {4 * hidden, hidden}, name + ".recurrent_weights");
  expect_shape(p.bias, {4 * hidden}, name + ".bias");
}

}  // namespace

ParamSet ParamSet::init(ModelKind kind, const ModelConfig& c, std::uint64_t seed) {
  c.validate();
  std::mt19937_64 rng(seed);
  ParamSet p;
  p.kind = kind;
  p.config = c;
  if (kind == ModelKind::starnet) {
    p.hub.w1 = xavier_uniform(c.hub_embed, 2, rng);
    p.hub.w2 = xavier_uniform(c.hub_input, c.hub_embed, rng);
    p.hub.lstm = LstmParams::init(c.hub_input, c.hub_hidden, rng);
    p.hub.w4 = xavier_uniform(c.host_embed, c.hub_hidden, rng);
    p.host.w5 = xavier_uniform(c.host_embed, 2, rng);
  }
  p.host.encoder = LstmParams::init(encoder_input(kind, c), c.host_hidden, rng);
  p.host.decoder = LstmParams::init(decoder_input(kind, c), c.host_hidden, rng);
  p.host.w8 = xavier_uniform(2, c.host_hidden, rng);
  return p;
}

ParamSet ParamSet::zeros(ModelKind kind, const ModelConfig& c) {
  c.validate();
  ParamSet p;
  p.kind = kind;
  p.config = c;
  if (kind == ModelKind::starnet) {
    p.hub.w1 = Tensor::zeros({c.hub_embed, 2});
    p.hub.w2 = Tensor::zeros({c.hub_input, c.hub_embed});
    p.hub.lstm = LstmParams::zeros(c.hub_input, c.hub_hidden);
    p.hub.w4 = Tensor::zeros({c.host_embed, c.hub_hidden});
    p.host.w5 = Tensor::zeros({c.host_embed, 2});
  }
  p.host.encoder = LstmParams::zeros(encoder_input(kind, c), c.host_hidden);
  p.host.decoder = LstmParams::zeros(decoder_input(kind, c), c.host_hidden);
  p.host.w8 = Tensor::zeros({2, c.host_hidden});
  return p;
}

std::vector<ParamRef> ParamSet::refs() {
  std::vector<ParamRef> out;
  if (kind == ModelKind::starnet) {
    out.push_back({"hub.w1", &hub.w1});
    out.push_back({"hub.w2", &hub.w2});
    hub.lstm.append_refs("hub.lstm", out);
    out.push_back({"hub.w4", &hub.w4});
    out.push_back({"host.w5", &host.w5});
  }
  host.encoder.append_refs("host.encoder", out);
  host.decoder.append_refs("host.decoder", out);
  out.push_back({"host.w8", &host.w8});
  return out;
}

std::vector<ConstParamRef> ParamSet::refs() const {
  std::vector<ConstParamRef> out;
  if (kind == ModelKind::starnet) {
    out.push_back({"hub.w1", &hub.w1});
    out.push_back({"hub.w2", &hub.w2});
    hub.lstm.append_refs("hub.lstm", out);
    out.push_back({"hub.w4", &hub.w4});
    out.push_back({"host.w5", &host.w5});
  }
  host.encoder.append_refs("host.encoder", out);
  host.decoder.append_refs("host.decoder", out);
  out.push_back({"host.w8", &host.w8});
  return out;
}

void ParamSet::validate() const {
  const ModelConfig& c = config;
  c.validate();
  if (kind == ModelKind::starnet) {
    expect_shape(hub.w1, {c.hub_embed, 2}, "hub.w1");
    expect_shape(hub.w2, {c.hub_input, c.hub_embed}, "hub.w2");
    expect_lstm(hub.lstm, c.hub_input, c.hub_hidden, "hub.lstm");
    expect_shape(hub.w4, {c.host_embed, c.hub_hidden}, "hub.w4");
    expect_shape(host.w5, {c.host_embed, 2}, "host.w5");
  }
  expect_lstm(host.encoder, encoder_input(kind, c), c.host_hidden, "host.encoder");
  expect_lstm(host.decoder, decoder_input(kind, c), c.host_hidden, "host.decoder");
  expect_shape(host.w8, {2, c.host_hidden}, "host.w8");
}

std::size_t param_count(const ParamSet& params) {
  const auto refs = params.refs();
  return starnet::param_count(refs);
}

BoundParams bind(Graph& g, const ParamSet& params) {
  params.validate();
  BoundParams b;
  b.kind = params.kind;
  b.config = params.config;
  if (params.kind == ModelKind::starnet) {
    b.hub.w1 = g.parameter(params.hub.w1);
    b.hub.w2 = g.parameter(params.hub.w2);
    b.hub.lstm = starnet::bind(g, params.hub.lstm);
    b.hub.w4 = g.parameter(params.hub.w4);
    b.host.w5 = g.parameter(params.host.w5);
    b.vars = {b.hub.w1, b.hub.w2, b.hub.lstm.input_weights, b.hub.lstm.recurrent_weights, b.hub.lstm.bias,
              b.hub.w4, b.host.w5};
  }
  b.host.encoder = starnet::bind(g, params.host.encoder);
  b.host.decoder = starnet::bind(g, params.host.decoder);
  b.host.w8 = g.parameter(params.host.w8);
  for (Var v : {b.host.encoder.input_weights, b.host.encoder.recurrent_weights, b.host.encoder.bias,
                b.host.decoder.input_weights, b.host.decoder.recurrent_weights, b.host.decoder.bias, b.host.w8}) {
    b.vars.push_back(v);
  }
  return b;
}

Var embed(Var x, Var w, std::string_view role) { return linear(x, w, role); }

Var hub_spatial(Var positions, Var w1) {
  if (positions.value().rows() == 0) throw Error("hub_spatial: no pedestrians");
  return colwise_max(embed(positions, w1, kHubEmbedRole));
}

HubState hub_initial_state(Graph& g, const ModelConfig& config) {
  HubState s;
  s.lstm = lstm_zero_state(g, 1, config.hub_hidden);
  s.output = s.lstm.h;
  s.r = g.constant(Tensor::zeros({1, config.host_embed}));
  return s;
}

HubState hub_step(Var s, const HubState& state, const HubVars& hub) {
  Var e = embed(s, hub.w2);
  HubState next;
  next.lstm = lstm_cell(e, state.lstm, hub.lstm, kHubLstmRole);
  next.output = next.lstm.h;
  next.r = embed(next.output, hub.w4);
  return next;
}

Var host_integrate(Var r, Var positions, Var w5) {
  const std::size_t n = positions.value().rows();
  return mul(tile_rows(r, n), embed(positions, w5, kHostEmbedRole));
}

LstmState host_encode(Graph& g, std::span<const Var> positions, std::span<const Var> r_series, const HostVars& host,
                      std::size_t hidden) {
  if (positions.size() < 2) throw Error("host_encode: need at least 2 observed steps");
  const bool gated = !r_series.empty();
  if (gated && r_series.size() != positions.size()) {
    throw DimensionError("host_encode: " + std::to_string(r_series.size()) + " hub outputs for " +
                         std::to_string(positions.size()) + " observed steps");
  }
  const std::size_t n = positions.front().value().rows();
  LstmState state = lstm_zero_state(g, n, hidden);
  for (std::size_t t = 0; t < positions.size(); ++t) {
    Var dp = t == 0 ? g.constant(Tensor::zeros({n, 2})) : sub(positions[t], positions[t - 1]);
    Var input = dp;
    if (gated) {
      const Var parts[] = {host_integrate(r_series[t], positions[t], host.w5), dp};
      input = concat_cols(parts);
    }
    state = lstm_cell(input, state, host.encoder, kEncoderRole);
  }
  return state;
}

HostState host_decode_init(Graph& g, const LstmState& encoded, const data::Window& window, Var noise) {
  const Tensor last = window.at_step(window.t_obs - 1);
  const Tensor prev = window.at_step(window.t_obs - 2);
  Tensor dp = last;
  for (std::size_t i = 0; i < dp.size(); ++i) dp[i] -= prev[i];
  HostState s;
  s.lstm = encoded;
  s.position = g.constant(last);
  s.displacement = g.constant(std::move(dp));
  s.noise = noise;
  return s;
}

HostState host_decode_step(const HostState& state, const Var* r, const HostVars& host) {
  std::vector<Var> parts;
  if (r != nullptr) parts.push_back(host_integrate(*r, state.position, host.w5));
  parts.push_back(state.displacement);
  parts.push_back(state.noise);
  Var input = concat_cols(parts);
  HostState next;
  next.lstm = lstm_cell(input, state.lstm, host.decoder, kDecoderRole);
  next.displacement = embed(next.lstm.h, host.w8);
  next.position = add(state.position, next.displacement);
  next.noise = state.noise;
  return next;
}

Tensor sample_noise(std::uint64_t sample_seed, std::span<const std::int64_t> ped_ids, std::size_t noise_dim) {
  Tensor z = Tensor::zeros({ped_ids.size(), noise_dim});
  for (std::size_t i = 0; i < ped_ids.size(); ++i) {
    std::mt19937_64 rng(mix_seed(sample_seed, static_cast<std::uint64_t>(ped_ids[i])));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (std::size_t d = 0; d < noise_dim; ++d) z[i * noise_dim + d] = normal(rng);
  }
  return z;
}

std::vector<std::uint64_t> sample_seeds(std::uint64_t seed, std::size_t k) {
  std::vector<std::uint64_t> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = mix_seed(seed, i);
  return out;
}

RolloutVars forward(Graph& g, const BoundParams& params, const data::Window& w, std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw Error("rollout needs at least one sample (K >= 1)");
  if (w.num_peds() == 0) throw Error("rollout: window has no pedestrians");
  if (w.t_obs < 2) throw Error("rollout: t_obs must be at least 2");
  const bool star = params.kind == ModelKind::starnet;
  const ModelConfig& c = params.config;

  std::vector<Var> observed;
  for (std::size_t t = 0; t < w.t_obs; ++t) observed.push_back(g.constant(w.at_step(t)));

  RolloutVars out;
  HubState hub = star ? hub_initial_state(g, c) : HubState{};
  if (star) {
    for (const Var& p : observed) {
      hub = hub_step(hub_spatial(p, params.hub.w1), hub, params.hub);
      out.r_observed.push_back(hub.r);
    }
  }
  const LstmState encoded = host_encode(g, observed, out.r_observed, params.host, c.host_hidden);

  for (std::uint64_t seed : seeds) {
    Var noise = g.constant(sample_noise(seed, w.ped_ids, c.noise_dim));
    HostState host = host_decode_init(g, encoded, w, noise);
    HubState hub_k = hub;
    std::vector<Var> positions;
    std::vector<Var> rs;
    for (std::size_t t = 0; t < w.t_pred; ++t) {
      if (star) {
        hub_k = hub_step(hub_spatial(host.position, params.hub.w1), hub_k, params.hub);
        rs.push_back(hub_k.r);
        host = host_decode_step(host, &hub_k.r, params.host);
      } else {
        host = host_decode_step(host, nullptr, params.host);
      }
      positions.push_back(host.position);
    }
    out.samples.push_back(concat_cols(positions));
    out.r_predicted.push_back(std::move(rs));
  }
  return out;
}

Tensor RolloutResult::world_predictions() const {
  Tensor out = predictions;
  for (std::size_t i = 0; i < out.size(); i += 2) {
    out[i] += centroid[0];
    out[i + 1] += centroid[1];
  }
  return out;
}

RolloutResult rollout(const data::Window& window, const ParamSet& params, std::span<const std::uint64_t> seeds) {
  const data::Window centered = data::center_window(window);
  Graph g;
  const BoundParams bound = bind(g, params);
  const RolloutVars vars = forward(g, bound, centered, seeds);

  const std::size_t k = seeds.size(), n = centered.num_peds(), t_pred = centered.t_pred;
  RolloutResult result;
  result.centroid = centered.centroid;
  std::vector<double> preds;
  preds.reserve(k * n * t_pred * 2);
  for (const Var& s : vars.samples) {
    const auto d = s.value().data();
    preds.insert(preds.end(), d.begin(), d.end());
  }
  result.predictions = Tensor({k, n, t_pred, 2}, std::move(preds));
  if (params.kind == ModelKind::starnet) {
    const std::size_t e = params.config.host_embed;
    std::vector<double> ro;
    for (const Var& r : vars.r_observed) ro.insert(ro.end(), r.value().data().begin(), r.value().data().end());
    result.r_observed = Tensor({vars.r_observed.size(), e}, std::move(ro));
    std::vector<double> rp;
    for (const auto& per_sample : vars.r_predicted) {
      for (const Var& r : per_sample) rp.insert(rp.end(), r.value().data().begin(), r.value().data().end());
    }
    result.r_predicted = Tensor({k, t_pred, e}, std::move(rp));
  }
  result.census = g.census();
  return result;
}

RolloutResult rollout(const data::Window& window, const ParamSet& params, std::size_t k, std::uint64_t seed) {
  const auto seeds = sample_seeds(seed, k);
  return rollout(window, params, seeds);
}

RolloutResult starnet_rollout(const data::Window& window, const ParamSet& params, std::size_t k, std::uint64_t seed) {
  if (params.kind != ModelKind::starnet) throw Error("starnet_rollout: parameters are for the baseline");
  return rollout(window, params, k, seed);
}

RolloutResult baseline_rollout(const data::Window& window, const ParamSet& params, std::size_t k, std::uint64_t seed) {
  if (params.kind != ModelKind::baseline) throw Error("baseline_rollout: parameters are for StarNet");
  return rollout(window, params, k, seed);
}

}  // namespace starnet::model
