#include "starnet/lstm.hpp"

#include <cmath>

#include "starnet/error.hpp"

namespace starnet {

std::size_t param_count(std::span<const ConstParamRef> params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor->size();
  return n;
}

Tensor xavier_uniform(std::size_t fan_out, std::size_t fan_in, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  std::vector<double> data(fan_out * fan_in);
  for (double& v : data) v = dist(rng);
  return Tensor({fan_out, fan_in}, std::move(data));
}

LstmParams LstmParams::init(std::size_t input_dim, std::size_t hidden_dim, std::mt19937_64& rng) {
  if (input_dim == 0 || hidden_dim == 0) throw DimensionError("LSTM dimensions must be positive");
  LstmParams p;
  p.input_weights = xavier_uniform(4 * hidden_dim, input_dim, rng);
  p.recurrent_weights = xavier_uniform(4 * hidden_dim, hidden_dim, rng);
  p.bias = Tensor::zeros({4 * hidden_dim});
  for (std::size_t j = hidden_dim; j < 2 * hidden_dim; ++j) p.bias[j] = 1.0;
  return p;
}

LstmParams LstmParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
  LstmParams p;
  p.input_weights = Tensor::zeros({4 * hidden_dim, input_dim});
  p.recurrent_weights = Tensor::zeros({4 * hidden_dim, hidden_dim});
  p.bias = Tensor::zeros({4 * hidden_dim});
  return p;
}

void LstmParams::append_refs(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".input_weights", &input_weights});
  out.push_back({prefix + ".recurrent_weights", &recurrent_weights});
  out.push_back({prefix + ".bias", &bias});
}

void LstmParams::append_refs(const std::string& prefix, std::vector<ConstParamRef>& out) const {
  out.push_back({prefix + ".input_weights", &input_weights});
  out.push_back({prefix + ".recurrent_weights", &recurrent_weights});
  out.push_back({prefix + ".bias", &bias});
}

void LstmParams::validate(std::string_view name) const {
  const auto fail = [&](const std::string& why) {
    throw DimensionError("LSTM " + std::string(name) + ": " + why + " (input " +
                         shape_string(input_weights.shape()) + ", recurrent " +
                         shape_string(recurrent_weights.shape()) + ", bias " + shape_string(bias.shape()) + ")");
  };
  if (input_weights.rank() != 2 || recurrent_weights.rank() != 2 || bias.rank() != 1) fail("bad tensor ranks");
  const std::size_t h = recurrent_weights.dim(1);
  if (h == 0 || input_weights.dim(1) == 0) fail("empty dimension");
  if (recurrent_weights.dim(0) != 4 * h || input_weights.dim(0) != 4 * h || bias.dim(0) != 4 * h) {
    fail("gate rows must be 4*H");
  }
}

LstmVars bind(Graph& g, const LstmParams& p) {
  p.validate("bind");
  return LstmVars{g.parameter(p.input_weights), g.parameter(p.recurrent_weights), g.parameter(p.bias),
                  p.hidden_dim()};
}

LstmState lstm_zero_state(Graph& g, std::size_t batch, std::size_t hidden) {
  return LstmState{g.constant(Tensor::zeros({batch, hidden})), g.constant(Tensor::zeros({batch, hidden}))};
}

LstmState lstm_cell(Var x, LstmState state, const LstmVars& p, std::string_view role) {
  const std::size_t hidden = p.hidden;
  const std::size_t batch = x.value().rows();
  if (state.h.value().rows() != batch || state.h.value().cols() != hidden || state.c.shape() != state.h.shape()) {
    throw DimensionError("lstm_cell: state " + shape_string(state.h.shape()) + "/" + shape_string(state.c.shape()) +
                         " does not match batch " + std::to_string(batch) + " x hidden " + std::to_string(hidden));
  }
  Var gates = add(linear(x, p.input_weights, role), linear(state.h, p.recurrent_weights));
  gates = add(gates, tile_rows(p.bias, batch));
  Var in_gate = sigmoid(slice_cols(gates, 0, hidden));
  Var forget_gate = sigmoid(slice_cols(gates, hidden, 2 * hidden));
  Var cell_input = tanh(slice_cols(gates, 2 * hidden, 3 * hidden));
  Var out_gate = sigmoid(slice_cols(gates, 3 * hidden, 4 * hidden));
  Var c_next = add(mul(forget_gate, state.c), mul(in_gate, cell_input));
  Var h_next = mul(out_gate, tanh(c_next));
  return LstmState{h_next, c_next};
}

}  // namespace starnet
