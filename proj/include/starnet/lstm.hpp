#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "starnet/graph.hpp"
#include "starnet/tensor.hpp"

namespace starnet {

// Named handle to a learnable tensor, used to walk parameter sets in a fixed
// order for binding, optimisation and serialisation.
struct ParamRef {
  std::string name;
  Tensor* tensor;
};

struct ConstParamRef {
  std::string name;
  const Tensor* tensor;
};

std::size_t param_count(std::span<const ConstParamRef> params);

// Uniform in +-sqrt(6 / (fan_in + fan_out)) for a [fan_out x fan_in] matrix.
Tensor xavier_uniform(std::size_t fan_out, std::size_t fan_in, std::mt19937_64& rng);

// Gate blocks are stacked as (input, forget, cell, output), H rows each.
struct LstmParams {
  Tensor input_weights;      // [4H x D]
  Tensor recurrent_weights;  // [4H x H]
  Tensor bias;               // [4H]

  static LstmParams init(std::size_t input_dim, std::size_t hidden_dim, std::mt19937_64& rng);
  static LstmParams zeros(std::size_t input_dim, std::size_t hidden_dim);

  std::size_t input_dim() const { return input_weights.dim(1); }
  std::size_t hidden_dim() const { return recurrent_weights.dim(1); }

  void append_refs(const std::string& prefix, std::vector<ParamRef>& out);
  void append_refs(const std::string& prefix, std::vector<ConstParamRef>& out) const;
  // Throws DimensionError unless the three tensors agree on D and H.
  void validate(std::string_view name) const;
};

struct LstmVars {
  Var input_weights;
  Var recurrent_weights;
  Var bias;
  std::size_t hidden = 0;
};

LstmVars bind(Graph& g, const LstmParams& p);

struct LstmState {
  Var h;
  Var c;
};

LstmState lstm_zero_state(Graph& g, std::size_t batch, std::size_t hidden);

// One step for a batch of rows: x [B x D], state [B x H] each.
//   gates = x Wx^T + h Wh^T + b,  split (i, f, g, o)
//   c' = sig(f) * c + sig(i) * tanh(g)
//   h' = sig(o) * tanh(c')
// `role` labels the input projection in the graph census (B rows per call).
LstmState lstm_cell(Var x, LstmState state, const LstmVars& p, std::string_view role = {});

}  // namespace starnet
