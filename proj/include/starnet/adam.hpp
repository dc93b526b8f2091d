#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "starnet/lstm.hpp"
#include "starnet/tensor.hpp"

namespace starnet {

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step_count = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  // Zero moments shaped like `params`.
  static AdamState for_params(std::span<const ConstParamRef> params, double lr = 1e-4);
};

// One bias-corrected Adam update, in place. Increments step_count first.
// Throws NonFiniteError naming the parameter if any gradient is NaN/Inf; no
// parameter is touched in that case.
void adam_step(std::span<const ParamRef> params, std::span<const Tensor> grads, AdamState& state);

// Rescales `grads` so their global L2 norm is at most `max_norm`. Returns the
// norm before clipping.
double clip_global_norm(std::span<Tensor> grads, double max_norm);

}  // namespace starnet
