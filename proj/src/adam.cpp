#include "starnet/adam.hpp"

#include <cmath>

#include "starnet/error.hpp"

namespace starnet {

AdamState AdamState::for_params(std::span<const ConstParamRef> params, double lr) {
  AdamState s;
  s.lr = lr;
  for (const auto& p : params) {
    s.first_moment.push_back(Tensor::zeros(p.tensor->shape()));
    s.second_moment.push_back(Tensor::zeros(p.tensor->shape()));
  }
  return s;
}

void adam_step(std::span<const ParamRef> params, std::span<const Tensor> grads, AdamState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size() ||
      params.size() != state.second_moment.size()) {
    throw DimensionError("adam_step: " + std::to_string(params.size()) + " params, " + std::to_string(grads.size()) +
                         " grads, " + std::to_string(state.first_moment.size()) + " moment slots");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Shape& shape = params[i].tensor->shape();
    if (grads[i].shape() != shape || state.first_moment[i].shape() != shape ||
        state.second_moment[i].shape() != shape) {
      throw DimensionError("adam_step: shape mismatch for " + params[i].name + " " + shape_string(shape));
    }
    if (!grads[i].all_finite()) throw NonFiniteError("adam_step: non-finite gradient for " + params[i].name);
  }

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = *params[i].tensor;
    Tensor& m = state.first_moment[i];
    Tensor& v = state.second_moment[i];
    const Tensor& g = grads[i];
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      w[j] -= state.lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

double clip_global_norm(std::span<Tensor> grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads) {
    for (double v : g.data()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (Tensor& g : grads) {
      for (double& v : g.data()) v *= factor;
    }
  }
  return norm;
}

}  // namespace starnet
