#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "starnet/data.hpp"
#include "starnet/model.hpp"

namespace starnet::selftest {

// |a - b| / max(|a|, |b|, floor). The floor keeps gradients that are zero up
// to rounding from dominating the maximum.
double relative_error(double analytic, double numeric, double floor = 1e-4);

struct GradCheck {
  double max_relative_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked = 0;
};

// Variety-loss gradient of every parameter entry against central finite
// differences of the forward pass.
GradCheck check_model_gradient(const model::ParamSet& params, const data::Window& centered, std::size_t k,
                               std::uint64_t seed, double eps = 1e-5);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Gradient check, translation/permutation equivariance, variety-loss and
// pooling invariants on tiny configurations. Seconds to run.
std::vector<CheckResult> run_all();

}  // namespace starnet::selftest
