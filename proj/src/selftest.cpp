#include "starnet/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "starnet/graph.hpp"
#include "starnet/synthetic.hpp"
#include "starnet/training.hpp"

namespace starnet::selftest {

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

namespace {

double loss_value(const model::ParamSet& params, const data::Window& w, std::span<const std::uint64_t> seeds) {
  Graph g;
  const auto bound = model::bind(g, params);
  const auto out = model::forward(g, bound, w, seeds);
  return training::variety_loss(out.samples, w.future()).value()[0];
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(3);
  s << std::scientific << v;
  return s.str();
}

CheckResult check(std::string name, bool ok, std::string detail) { return {std::move(name), ok, std::move(detail)}; }

}  // namespace

GradCheck check_model_gradient(const model::ParamSet& params, const data::Window& w, std::size_t k,
                               std::uint64_t seed, double eps) {
  const auto seeds = model::sample_seeds(seed, k);
  Graph g;
  const auto bound = model::bind(g, params);
  const auto out = model::forward(g, bound, w, seeds);
  Var loss = training::variety_loss(out.samples, w.future());
  g.backward(loss);

  GradCheck result;
  model::ParamSet probe = params;
  auto refs = probe.refs();
  for (std::size_t p = 0; p < refs.size(); ++p) {
    const Tensor& analytic = bound.vars[p].grad();
    Tensor& t = *refs[p].tensor;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t[i];
      t[i] = saved + eps;
      const double up = loss_value(probe, w, seeds);
      t[i] = saved - eps;
      const double down = loss_value(probe, w, seeds);
      t[i] = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double err = relative_error(analytic[i], numeric);
      ++result.checked;
      if (err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_param = refs[p].name;
        result.worst_index = i;
        result.worst_analytic = analytic[i];
        result.worst_numeric = numeric;
      }
    }
  }
  return result;
}

std::vector<CheckResult> run_all() {
  std::vector<CheckResult> results;
  const model::ModelConfig tiny = model::ModelConfig::uniform(8, 2);
  const auto params = model::ParamSet::init(model::ModelKind::starnet, tiny, 11);
  data::Window scene = synthetic::smooth_scene(3, 4, 3, 5);

  {
    const auto gc = check_model_gradient(params, data::center_window(scene), 2, 3);
    results.push_back(check("model gradient vs finite differences", gc.max_relative_error < 1e-5,
                            "max rel err " + fmt(gc.max_relative_error) + " at " + gc.worst_param + "[" +
                                std::to_string(gc.worst_index) + "] over " + std::to_string(gc.checked) +
                                " entries"));
  }
  {
    const auto baseline = model::ParamSet::init(model::ModelKind::baseline, tiny, 12);
    const auto gc = check_model_gradient(baseline, data::center_window(scene), 2, 3);
    results.push_back(check("baseline gradient vs finite differences", gc.max_relative_error < 1e-5,
                            "max rel err " + fmt(gc.max_relative_error)));
  }
  {
    const auto a = model::rollout(scene, params, 2, 9).world_predictions();
    const auto b = model::rollout(data::translate_window(scene, 5.3, -2.7), params, 2, 9).world_predictions();
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); i += 2) {
      worst = std::max({worst, std::abs(b[i] - a[i] - 5.3), std::abs(b[i + 1] - a[i + 1] + 2.7)});
    }
    results.push_back(check("translation equivariance", worst < 1e-9, "max deviation " + fmt(worst)));
  }
  {
    const std::size_t order[] = {2, 0, 1};
    const auto a = model::rollout(scene, params, 2, 9);
    const auto b = model::rollout(data::permute_window(scene, order), params, 2, 9);
    bool same = a.r_observed == b.r_observed && a.r_predicted == b.r_predicted;
    const std::size_t n = 3, block = scene.t_pred * 2;
    for (std::size_t k = 0; k < 2 && same; ++k) {
      for (std::size_t i = 0; i < n && same; ++i) {
        for (std::size_t j = 0; j < block; ++j) {
          same = same && b.predictions[(k * n + i) * block + j] == a.predictions[(k * n + order[i]) * block + j];
        }
      }
    }
    results.push_back(check("permutation equivariance", same, same ? "exact" : "mismatch"));
  }
  {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> normal;
    Tensor preds = Tensor::zeros({3, 2, 4, 2}), truth = Tensor::zeros({2, 4, 2});
    for (double& v : preds.data()) v = normal(rng);
    for (double& v : truth.data()) v = normal(rng);
    const auto per_k = training::per_sample_losses(preds, truth);
    const double loss = training::variety_loss(preds, truth);
    const bool ok = loss == *std::min_element(per_k.begin(), per_k.end()) && loss >= 0.0;
    results.push_back(check("variety loss is the minimum over samples", ok, "loss " + fmt(loss)));
  }
  {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> normal;
    bool ok = true;
    for (int trial = 0; trial < 20 && ok; ++trial) {
      Tensor m = Tensor::zeros({5, 4});
      for (double& v : m.data()) v = normal(rng);
      std::vector<std::size_t> perm(5);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      Tensor pm = m;
      for (std::size_t r = 0; r < 5; ++r) {
        for (std::size_t c = 0; c < 4; ++c) pm.at(r, c) = m.at(perm[r], c);
      }
      Graph g;
      ok = colwise_max(g.constant(m)).value() == colwise_max(g.constant(pm)).value();
    }
    results.push_back(check("max pooling is permutation invariant", ok, ok ? "exact" : "mismatch"));
  }
  {
    const auto r = model::rollout(scene, params, 1, 2);
    const std::size_t n = scene.num_peds(), t_obs = scene.t_obs, t_pred = scene.t_pred;
    const bool ok = r.census.at(std::string(model::kHostEmbedRole)) == n * (t_obs + t_pred) &&
                    r.census.at(std::string(model::kHubEmbedRole)) == n * (t_obs + t_pred) &&
                    r.census.at(std::string(model::kHubLstmRole)) == t_obs + t_pred;
    results.push_back(check("graph census is linear in pedestrians", ok, ok ? "N*(T_obs+T_pred) rows" : "mismatch"));
  }
  return results;
}

}  // namespace starnet::selftest
