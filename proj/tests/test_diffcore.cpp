#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <random>

#include "fd_oracle.hpp"
#include "starnet/adam.hpp"
#include "starnet/error.hpp"
#include "starnet/graph.hpp"
#include "starnet/lstm.hpp"

using namespace starnet;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data()) v = normal(rng);
  return t;
}

using Build = std::function<Var(Graph&, Var)>;

// Scalarises op(x) with fixed random weights so every output entry matters,
// then compares the analytic gradient of x with finite differences.
double op_gradient_error(const Tensor& x, const Build& build, std::uint64_t seed = 99) {
  Tensor weights;
  auto scalar = [&](Graph& g, Var in) {
    Var out = build(g, in);
    if (weights.size() == 0) weights = random_tensor(out.shape(), seed);
    return sum(mul(out, g.constant(weights)));
  };
  Graph g;
  Var in = g.parameter(x);
  g.backward(scalar(g, in));
  const Tensor analytic = in.grad();
  const Tensor numeric = fd::gradient(
      [&](const Tensor& probe) {
        Graph h;
        return scalar(h, h.constant(probe)).value()[0];
      },
      x);
  return fd::max_rel_error(analytic, numeric);
}

}  // namespace

TEST_CASE("matmul examples") {
  Graph g;
  CHECK(matmul(g.constant(Tensor::identity(2)), g.constant(Tensor::matrix({{3}, {4}}))).value() ==
        Tensor::matrix({{3}, {4}}));
  CHECK(matmul(g.constant(Tensor::matrix({{1, 2}, {3, 4}})), g.constant(Tensor::matrix({{1}, {1}}))).value() ==
        Tensor::matrix({{3}, {7}}));
}

TEST_CASE("matmul shape mismatch names both shapes") {
  Graph g;
  try {
    matmul(g.constant(Tensor::zeros({2, 3})), g.constant(Tensor::zeros({2, 3})));
    FAIL("expected DimensionError");
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2x3]") != std::string::npos);
  }
}

TEST_CASE("gradient of sum(W x) with respect to W matches finite differences") {
  const Tensor w = random_tensor({3, 2}, 1);
  const Tensor x = random_tensor({2, 1}, 2);
  Graph g;
  Var wv = g.parameter(w);
  g.backward(sum(matmul(wv, g.constant(x))));
  const Tensor numeric = fd::gradient(
      [&](const Tensor& probe) {
        Graph h;
        return sum(matmul(h.constant(probe), h.constant(x))).value()[0];
      },
      w);
  CHECK(fd::max_rel_error(wv.grad(), numeric) < 1e-6);
}

TEST_CASE("elementwise examples") {
  Graph g;
  CHECK(mul(g.constant(Tensor::vector({1, 2, 3})), g.constant(Tensor::vector({0, 0, 0}))).value() ==
        Tensor::vector({0, 0, 0}));
  Var x = g.constant(Tensor::vector({1.5, -2, 7}));
  CHECK(add(x, neg(x)).value() == Tensor::vector({0, 0, 0}));

  Graph h;
  Var a = h.parameter(Tensor::vector({2}));
  Var b = h.parameter(Tensor::vector({5}));
  h.backward(sum(mul(a, b)));
  CHECK(a.grad()[0] == 5.0);
  CHECK(b.grad()[0] == 2.0);
}

TEST_CASE("elementwise ops refuse broadcasting") {
  Graph g;
  CHECK_THROWS_AS(add(g.constant(Tensor::zeros({2, 3})), g.constant(Tensor::zeros({1, 3}))), DimensionError);
  CHECK_THROWS_AS(mul(g.constant(Tensor::zeros({3})), g.constant(Tensor::zeros({3, 1}))), DimensionError);
  CHECK_THROWS_AS(sub(g.constant(Tensor::zeros({2})), g.constant(Tensor::zeros({3}))), DimensionError);
}

TEST_CASE("every differentiable op passes a finite-difference check") {
  const Tensor x = random_tensor({4, 3}, 7);
  const Tensor other = random_tensor({4, 3}, 8);
  const Tensor w = random_tensor({5, 3}, 9);
  const std::vector<std::pair<const char*, Build>> ops = {
      {"add", [&](Graph& g, Var v) { return add(v, g.constant(other)); }},
      {"sub", [&](Graph& g, Var v) { return sub(g.constant(other), v); }},
      {"mul", [&](Graph& g, Var v) { return mul(v, g.constant(other)); }},
      {"mul self", [](Graph&, Var v) { return mul(v, v); }},
      {"neg", [](Graph&, Var v) { return neg(v); }},
      {"scale", [](Graph&, Var v) { return scale(v, -2.5); }},
      {"sigmoid", [](Graph&, Var v) { return sigmoid(v); }},
      {"tanh", [](Graph&, Var v) { return tanh(v); }},
      {"linear", [&](Graph& g, Var v) { return linear(v, g.constant(w)); }},
      {"matmul", [&](Graph& g, Var v) { return matmul(g.constant(Tensor::matrix({{1, 2, 0, -1}})), v); }},
      {"colwise_max", [](Graph&, Var v) { return colwise_max(v); }},
      {"concat_cols",
       [&](Graph& g, Var v) {
         const Var parts[] = {v, g.constant(other), v};
         return concat_cols(parts);
       }},
      {"slice_cols", [](Graph&, Var v) { return slice_cols(v, 1, 3); }},
      {"tile_rows", [](Graph&, Var v) { return tile_rows(colwise_max(v), 3); }},
      {"reshape", [](Graph&, Var v) { return reshape(v, {2, 6}); }},
      {"sum", [](Graph&, Var v) { return sum(v); }},
      {"sum_squares", [](Graph&, Var v) { return sum_squares(v); }},
      {"min_of",
       [](Graph&, Var v) {
         const Var parts[] = {sum(v), sum_squares(v), scale(sum(v), 3.0)};
         return min_of(parts);
       }},
  };
  for (const auto& [name, build] : ops) {
    CAPTURE(name);
    CHECK(op_gradient_error(x, build) < 1e-6);
  }
}

TEST_CASE("colwise_max examples and errors") {
  Graph g;
  CHECK(colwise_max(g.constant(Tensor::matrix({{1, 5}, {3, 2}}))).value().data()[0] == 3.0);
  CHECK(colwise_max(g.constant(Tensor::matrix({{1, 5}, {3, 2}}))).value().data()[1] == 5.0);
  const Tensor single = colwise_max(g.constant(Tensor::matrix({{7, 8, 9}}))).value();
  CHECK(std::vector<double>(single.data().begin(), single.data().end()) == std::vector<double>{7, 8, 9});
  CHECK_THROWS_AS(colwise_max(g.constant(Tensor::zeros({0, 3}))), Error);
}

TEST_CASE("colwise_max routes gradient to the lowest tied row") {
  Graph g;
  Var m = g.parameter(Tensor::matrix({{2, 1}, {2, 4}, {0, 4}}));
  g.backward(sum(colwise_max(m)));
  CHECK(m.grad() == Tensor::matrix({{1, 0}, {0, 1}, {0, 0}}));
}

TEST_CASE("colwise_max is invariant to every row permutation") {
  // 100 random matrices with N = 4; all 24 permutations each.
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 100; ++trial) {
    Tensor m = Tensor::zeros({4, 3});
    for (double& v : m.data()) v = normal(rng);
    Graph g;
    const Tensor ref = colwise_max(g.constant(m)).value();
    std::vector<std::size_t> perm = {0, 1, 2, 3};
    do {
      Tensor pm = Tensor::zeros({4, 3});
      for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t c = 0; c < 3; ++c) pm.at(r, c) = m.at(perm[r], c);
      REQUIRE(colwise_max(g.constant(pm)).value() == ref);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST_CASE("values stay valid while the graph grows") {
  Graph g;
  const Tensor& first = g.constant(Tensor::vector({1, 2, 3})).value();
  for (int i = 0; i < 1000; ++i) g.constant(Tensor::vector({0}));
  CHECK(first == Tensor::vector({1, 2, 3}));
}

TEST_CASE("backward needs a scalar loss") {
  Graph g;
  Var x = g.parameter(Tensor::vector({1, 2}));
  CHECK_THROWS_AS(g.backward(scale(x, 2.0)), DimensionError);
}

TEST_CASE("gradients accumulate over shared uses and reset between backward calls") {
  Graph g;
  Var x = g.parameter(Tensor::vector({3}));
  Var y = add(mul(x, x), x);  // y = x^2 + x, dy/dx = 2x + 1
  g.backward(sum(y));
  CHECK(x.grad()[0] == 7.0);
  g.backward(sum(y));
  CHECK(x.grad()[0] == 7.0);
  CHECK(g.op(y) == OpTag::add);
}

TEST_CASE("argmin_of prefers the lowest index on ties") {
  Graph g;
  const Var s[] = {g.constant(Tensor::vector({2})), g.constant(Tensor::vector({1})), g.constant(Tensor::vector({1}))};
  CHECK(argmin_of(s) == 1);
  CHECK(min_of(s).value()[0] == 1.0);
}

TEST_CASE("census counts rows per role") {
  Graph g;
  Var w = g.constant(Tensor::zeros({4, 2}));
  linear(g.constant(Tensor::zeros({5, 2})), w, "a");
  linear(g.constant(Tensor::zeros({3, 2})), w, "a");
  linear(g.constant(Tensor::zeros({1, 2})), w, "b");
  linear(g.constant(Tensor::zeros({9, 2})), w);
  CHECK(g.census("a") == 8);
  CHECK(g.census("b") == 1);
  CHECK(g.census().size() == 2);
}

namespace {

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Scalar-loop LSTM cell, written from the gate equations directly.
void reference_lstm(const Tensor& x, const Tensor& h, const Tensor& c, const LstmParams& p, std::vector<double>& h_out,
                    std::vector<double>& c_out) {
  const std::size_t H = p.hidden_dim(), D = p.input_dim();
  h_out.assign(H, 0.0);
  c_out.assign(H, 0.0);
  auto pre = [&](std::size_t row) {
    double s = p.bias[row];
    for (std::size_t d = 0; d < D; ++d) s += p.input_weights.at(row, d) * x[d];
    for (std::size_t j = 0; j < H; ++j) s += p.recurrent_weights.at(row, j) * h[j];
    return s;
  };
  for (std::size_t j = 0; j < H; ++j) {
    const double i = sig(pre(j)), f = sig(pre(H + j)), g = std::tanh(pre(2 * H + j)), o = sig(pre(3 * H + j));
    c_out[j] = f * c[j] + i * g;
    h_out[j] = o * std::tanh(c_out[j]);
  }
}

}  // namespace

TEST_CASE("lstm_cell matches a scalar reference implementation") {
  std::mt19937_64 rng(5);
  const LstmParams p = LstmParams::init(3, 4, rng);
  const Tensor x = random_tensor({1, 3}, 6), h = random_tensor({1, 4}, 7), c = random_tensor({1, 4}, 8);
  Graph g;
  const auto vars = bind(g, p);
  const auto next = lstm_cell(g.constant(x), {g.constant(h), g.constant(c)}, vars);
  std::vector<double> h_ref, c_ref;
  reference_lstm(x, h, c, p, h_ref, c_ref);
  for (std::size_t j = 0; j < 4; ++j) {
    CHECK(next.h.value()[j] == doctest::Approx(h_ref[j]).epsilon(1e-14));
    CHECK(next.c.value()[j] == doctest::Approx(c_ref[j]).epsilon(1e-14));
  }
}

TEST_CASE("lstm init uses forget bias 1 and Xavier bounds") {
  std::mt19937_64 rng(1);
  const LstmParams p = LstmParams::init(6, 5, rng);
  CHECK(p.input_weights.shape() == Shape{20, 6});
  CHECK(p.recurrent_weights.shape() == Shape{20, 5});
  for (std::size_t j = 0; j < 20; ++j) CHECK(p.bias[j] == (j >= 5 && j < 10 ? 1.0 : 0.0));
  const double bound = std::sqrt(6.0 / (20 + 6));
  for (double v : p.input_weights.data()) CHECK(std::abs(v) <= bound);
}

TEST_CASE("zero LSTM with zero input keeps half the cell") {
  // All gates at sigmoid(0) = 0.5 and tanh(0) = 0: c' = 0.5 c, h' = 0.5 tanh(c').
  const LstmParams p = LstmParams::zeros(2, 3);
  Graph g;
  const auto v = bind(g, p);
  const auto next =
      lstm_cell(g.constant(Tensor::zeros({1, 2})), {g.constant(Tensor::zeros({1, 3})),
                                                    g.constant(Tensor::matrix({{2, -4, 0}}))}, v);
  CHECK(next.c.value().at(0, 0) == doctest::Approx(1.0));
  CHECK(next.c.value().at(0, 1) == doctest::Approx(-2.0));
  CHECK(next.h.value().at(0, 0) == doctest::Approx(0.5 * std::tanh(1.0)));
}

TEST_CASE("lstm_cell Jacobian matches finite differences") {
  std::mt19937_64 rng(11);
  LstmParams p = LstmParams::init(3, 4, rng);
  p.bias = random_tensor({16}, 12, 0.3);
  const Tensor x = random_tensor({1, 3}, 13), h = random_tensor({1, 4}, 14), c = random_tensor({1, 4}, 15);
  const Tensor wh = random_tensor({1, 4}, 16), wc = random_tensor({1, 4}, 17);
  auto loss = [&](Graph& g, Var xv, Var hv, Var cv, const LstmVars& vars) {
    const auto next = lstm_cell(xv, {hv, cv}, vars);
    return add(sum(mul(next.h, g.constant(wh))), sum(mul(next.c, g.constant(wc))));
  };
  Graph g;
  const auto vars = bind(g, p);
  Var xv = g.parameter(x), hv = g.parameter(h), cv = g.parameter(c);
  g.backward(loss(g, xv, hv, cv, vars));

  auto eval_with = [&](const Tensor& xx, const Tensor& hh, const Tensor& cc, const LstmParams& pp) {
    Graph q;
    const auto v = bind(q, pp);
    return loss(q, q.constant(xx), q.constant(hh), q.constant(cc), v).value()[0];
  };
  CHECK(fd::max_rel_error(xv.grad(), fd::gradient([&](const Tensor& t) { return eval_with(t, h, c, p); }, x)) < 1e-6);
  CHECK(fd::max_rel_error(hv.grad(), fd::gradient([&](const Tensor& t) { return eval_with(x, t, c, p); }, h)) < 1e-6);
  CHECK(fd::max_rel_error(cv.grad(), fd::gradient([&](const Tensor& t) { return eval_with(x, h, t, p); }, c)) < 1e-6);
  const auto wx_num = fd::gradient(
      [&](const Tensor& t) {
        LstmParams q = p;
        q.input_weights = t;
        return eval_with(x, h, c, q);
      },
      p.input_weights);
  CHECK(fd::max_rel_error(vars.input_weights.grad(), wx_num) < 1e-6);
  const auto wh_num = fd::gradient(
      [&](const Tensor& t) {
        LstmParams q = p;
        q.recurrent_weights = t;
        return eval_with(x, h, c, q);
      },
      p.recurrent_weights);
  CHECK(fd::max_rel_error(vars.recurrent_weights.grad(), wh_num) < 1e-6);
  const auto b_num = fd::gradient(
      [&](const Tensor& t) {
        LstmParams q = p;
        q.bias = t;
        return eval_with(x, h, c, q);
      },
      p.bias);
  CHECK(fd::max_rel_error(vars.bias.grad(), b_num) < 1e-6);
}

TEST_CASE("lstm validates dimensions") {
  LstmParams p = LstmParams::zeros(3, 4);
  CHECK_NOTHROW(p.validate("ok"));
  p.bias = Tensor::zeros({15});
  CHECK_THROWS_AS(p.validate("bad"), DimensionError);
}

TEST_CASE("adam first step moves each weight by lr against the gradient sign") {
  Tensor w = Tensor::vector({1.0, -2.0, 0.5});
  std::vector<ParamRef> refs = {{"w", &w}};
  std::vector<ConstParamRef> crefs = {{"w", &w}};
  AdamState state = AdamState::for_params(crefs, 0.1);
  const std::vector<Tensor> grads = {Tensor::vector({3.0, -0.2, 0.0})};
  adam_step(refs, grads, state);
  CHECK(state.step_count == 1);
  // Bias correction makes m_hat = g and v_hat = g^2 after one step.
  CHECK(w[0] == doctest::Approx(1.0 - 0.1 * 3.0 / (3.0 + 1e-8)));
  CHECK(w[1] == doctest::Approx(-2.0 + 0.1 * 0.2 / (0.2 + 1e-8)));
  CHECK(w[2] == 0.5);
}

TEST_CASE("adam matches a hand-rolled recurrence over several steps") {
  Tensor w = Tensor::vector({0.3});
  std::vector<ParamRef> refs = {{"w", &w}};
  std::vector<ConstParamRef> crefs = {{"w", &w}};
  AdamState state = AdamState::for_params(crefs, 1e-2);
  double ref = 0.3, m = 0.0, v = 0.0;
  for (int t = 1; t <= 5; ++t) {
    const double grad = 2.0 * ref - 1.0;
    adam_step(refs, std::vector<Tensor>{Tensor::vector({2.0 * w[0] - 1.0})}, state);
    m = 0.9 * m + 0.1 * grad;
    v = 0.999 * v + 0.001 * grad * grad;
    const double mh = m / (1.0 - std::pow(0.9, t)), vh = v / (1.0 - std::pow(0.999, t));
    ref -= 1e-2 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(w[0] == doctest::Approx(ref).epsilon(1e-13));
  }
}

TEST_CASE("adam rejects non-finite and misshaped gradients before touching weights") {
  Tensor w = Tensor::vector({1.0, 2.0});
  std::vector<ParamRef> refs = {{"w", &w}};
  std::vector<ConstParamRef> crefs = {{"w", &w}};
  AdamState state = AdamState::for_params(crefs);
  CHECK_THROWS_AS(adam_step(refs, std::vector<Tensor>{Tensor::vector({1.0})}, state), DimensionError);
  Tensor bad = Tensor::zeros({2});
  bad.data()[1] = std::numeric_limits<double>::quiet_NaN();
  try {
    adam_step(refs, std::vector<Tensor>{bad}, state);
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("w") != std::string::npos);
  }
  CHECK(w == Tensor::vector({1.0, 2.0}));
  CHECK(state.step_count == 0);
}

TEST_CASE("global norm clipping") {
  std::vector<Tensor> g = {Tensor::vector({3.0}), Tensor::vector({4.0})};
  CHECK(clip_global_norm(g, 10.0) == doctest::Approx(5.0));
  CHECK(g[0][0] == 3.0);
  clip_global_norm(g, 1.0);
  CHECK(g[0][0] == doctest::Approx(0.6));
  CHECK(g[1][0] == doctest::Approx(0.8));
}
