#include "starnet/graph.hpp"

#include <cmath>

#include "starnet/error.hpp"
#include "starnet/kernels.hpp"

namespace starnet {

namespace kn = kernels::omp;

std::string_view op_name(OpTag tag) {
  switch (tag) {
    case OpTag::constant: return "constant";
    case OpTag::parameter: return "parameter";
    case OpTag::matmul: return "matmul";
    case OpTag::linear: return "linear";
    case OpTag::add: return "add";
    case OpTag::sub: return "sub";
    case OpTag::mul: return "mul";
    case OpTag::neg: return "neg";
    case OpTag::scale: return "scale";
    case OpTag::sigmoid: return "sigmoid";
    case OpTag::tanh: return "tanh";
    case OpTag::colwise_max: return "colwise_max";
    case OpTag::concat_cols: return "concat_cols";
    case OpTag::slice_cols: return "slice_cols";
    case OpTag::tile_rows: return "tile_rows";
    case OpTag::reshape: return "reshape";
    case OpTag::sum: return "sum";
    case OpTag::sum_squares: return "sum_squares";
    case OpTag::min_of: return "min_of";
  }
  return "unknown";
}

const Tensor& Var::value() const { return graph->value(*this); }
const Tensor& Var::grad() const { return graph->grad(*this); }

Var Graph::constant(Tensor value) { return push(OpTag::constant, std::move(value), {}, nullptr); }

Var Graph::parameter(Tensor value) { return push(OpTag::parameter, std::move(value), {}, nullptr); }

Var Graph::push(OpTag op, Tensor value, std::vector<std::uint32_t> parents, BackwardRule rule,
                std::string_view role, std::size_t role_rows) {
  Node node;
  node.value = std::move(value);
  node.op = op;
  node.parents = std::move(parents);
  node.rule = std::move(rule);
  node.role = role;
  node.role_rows = role_rows;
  nodes_.push_back(std::move(node));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Tensor& Graph::grad_buffer(std::uint32_t id) {
  Node& node = nodes_.at(id);
  if (!node.has_grad) {
    node.grad = make_unchecked(node.value.shape(), std::vector<double>(node.value.size(), 0.0));
    node.has_grad = true;
  }
  return node.grad;
}

const Tensor& Graph::grad(Var v) const {
  const Node& node = nodes_.at(v.id);
  if (!node.has_grad) {
    node.grad = make_unchecked(node.value.shape(), std::vector<double>(node.value.size(), 0.0));
    node.has_grad = true;
  }
  return node.grad;
}

void Graph::zero_grad() {
  for (Node& node : nodes_) {
    node.grad = Tensor();
    node.has_grad = false;
  }
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw Error("backward: loss belongs to another graph");
  if (value(loss).size() != 1) {
    throw DimensionError("backward needs a scalar loss, got " + shape_string(value(loss).shape()));
  }
  zero_grad();
  grad_buffer(loss.id)[0] = 1.0;
  for (std::int64_t id = loss.id; id >= 0; --id) {
    Node& node = nodes_[static_cast<std::size_t>(id)];
    if (!node.has_grad || !node.rule) continue;
    node.rule(*this, node.grad);
  }
}

std::map<std::string, std::size_t> Graph::census() const {
  std::map<std::string, std::size_t> out;
  for (const Node& node : nodes_) {
    if (!node.role.empty()) out[std::string(node.role)] += node.role_rows;
  }
  return out;
}

std::size_t Graph::census(std::string_view role) const {
  std::size_t total = 0;
  for (const Node& node : nodes_) {
    if (node.role == role) total += node.role_rows;
  }
  return total;
}

namespace {

Graph& graph_of(Var a, Var b) {
  if (a.graph == nullptr || a.graph != b.graph) throw Error("operands belong to different graphs");
  return *a.graph;
}

std::size_t rows_of(const Tensor& t) { return t.rows(); }
std::size_t cols_of(const Tensor& t) { return t.cols(); }

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) throw DimensionError(std::string(op) + " needs a matrix, got " + shape_string(t.shape()));
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

Tensor fresh(const Shape& shape) { return make_unchecked(shape, std::vector<double>(shape_size(shape), 0.0)); }

template <class F>
Var unary(Var a, OpTag tag, F&& f, Graph::BackwardRule rule) {
  const Tensor& x = a.value();
  Tensor out = fresh(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = f(x[i]);
  return a.graph->push(tag, std::move(out), {a.id}, std::move(rule));
}

}  // namespace

Var matmul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix(av, "matmul");
  require_matrix(bv, "matmul");
  const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
  if (bv.dim(0) != k) {
    throw DimensionError("matmul: inner extents differ for " + shape_string(av.shape()) + " and " +
                         shape_string(bv.shape()));
  }
  Tensor out = fresh({m, n});
  kn::gemm_nn(m, k, n, av.data(), bv.data(), out.data(), false);
  const std::uint32_t ia = a.id, ib = b.id;
  return g.push(OpTag::matmul, std::move(out), {ia, ib}, [ia, ib, m, k, n](Graph& gr, const Tensor& go) {
    const Tensor& A = gr.value(Var{&gr, ia});
    const Tensor& B = gr.value(Var{&gr, ib});
    // dA = G B^T, dB = A^T G
    kn::gemm_nt(m, n, k, go.data(), B.data(), gr.grad_buffer(ia).data(), true);
    kn::gemm_tn(m, k, n, A.data(), go.data(), gr.grad_buffer(ib).data(), true);
  });
}

Var linear(Var x, Var w, std::string_view role) {
  Graph& g = graph_of(x, w);
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  require_matrix(wv, "linear");
  const std::size_t rows = rows_of(xv), in = cols_of(xv), out_dim = wv.dim(0);
  if (wv.dim(1) != in) {
    throw DimensionError("linear: weight " + shape_string(wv.shape()) + " cannot embed input " +
                         shape_string(xv.shape()));
  }
  Tensor out = fresh({rows, out_dim});
  kn::gemm_nt(rows, in, out_dim, xv.data(), wv.data(), out.data(), false);
  const std::uint32_t ix = x.id, iw = w.id;
  return g.push(
      OpTag::linear, std::move(out), {ix, iw},
      [ix, iw, rows, in, out_dim](Graph& gr, const Tensor& go) {
        const Tensor& X = gr.value(Var{&gr, ix});
        const Tensor& W = gr.value(Var{&gr, iw});
        // dX = G W, dW = G^T X
        kn::gemm_nn(rows, out_dim, in, go.data(), W.data(), gr.grad_buffer(ix).data(), true);
        kn::gemm_tn(rows, out_dim, in, go.data(), X.data(), gr.grad_buffer(iw).data(), true);
      },
      role, rows);
}

Var add(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape(a.value(), b.value(), "add");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out = fresh(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  const std::uint32_t ia = a.id, ib = b.id;
  return g.push(OpTag::add, std::move(out), {ia, ib}, [ia, ib](Graph& gr, const Tensor& go) {
    Tensor& ga = gr.grad_buffer(ia);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    Tensor& gb = gr.grad_buffer(ib);
    for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i];
  });
}

Var sub(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape(a.value(), b.value(), "sub");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out = fresh(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  const std::uint32_t ia = a.id, ib = b.id;
  return g.push(OpTag::sub, std::move(out), {ia, ib}, [ia, ib](Graph& gr, const Tensor& go) {
    Tensor& ga = gr.grad_buffer(ia);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
    Tensor& gb = gr.grad_buffer(ib);
    for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
  });
}

Var mul(Var a, Var b) {
  Graph& g = graph_of(a, b);
  require_same_shape(a.value(), b.value(), "mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out = fresh(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  const std::uint32_t ia = a.id, ib = b.id;
  return g.push(OpTag::mul, std::move(out), {ia, ib}, [ia, ib](Graph& gr, const Tensor& go) {
    const Tensor& A = gr.value(Var{&gr, ia});
    const Tensor& B = gr.value(Var{&gr, ib});
    Tensor& ga = gr.grad_buffer(ia);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * B[i];
    Tensor& gb = gr.grad_buffer(ib);
    for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * A[i];
  });
}

Var neg(Var a) { return scale(a, -1.0); }

Var scale(Var a, double factor) {
  const std::uint32_t ia = a.id;
  return unary(a, OpTag::scale, [factor](double x) { return factor * x; },
               [ia, factor](Graph& gr, const Tensor& go) {
                 Tensor& ga = gr.grad_buffer(ia);
                 for (std::size_t i = 0; i < go.size(); ++i) ga[i] += factor * go[i];
               });
}

Var sigmoid(Var a) {
  Graph& g = *a.graph;
  const std::uint32_t ia = a.id;
  const std::uint32_t self = static_cast<std::uint32_t>(g.size());
  return unary(a, OpTag::sigmoid, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
               [ia, self](Graph& gr, const Tensor& go) {
                 const Tensor& y = gr.value(Var{&gr, self});
                 Tensor& ga = gr.grad_buffer(ia);
                 for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * y[i] * (1.0 - y[i]);
               });
}

Var tanh(Var a) {
  Graph& g = *a.graph;
  const std::uint32_t ia = a.id;
  const std::uint32_t self = static_cast<std::uint32_t>(g.size());
  return unary(a, OpTag::tanh, [](double x) { return std::tanh(x); },
               [ia, self](Graph& gr, const Tensor& go) {
                 const Tensor& y = gr.value(Var{&gr, self});
                 Tensor& ga = gr.grad_buffer(ia);
                 for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * (1.0 - y[i] * y[i]);
               });
}

Var colwise_max(Var m) {
  const Tensor& mv = m.value();
  require_matrix(mv, "colwise_max");
  const std::size_t rows = mv.dim(0), cols = mv.dim(1);
  if (rows == 0) throw Error("colwise_max over an empty set (no rows)");
  Tensor out = fresh({1, cols});
  std::vector<std::size_t> argmax(cols);
  kn::colwise_max(rows, cols, mv.data(), out.data(), argmax);
  const std::uint32_t im = m.id;
  return m.graph->push(OpTag::colwise_max, std::move(out), {im},
                       [im, cols, argmax = std::move(argmax)](Graph& gr, const Tensor& go) {
                         Tensor& gm = gr.grad_buffer(im);
                         for (std::size_t j = 0; j < cols; ++j) gm[argmax[j] * cols + j] += go[j];
                       });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw DimensionError("concat_cols of nothing");
  Graph& g = *parts.front().graph;
  const std::size_t rows = rows_of(parts.front().value());
  std::vector<std::size_t> widths;
  std::vector<std::uint32_t> ids;
  std::size_t total = 0;
  for (const Var& p : parts) {
    if (p.graph != &g) throw Error("concat_cols: operands belong to different graphs");
    if (rows_of(p.value()) != rows) {
      throw DimensionError("concat_cols: row counts differ (" + shape_string(parts.front().shape()) + " vs " +
                           shape_string(p.shape()) + ")");
    }
    widths.push_back(cols_of(p.value()));
    ids.push_back(p.id);
    total += widths.back();
  }
  Tensor out = fresh({rows, total});
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& pv = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < widths[k]; ++c) out[r * total + offset + c] = pv[r * widths[k] + c];
    }
    offset += widths[k];
  }
  return g.push(OpTag::concat_cols, std::move(out), ids,
                [ids, widths, rows, total](Graph& gr, const Tensor& go) {
                  std::size_t off = 0;
                  for (std::size_t k = 0; k < ids.size(); ++k) {
                    Tensor& gp = gr.grad_buffer(ids[k]);
                    for (std::size_t r = 0; r < rows; ++r) {
                      for (std::size_t c = 0; c < widths[k]; ++c) gp[r * widths[k] + c] += go[r * total + off + c];
                    }
                    off += widths[k];
                  }
                });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  const std::size_t rows = rows_of(av), cols = cols_of(av);
  if (begin > end || end > cols) {
    throw DimensionError("slice_cols [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of range for " +
                         shape_string(av.shape()));
  }
  const std::size_t width = end - begin;
  Tensor out = fresh({rows, width});
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < width; ++c) out[r * width + c] = av[r * cols + begin + c];
  }
  const std::uint32_t ia = a.id;
  return a.graph->push(OpTag::slice_cols, std::move(out), {ia},
                       [ia, rows, cols, begin, width](Graph& gr, const Tensor& go) {
                         Tensor& ga = gr.grad_buffer(ia);
                         for (std::size_t r = 0; r < rows; ++r) {
                           for (std::size_t c = 0; c < width; ++c) ga[r * cols + begin + c] += go[r * width + c];
                         }
                       });
}

Var tile_rows(Var a, std::size_t n) {
  const Tensor& av = a.value();
  if (rows_of(av) != 1) throw DimensionError("tile_rows needs a single row, got " + shape_string(av.shape()));
  const std::size_t cols = cols_of(av);
  Tensor out = fresh({n, cols});
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = av[c];
  }
  const std::uint32_t ia = a.id;
  return a.graph->push(OpTag::tile_rows, std::move(out), {ia}, [ia, n, cols](Graph& gr, const Tensor& go) {
    Tensor& ga = gr.grad_buffer(ia);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < cols; ++c) ga[c] += go[r * cols + c];
    }
  });
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  const std::uint32_t ia = a.id;
  return a.graph->push(OpTag::reshape, std::move(out), {ia}, [ia](Graph& gr, const Tensor& go) {
    Tensor& ga = gr.grad_buffer(ia);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
  });
}

Var sum(Var a) {
  const Tensor& av = a.value();
  double s = 0.0;
  for (double v : av.data()) s += v;
  const std::uint32_t ia = a.id;
  return a.graph->push(OpTag::sum, make_unchecked({1}, {s}), {ia}, [ia](Graph& gr, const Tensor& go) {
    Tensor& ga = gr.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[0];
  });
}

Var sum_squares(Var a) {
  const Tensor& av = a.value();
  double s = 0.0;
  for (double v : av.data()) s += v * v;
  const std::uint32_t ia = a.id;
  return a.graph->push(OpTag::sum_squares, make_unchecked({1}, {s}), {ia}, [ia](Graph& gr, const Tensor& go) {
    const Tensor& A = gr.value(Var{&gr, ia});
    Tensor& ga = gr.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * A[i] * go[0];
  });
}

std::size_t argmin_of(std::span<const Var> scalars) {
  if (scalars.empty()) throw Error("min_of over an empty set");
  std::size_t best = 0;
  for (std::size_t k = 0; k < scalars.size(); ++k) {
    if (scalars[k].value().size() != 1) {
      throw DimensionError("min_of needs scalars, got " + shape_string(scalars[k].shape()));
    }
    if (scalars[k].value()[0] < scalars[best].value()[0]) best = k;
  }
  return best;
}

Var min_of(std::span<const Var> scalars) {
  const std::size_t best = argmin_of(scalars);
  Graph& g = *scalars.front().graph;
  std::vector<std::uint32_t> ids;
  for (const Var& v : scalars) {
    if (v.graph != &g) throw Error("min_of: operands belong to different graphs");
    ids.push_back(v.id);
  }
  const std::uint32_t chosen = ids[best];
  return g.push(OpTag::min_of, make_unchecked({1}, {scalars[best].value()[0]}), ids,
                [chosen](Graph& gr, const Tensor& go) { gr.grad_buffer(chosen)[0] += go[0]; });
}

}  // namespace starnet
