#include "ringfree/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ringfree/error.hpp"

namespace ringfree::ad {

using kernels::Activation;
using kernels::Exec;

// ---------------------------------------------------------------- ParamStore

ParamId ParamStore::add(std::string name, std::size_t rows, std::size_t cols,
                        std::vector<double> values) {
  if (values.size() != rows * cols) {
    throw InvalidShape("parameter '" + name + "' has " + std::to_string(values.size()) +
                       " values for shape " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  if (find(name)) throw ConfigError("duplicate parameter name '" + name + "'");
  Entry e{std::move(name), rows, cols, std::move(values), {}};
  e.grad.assign(e.value.size(), 0.0);
  entries_.push_back(std::move(e));
  return ParamId{static_cast<std::uint32_t>(entries_.size() - 1)};
}

std::size_t ParamStore::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

std::optional<ParamId> ParamStore::find(const std::string& name) const {
  for (std::size_t k = 0; k < entries_.size(); ++k) {
    if (entries_[k].name == name) return ParamId{static_cast<std::uint32_t>(k)};
  }
  return std::nullopt;
}

void ParamStore::zero_grad() {
  for (auto& e : entries_) std::fill(e.grad.begin(), e.grad.end(), 0.0);
}

// ------------------------------------------------------------------- Stencil

void Stencil::apply(std::span<const double> in, std::span<double> out) const {
  const auto n = static_cast<std::ptrdiff_t>(out_size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < n; ++r) {
    const std::size_t base = static_cast<std::size_t>(r) * taps;
    double acc = 0.0;
    for (std::size_t t = 0; t < taps; ++t) acc += weight[base + t] * in[index[base + t]];
    out[static_cast<std::size_t>(r)] = acc;
  }
}

// ---------------------------------------------------------------------- Tape

Tape::Tape(ParamStore& store, Exec exec, kernels::Precision precision)
    : store_(&store), exec_(exec), precision_(precision) {
  nodes_.reserve(64);
}

namespace {

template <class T>
std::vector<T> take(std::multimap<std::size_t, std::vector<T>>& pool, std::size_t n) {
  auto it = pool.find(n);
  if (it == pool.end()) return std::vector<T>(n);
  auto buf = std::move(it->second);
  pool.erase(it);
  return buf;
}

template <class T>
void give(std::multimap<std::size_t, std::vector<T>>& pool, std::vector<T>&& buf) {
  if (buf.capacity() == 0) return;
  const std::size_t n = buf.size();
  pool.emplace(n, std::move(buf));
}

}  // namespace

std::vector<double> Tape::acquire(std::size_t n) { return take(pool_, n); }

void Tape::release(std::vector<double>&& buf) { give(pool_, std::move(buf)); }

void Tape::clear() {
  for (auto& n : nodes_) {
    release(std::move(n.value));
    release(std::move(n.adj));
    release(std::move(n.aux));
    give(pool_f_, std::move(n.aux_f));
  }
  nodes_.clear();
}

Tape::Node Tape::make(Op op, std::size_t rows, std::size_t cols) {
  Node n;
  n.op = op;
  n.rows = rows;
  n.cols = cols;
  n.value = acquire(rows * cols);
  return n;
}

Var Tape::push(Node&& n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

void Tape::check_same(Var a, Var b, const char* op) const {
  if (at(a).value.size() != at(b).value.size()) {
    throw InvalidShape(std::string(op) + ": operand sizes differ (" +
                       std::to_string(at(a).value.size()) + " vs " +
                       std::to_string(at(b).value.size()) + ")");
  }
}

double Tape::scalar(Var v) const {
  const auto& n = at(v);
  if (n.value.size() != 1) throw InvalidRoot("node is not a scalar");
  return n.value[0];
}

Var Tape::param(ParamId id) {
  auto src = store_->value(id);
  Node n = make(Op::Param, store_->rows(id), store_->cols(id));
  std::copy(src.begin(), src.end(), n.value.begin());
  n.param = id;
  n.needs_grad = true;
  return push(std::move(n));
}

Var Tape::constant(std::span<const double> values, std::size_t rows, std::size_t cols) {
  if (values.size() != rows * cols) throw InvalidShape("constant: size does not match shape");
  Node n = make(Op::Constant, rows, cols);
  std::copy(values.begin(), values.end(), n.value.begin());
  return push(std::move(n));
}

Var Tape::scalar_constant(double v) { return constant(std::span<const double>(&v, 1), 1, 1); }

namespace {

template <class F>
void for_each_index(std::size_t n, F&& f) {
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < sn; ++k) f(static_cast<std::size_t>(k));
}

}  // namespace

#define RINGFREE_BINARY(fname, OPNAME, expr)                                 \
  Var Tape::fname(Var a, Var b) {                                            \
    check_same(a, b, #fname);                                                \
    Node n = make(Op::OPNAME, at(a).rows, at(a).cols);                       \
    const double* x = at(a).value.data();                                    \
    const double* y = at(b).value.data();                                    \
    double* z = n.value.data();                                              \
    for_each_index(n.value.size(), [=](std::size_t k) { z[k] = (expr); });   \
    n.a = a.id;                                                              \
    n.b = b.id;                                                              \
    n.needs_grad = at(a).needs_grad || at(b).needs_grad;                     \
    return push(std::move(n));                                               \
  }

RINGFREE_BINARY(add, Add, x[k] + y[k])
RINGFREE_BINARY(sub, Sub, x[k] - y[k])
RINGFREE_BINARY(mul, Mul, x[k] * y[k])
RINGFREE_BINARY(div, Div, x[k] / y[k])

#undef RINGFREE_BINARY

#define RINGFREE_UNARY(fname, OPNAME, expr)                                  \
  Var Tape::fname(Var a) {                                                   \
    Node n = make(Op::OPNAME, at(a).rows, at(a).cols);                       \
    const double* x = at(a).value.data();                                    \
    double* z = n.value.data();                                              \
    for_each_index(n.value.size(), [=](std::size_t k) { z[k] = (expr); });   \
    n.a = a.id;                                                              \
    n.needs_grad = at(a).needs_grad;                                         \
    return push(std::move(n));                                               \
  }

RINGFREE_UNARY(relu, Relu, x[k] > 0.0 ? x[k] : 0.0)
RINGFREE_UNARY(abs, Abs, std::abs(x[k]))
RINGFREE_UNARY(sqrt, Sqrt, std::sqrt(x[k]))

#undef RINGFREE_UNARY

Var Tape::scale(Var a, double c) {
  Node n = make(Op::Scale, at(a).rows, at(a).cols);
  const double* x = at(a).value.data();
  double* z = n.value.data();
  for_each_index(n.value.size(), [=](std::size_t k) { z[k] = c * x[k]; });
  n.a = a.id;
  n.k = c;
  n.needs_grad = at(a).needs_grad;
  return push(std::move(n));
}

Var Tape::sum(Var a) {
  Node n = make(Op::Sum, 1, 1);
  n.value[0] = kernels::sum(at(a).value, exec_);
  n.a = a.id;
  n.needs_grad = at(a).needs_grad;
  return push(std::move(n));
}

Var Tape::gather(Var a, std::shared_ptr<const std::vector<std::uint32_t>> index,
                 std::size_t rows, std::size_t cols) {
  if (!index || index->size() != rows * cols) throw InvalidShape("gather: index size mismatch");
  const std::size_t src_size = at(a).value.size();
  for (std::uint32_t k : *index) {
    if (k >= src_size) throw IndexError("gather: index out of range");
  }
  Node n = make(Op::Gather, rows, cols);
  const double* x = at(a).value.data();
  const std::uint32_t* idx = index->data();
  double* z = n.value.data();
  for_each_index(n.value.size(), [=](std::size_t k) { z[k] = x[idx[k]]; });
  n.a = a.id;
  n.index = std::move(index);
  n.needs_grad = at(a).needs_grad;
  return push(std::move(n));
}

Var Tape::lincomb(Var a, std::shared_ptr<const Stencil> stencil, std::size_t rows,
                  std::size_t cols) {
  if (!stencil || stencil->out_size() != rows * cols || stencil->in_size != at(a).value.size()) {
    throw InvalidShape("lincomb: stencil does not match operand shapes");
  }
  Node n = make(Op::Lincomb, rows, cols);
  stencil->apply(at(a).value, n.value);
  n.a = a.id;
  n.stencil = std::move(stencil);
  n.needs_grad = at(a).needs_grad;
  return push(std::move(n));
}

Var Tape::dense(Var x, Var w, Var b, Activation act) {
  const auto& xn = at(x);
  const auto& wn = at(w);
  const auto& bn = at(b);
  if (xn.cols != wn.rows || bn.value.size() != wn.cols) {
    throw InvalidShape("dense: incompatible shapes");
  }
  Node n = make(Op::Dense, xn.rows, wn.cols);
  kernels::dense_forward(xn.value, wn.value, bn.value, n.value, xn.rows, xn.cols, wn.cols, act,
                         exec_);
  n.a = x.id;
  n.b = w.id;
  n.c = b.id;
  n.act = act;
  n.needs_grad = xn.needs_grad || wn.needs_grad || bn.needs_grad;
  return push(std::move(n));
}

Var Tape::concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw InvalidShape("concat: no operands");
  const std::size_t rows = at(parts[0]).rows;
  std::size_t cols = 0;
  bool needs = false;
  for (Var p : parts) {
    if (at(p).rows != rows) throw InvalidShape("concat: row counts differ");
    cols += at(p).cols;
    needs = needs || at(p).needs_grad;
  }
  Node n = make(Op::Concat, rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const std::size_t pc = at(p).cols;
    const double* src = at(p).value.data();
    double* dst = n.value.data();
    for_each_index(rows, [=](std::size_t r) {
      std::copy(src + r * pc, src + (r + 1) * pc, dst + r * cols + off);
    });
    off += pc;
    n.parts.push_back(p.id);
  }
  n.needs_grad = needs;
  return push(std::move(n));
}

Var Tape::mlp(Var x, std::span<const Var> weights, std::span<const Var> biases) {
  if (weights.empty() || weights.size() != biases.size()) {
    throw InvalidShape("mlp: need one bias per weight matrix");
  }
  std::vector<std::size_t> widths{at(x).cols};
  std::vector<std::span<const double>> ws, bs;
  bool needs = at(x).needs_grad;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const auto& wn = at(weights[l]);
    const auto& bn = at(biases[l]);
    if (wn.rows != widths.back() || bn.value.size() != wn.cols) {
      throw InvalidShape("mlp: incompatible layer shapes");
    }
    widths.push_back(wn.cols);
    ws.emplace_back(wn.value);
    bs.emplace_back(bn.value);
    needs = needs || wn.needs_grad || bn.needs_grad;
  }
  const kernels::MlpView net{widths, ws, bs};
  const std::size_t rows = at(x).rows;
  Node n = make(Op::Mlp, rows, widths.back());
  const std::size_t hidden = kernels::mlp_hidden_size(net, rows);
  if (precision_ == kernels::Precision::Single) {
    n.aux_f = take(pool_f_, hidden);
    kernels::mlp_forward<float>(net, at(x).value, n.aux_f, n.value, rows, exec_);
  } else {
    n.aux = acquire(hidden);
    kernels::mlp_forward<double>(net, at(x).value, n.aux, n.value, rows, exec_);
  }
  n.a = x.id;
  for (Var w : weights) n.parts.push_back(w.id);
  for (Var b : biases) n.parts.push_back(b.id);
  n.needs_grad = needs;
  return push(std::move(n));
}

std::vector<double>& Tape::adj_of(std::uint32_t id) {
  auto& n = nodes_[id];
  if (n.adj.empty() && !n.value.empty()) {
    n.adj = acquire(n.value.size());
    std::fill(n.adj.begin(), n.adj.end(), 0.0);
  }
  return n.adj;
}

void Tape::backward(Var root) {
  if (root.id >= nodes_.size()) throw InvalidRoot("root is not on this tape");
  if (nodes_[root.id].value.size() != 1) throw InvalidRoot("backward root must be a scalar");
  store_->zero_grad();
  for (auto& n : nodes_) {
    if (!n.adj.empty()) release(std::move(n.adj));
    n.adj = {};
  }
  adj_of(root.id)[0] = 1.0;

  for (std::size_t id = root.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || n.adj.empty()) continue;
    const double* g = n.adj.data();
    const std::size_t sz = n.value.size();
    switch (n.op) {
      case Op::Constant:
        break;
      case Op::Param: {
        auto dst = store_->grad(n.param);
        for (std::size_t k = 0; k < sz; ++k) dst[k] += g[k];
        break;
      }
      case Op::Add:
      case Op::Sub: {
        const double sign = n.op == Op::Add ? 1.0 : -1.0;
        if (nodes_[n.a].needs_grad) {
          double* ga = adj_of(n.a).data();
          for_each_index(sz, [=](std::size_t k) { ga[k] += g[k]; });
        }
        if (nodes_[n.b].needs_grad) {
          double* gb = adj_of(n.b).data();
          for_each_index(sz, [=](std::size_t k) { gb[k] += sign * g[k]; });
        }
        break;
      }
      case Op::Mul: {
        const double* x = nodes_[n.a].value.data();
        const double* y = nodes_[n.b].value.data();
        if (nodes_[n.a].needs_grad) {
          double* ga = adj_of(n.a).data();
          for_each_index(sz, [=](std::size_t k) { ga[k] += g[k] * y[k]; });
        }
        if (nodes_[n.b].needs_grad) {
          double* gb = adj_of(n.b).data();
          for_each_index(sz, [=](std::size_t k) { gb[k] += g[k] * x[k]; });
        }
        break;
      }
      case Op::Div: {
        const double* x = nodes_[n.a].value.data();
        const double* y = nodes_[n.b].value.data();
        if (nodes_[n.a].needs_grad) {
          double* ga = adj_of(n.a).data();
          for_each_index(sz, [=](std::size_t k) { ga[k] += g[k] / y[k]; });
        }
        if (nodes_[n.b].needs_grad) {
          double* gb = adj_of(n.b).data();
          for_each_index(sz, [=](std::size_t k) { gb[k] -= g[k] * x[k] / (y[k] * y[k]); });
        }
        break;
      }
      case Op::Scale: {
        double* ga = adj_of(n.a).data();
        const double c = n.k;
        for_each_index(sz, [=](std::size_t k) { ga[k] += c * g[k]; });
        break;
      }
      case Op::Relu: {
        const double* x = nodes_[n.a].value.data();
        double* ga = adj_of(n.a).data();
        for_each_index(sz, [=](std::size_t k) { ga[k] += x[k] > 0.0 ? g[k] : 0.0; });
        break;
      }
      case Op::Abs: {
        const double* x = nodes_[n.a].value.data();
        double* ga = adj_of(n.a).data();
        for_each_index(sz, [=](std::size_t k) {
          ga[k] += x[k] > 0.0 ? g[k] : (x[k] < 0.0 ? -g[k] : 0.0);
        });
        break;
      }
      case Op::Sqrt: {
        const double* z = n.value.data();
        double* ga = adj_of(n.a).data();
        for_each_index(sz, [=](std::size_t k) { ga[k] += z[k] > 0.0 ? 0.5 * g[k] / z[k] : 0.0; });
        break;
      }
      case Op::Sum: {
        double* ga = adj_of(n.a).data();
        const double g0 = g[0];
        for_each_index(nodes_[n.a].value.size(), [=](std::size_t k) { ga[k] += g0; });
        break;
      }
      case Op::Gather: {
        double* ga = adj_of(n.a).data();
        const auto& idx = *n.index;
        for (std::size_t k = 0; k < sz; ++k) ga[idx[k]] += g[k];
        break;
      }
      case Op::Lincomb: {
        double* ga = adj_of(n.a).data();
        const auto& s = *n.stencil;
        for (std::size_t r = 0; r < sz; ++r) {
          const std::size_t base = r * s.taps;
          for (std::size_t t = 0; t < s.taps; ++t) ga[s.index[base + t]] += s.weight[base + t] * g[r];
        }
        break;
      }
      case Op::Dense: {
        const Node& xn = nodes_[n.a];
        const Node& wn = nodes_[n.b];
        std::span<double> gx;
        if (xn.needs_grad) gx = adj_of(n.a);
        // Weight and bias gradients are always materialized; cheap relative to gx.
        std::span<double> gw = adj_of(n.b);
        std::span<double> gb = adj_of(n.c);
        kernels::dense_backward(xn.value, wn.value, n.value, n.adj, gx, gw, gb, xn.rows, xn.cols,
                                wn.cols, n.act, exec_);
        break;
      }
      case Op::Mlp: {
        const std::size_t layers = n.parts.size() / 2;
        std::vector<std::size_t> widths{nodes_[n.a].cols};
        std::vector<std::span<const double>> ws, bs;
        std::vector<std::span<double>> gws, gbs;
        for (std::size_t l = 0; l < layers; ++l) {
          const std::uint32_t wid = n.parts[l], bid = n.parts[layers + l];
          widths.push_back(nodes_[wid].cols);
          ws.emplace_back(nodes_[wid].value);
          bs.emplace_back(nodes_[bid].value);
          gws.emplace_back(adj_of(wid));
          gbs.emplace_back(adj_of(bid));
        }
        std::span<double> gx;
        if (nodes_[n.a].needs_grad) gx = adj_of(n.a);
        const kernels::MlpView net{widths, ws, bs};
        if (precision_ == kernels::Precision::Single) {
          kernels::mlp_backward<float>(net, nodes_[n.a].value, n.aux_f, n.adj, gx, gws, gbs,
                                       n.rows, exec_);
        } else {
          kernels::mlp_backward<double>(net, nodes_[n.a].value, n.aux, n.adj, gx, gws, gbs,
                                        n.rows, exec_);
        }
        break;
      }
      case Op::Concat: {
        std::size_t off = 0;
        for (std::uint32_t p : n.parts) {
          const std::size_t pc = nodes_[p].cols;
          if (nodes_[p].needs_grad) {
            double* gp = adj_of(p).data();
            const std::size_t cols = n.cols;
            for_each_index(n.rows, [=](std::size_t r) {
              for (std::size_t c = 0; c < pc; ++c) gp[r * pc + c] += g[r * cols + off + c];
            });
          }
          off += pc;
        }
        break;
      }
    }
  }
}

// ---------------------------------------------------------------------- Adam

AdamState::AdamState(const ParamStore& store, std::vector<ParamId> ids, AdamConfig cfg)
    : config(cfg), params(std::move(ids)) {
  if (!(cfg.lr >= 0.0) || !(cfg.eps > 0.0) || !(cfg.beta1 > 0.0 && cfg.beta1 < 1.0) ||
      !(cfg.beta2 > 0.0 && cfg.beta2 < 1.0)) {
    throw ConfigError("invalid Adam hyperparameters");
  }
  for (ParamId id : params) {
    m.emplace_back(store.value(id).size(), 0.0);
    v.emplace_back(store.value(id).size(), 0.0);
  }
}

void adam_step(ParamStore& store, AdamState& s) {
  for (ParamId id : s.params) {
    for (double g : store.grad(id)) {
      if (!std::isfinite(g)) {
        throw NumericalFault("non-finite gradient in parameter '" + store.name(id) + "'");
      }
    }
  }
  s.t += 1;
  const auto& c = s.config;
  const double t = static_cast<double>(s.t);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t p = 0; p < s.params.size(); ++p) {
    auto val = store.value(s.params[p]);
    auto grad = store.grad(s.params[p]);
    auto& m = s.m[p];
    auto& v = s.v[p];
    for (std::size_t k = 0; k < val.size(); ++k) {
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * grad[k];
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * grad[k] * grad[k];
      const double mhat = m[k] / bc1;
      const double vhat = v[k] / bc2;
      val[k] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
  }
}

// ------------------------------------------------------------ gradient check

double check_gradients(const GradFn& fn, std::span<const double> point, double h) {
  std::vector<double> analytic;
  fn(point, &analytic);
  if (analytic.size() != point.size()) throw InvalidShape("gradient size mismatch");
  std::vector<double> x(point.begin(), point.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = fn(x, nullptr);
    x[i] = x0 - h;
    const double fm = fn(x, nullptr);
    x[i] = x0;
    const double fd = (fp - fm) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic[i] - fd) / std::max(1.0, std::abs(analytic[i])));
  }
  return worst;
}

}  // namespace ringfree::ad
