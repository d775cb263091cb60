#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ringfree/kernels.hpp"

namespace ringfree::ad {

struct ParamId {
  std::uint32_t index = 0;
  friend bool operator==(ParamId, ParamId) = default;
};

/// Named, shaped parameter arrays with a gradient buffer of identical shape.
class ParamStore {
 public:
  ParamId add(std::string name, std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t count() const noexcept { return entries_.size(); }
  /// Total number of scalar parameters across all entries.
  std::size_t scalar_count() const noexcept;

  const std::string& name(ParamId id) const { return entries_.at(id.index).name; }
  std::size_t rows(ParamId id) const { return entries_.at(id.index).rows; }
  std::size_t cols(ParamId id) const { return entries_.at(id.index).cols; }
  std::span<double> value(ParamId id) { return entries_.at(id.index).value; }
  std::span<const double> value(ParamId id) const { return entries_.at(id.index).value; }
  std::span<double> grad(ParamId id) { return entries_.at(id.index).grad; }
  std::span<const double> grad(ParamId id) const { return entries_.at(id.index).grad; }
  std::optional<ParamId> find(const std::string& name) const;

  void zero_grad();

  friend bool operator==(const ParamStore&, const ParamStore&) = default;

 private:
  struct Entry {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> value;
    std::vector<double> grad;
    friend bool operator==(const Entry&, const Entry&) = default;
  };
  std::vector<Entry> entries_;
};

/// Fixed-tap sparse linear map: out[r] = sum_t weight[r*taps+t] * in[index[r*taps+t]].
struct Stencil {
  std::size_t taps = 0;
  std::size_t in_size = 0;
  std::vector<std::uint32_t> index;
  std::vector<double> weight;

  std::size_t out_size() const noexcept { return taps == 0 ? 0 : index.size() / taps; }
  void apply(std::span<const double> in, std::span<double> out) const;
};

/// Handle to a tape node.
struct Var {
  std::uint32_t id = 0;
};

/// Eagerly-evaluated reverse-mode tape over flat row-major arrays. Values are
/// computed as nodes are recorded; backward() walks the nodes in reverse.
/// Nodes only ever reference earlier nodes.
class Tape {
 public:
  /// `precision` selects the arithmetic of mlp nodes; everything else is double.
  explicit Tape(ParamStore& store, kernels::Exec exec = kernels::Exec::Parallel,
                kernels::Precision precision = kernels::Precision::Double);

  /// Drops all nodes; their buffers are kept for reuse by the next recording.
  void clear();
  std::size_t node_count() const noexcept { return nodes_.size(); }

  Var param(ParamId id);
  Var constant(std::span<const double> values, std::size_t rows, std::size_t cols);
  Var scalar_constant(double v);

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var scale(Var a, double c);
  Var relu(Var a);  // relu'(0) = 0
  Var abs(Var a);   // abs'(0) = 0
  Var sqrt(Var a);  // sqrt'(0) taken as 0
  Var sum(Var a);   // -> 1x1
  /// out[k] = a[index[k]]; backward scatters (adds) into a.
  Var gather(Var a, std::shared_ptr<const std::vector<std::uint32_t>> index, std::size_t rows,
             std::size_t cols);
  Var lincomb(Var a, std::shared_ptr<const Stencil> stencil, std::size_t rows, std::size_t cols);
  /// act(x * w + b) with x rows x in, w in x out, b 1 x out.
  Var dense(Var x, Var w, Var b, kernels::Activation act);
  Var concat_cols(std::span<const Var> parts);
  /// Whole ReLU network in one node (see kernels::mlp_forward); weights[l] is
  /// widths[l] x widths[l+1], biases[l] is 1 x widths[l+1].
  Var mlp(Var x, std::span<const Var> weights, std::span<const Var> biases);

  std::span<const double> value(Var v) const { return nodes_.at(v.id).value; }
  double scalar(Var v) const;
  std::size_t rows(Var v) const { return nodes_.at(v.id).rows; }
  std::size_t cols(Var v) const { return nodes_.at(v.id).cols; }

  /// Fills the store's gradient buffers with d(root)/d(param); parameters not
  /// reachable from root get zero. Throws InvalidRoot for non-scalar roots.
  void backward(Var root);
  /// Adjoint of an arbitrary node after backward(); empty if it received none.
  std::span<const double> adjoint(Var v) const { return nodes_.at(v.id).adj; }

 private:
  enum class Op : std::uint8_t {
    Param, Constant, Add, Sub, Mul, Div, Scale, Relu, Abs, Sqrt, Sum, Gather, Lincomb, Dense,
    Concat, Mlp
  };
  struct Node {
    Op op = Op::Constant;
    std::uint32_t a = 0, b = 0, c = 0;
    std::vector<std::uint32_t> parts;
    double k = 0.0;
    kernels::Activation act = kernels::Activation::Identity;
    std::shared_ptr<const std::vector<std::uint32_t>> index;
    std::shared_ptr<const Stencil> stencil;
    ParamId param;
    bool needs_grad = false;
    std::size_t rows = 0, cols = 0;
    std::vector<double> value;
    std::vector<double> adj;
    std::vector<double> aux;  // hidden activations of Mlp nodes
    std::vector<float> aux_f;
  };

  std::vector<double> acquire(std::size_t n);
  void release(std::vector<double>&& buf);
  Var push(Node&& n);
  Node make(Op op, std::size_t rows, std::size_t cols);
  const Node& at(Var v) const { return nodes_.at(v.id); }
  void check_same(Var a, Var b, const char* op) const;
  std::vector<double>& adj_of(std::uint32_t id);

  ParamStore* store_;
  kernels::Exec exec_;
  std::vector<Node> nodes_;
  kernels::Precision precision_;
  std::multimap<std::size_t, std::vector<double>> pool_;
  std::multimap<std::size_t, std::vector<float>> pool_f_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Moments for one group of parameters.
struct AdamState {
  AdamState(const ParamStore& store, std::vector<ParamId> params, AdamConfig config);

  AdamConfig config;
  std::vector<ParamId> params;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t t = 0;
};

/// One bias-corrected Adam update using the store's gradients. A NaN/Inf
/// gradient raises NumericalFault before anything is modified.
void adam_step(ParamStore& store, AdamState& state);

/// Value-and-gradient function over a flat point.
using GradFn = std::function<double(std::span<const double> point, std::vector<double>* grad)>;

/// max_i |analytic_i - central_difference_i| / max(1, |analytic_i|)
double check_gradients(const GradFn& fn, std::span<const double> point, double h = 1e-6);

}  // namespace ringfree::ad
