#include "ringfree/regularizers.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "ringfree/error.hpp"

namespace ringfree::reg {

RegMode parse_reg_mode(std::string_view s) {
  if (s == "sa-only") return RegMode::SaOnly;
  if (s == "is-only") return RegMode::IsOnly;
  if (s == "both") return RegMode::Both;
  if (s == "both-weighted") return RegMode::BothWeighted;
  if (s == "both-unsorted") return RegMode::BothUnsorted;
  throw ConfigError("unknown regularizer mode '" + std::string(s) + "'");
}

std::string_view to_string(RegMode m) {
  switch (m) {
    case RegMode::SaOnly: return "sa-only";
    case RegMode::IsOnly: return "is-only";
    case RegMode::Both: return "both";
    case RegMode::BothWeighted: return "both-weighted";
    case RegMode::BothUnsorted: return "both-unsorted";
  }
  return "both-weighted";
}

bool uses_is_term(RegMode m) { return m != RegMode::SaOnly; }
bool uses_sa_term(RegMode m) { return m != RegMode::IsOnly; }
bool uses_sorting(RegMode m) { return m != RegMode::BothUnsorted; }
bool uses_weights(RegMode m) { return m == RegMode::BothWeighted; }

Grid<double> grad_detector(const Grid<double>& s, bool cyclic) {
  const std::size_t n = s.cols();
  if (n < 2) throw InvalidShape("detector gradient needs at least 2 detector bins");
  Grid<double> g(s.rows(), n);
  for (std::size_t i = 0; i < s.rows(); ++i) {
    for (std::size_t j = 0; j + 1 < n; ++j) g(i, j) = s(i, j) - s(i, j + 1);
    g(i, n - 1) = cyclic ? s(i, n - 1) - s(i, 0) : 0.0;
  }
  return g;
}

Grid<double> grad_angular(const Grid<double>& s, bool cyclic) {
  const std::size_t m = s.rows();
  if (m < 2) throw InvalidShape("angular gradient needs at least 2 view angles");
  Grid<double> g(m, s.cols());
  for (std::size_t j = 0; j < s.cols(); ++j) {
    for (std::size_t i = 0; i + 1 < m; ++i) g(i, j) = s(i, j) - s(i + 1, j);
    g(m - 1, j) = cyclic ? s(m - 1, j) - s(0, j) : 0.0;
  }
  return g;
}

Grid<double> is_weights(const Grid<double>& sorted_is) {
  const auto flat = sorted_is.flat();
  const double mx = flat.empty() ? 0.0 : *std::max_element(flat.begin(), flat.end());
  Grid<double> w(sorted_is.rows(), sorted_is.cols(), 1.0);
  if (!(mx > 0.0)) return w;
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = flat[k] / mx;
  return w;
}

double psi_is(const Grid<double>& sorted_is, bool weighted, const RegOptions& opt) {
  const auto g = grad_detector(sorted_is, opt.cyclic);
  const auto w = weighted ? is_weights(sorted_is) : Grid<double>(g.rows(), g.cols(), 1.0);
  double acc = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) acc += (w[k] * g[k]) * (w[k] * g[k]);
  double v = std::sqrt(acc);
  if (opt.size_normalized) v /= std::sqrt(static_cast<double>(g.size()));
  return v;
}

double psi_sa(const Grid<double>& sorted_sa, const RegOptions& opt) {
  const auto g = grad_angular(sorted_sa, opt.cyclic);
  double acc = 0.0;
  for (double v : g.flat()) acc += std::abs(v);
  if (opt.size_normalized) acc /= static_cast<double>(g.size());
  return acc;
}

namespace {

std::shared_ptr<const ad::Stencil> difference_stencil(std::size_t m, std::size_t n, bool cyclic,
                                                      bool along_detector) {
  if (along_detector ? n < 2 : m < 2) throw InvalidShape("difference stencil needs 2 samples");
  auto s = std::make_shared<ad::Stencil>();
  s->taps = 2;
  s->in_size = m * n;
  s->index.resize(2 * m * n);
  s->weight.resize(2 * m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const std::size_t p = i * n + j;
      const bool last = along_detector ? j + 1 == n : i + 1 == m;
      std::size_t q;
      if (along_detector) {
        q = last ? i * n : p + 1;
      } else {
        q = last ? j : p + n;
      }
      const bool active = !last || cyclic;
      s->index[2 * p] = static_cast<std::uint32_t>(p);
      s->index[2 * p + 1] = static_cast<std::uint32_t>(q);
      s->weight[2 * p] = active ? 1.0 : 0.0;
      s->weight[2 * p + 1] = active ? -1.0 : 0.0;
    }
  }
  return s;
}

}  // namespace

std::shared_ptr<const ad::Stencil> detector_stencil(std::size_t m, std::size_t n, bool cyclic) {
  return difference_stencil(m, n, cyclic, true);
}

std::shared_ptr<const ad::Stencil> angular_stencil(std::size_t m, std::size_t n, bool cyclic) {
  return difference_stencil(m, n, cyclic, false);
}

ad::Var psi_is_on_tape(ad::Tape& tape, ad::Var sorted, std::size_t m, std::size_t n, bool weighted,
                       std::shared_ptr<const ad::Stencil> detector, const RegOptions& opt,
                       const Grid<double>* weights) {
  ad::Var g = tape.lincomb(sorted, std::move(detector), m, n);
  if (weighted && weights) {
    if (weights->rows() != m || weights->cols() != n) throw InvalidShape("IS weights shape");
    g = tape.mul(g, tape.constant(weights->flat(), m, n));
  } else if (weighted) {
    const auto v = tape.value(sorted);
    const auto w = is_weights(Grid<double>(m, n, std::vector<double>(v.begin(), v.end())));
    g = tape.mul(g, tape.constant(w.flat(), m, n));
  }
  ad::Var r = tape.sqrt(tape.sum(tape.mul(g, g)));
  if (opt.size_normalized) r = tape.scale(r, 1.0 / std::sqrt(static_cast<double>(m * n)));
  return r;
}

ad::Var psi_sa_on_tape(ad::Tape& tape, ad::Var sorted, std::size_t m, std::size_t n,
                       std::shared_ptr<const ad::Stencil> angular, const RegOptions& opt) {
  ad::Var r = tape.sum(tape.abs(tape.lincomb(sorted, std::move(angular), m, n)));
  if (opt.size_normalized) r = tape.scale(r, 1.0 / static_cast<double>(m * n));
  return r;
}

}  // namespace ringfree::reg
