#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>

#include "ringfree/autodiff.hpp"
#include "ringfree/grid.hpp"

namespace ringfree::reg {

/// Regularizer configurations, one per ablation variant.
enum class RegMode {
  SaOnly,        // angular L1 on sorted SA only
  IsOnly,        // detector L2 on sorted IS only
  Both,          // both terms, unweighted IS term
  BothWeighted,  // both terms, IS term weighted by normalized IS
  BothUnsorted,  // both terms, unweighted, no sorting
};

RegMode parse_reg_mode(std::string_view s);  // sa-only, is-only, both, both-weighted, both-unsorted
std::string_view to_string(RegMode m);

bool uses_is_term(RegMode m);
bool uses_sa_term(RegMode m);
bool uses_sorting(RegMode m);
bool uses_weights(RegMode m);

struct RegOptions {
  /// Wrap the last difference around to the first index (otherwise it is 0).
  bool cyclic = true;
  /// Divide the L2 term by sqrt(M*N) and the L1 term by M*N.
  bool size_normalized = false;
};

/// G(i, j) = S(i, j) - S(i, j+1), last column wrapping to column 0.
Grid<double> grad_detector(const Grid<double>& s, bool cyclic = true);
/// G(i, j) = S(i, j) - S(i+1, j), last row wrapping to row 0.
Grid<double> grad_angular(const Grid<double>& s, bool cyclic = true);

/// W(i, j) = S(i, j) / max(S); all ones when max(S) <= 0.
Grid<double> is_weights(const Grid<double>& sorted_is);

/// ||W .* grad_detector(S)||_2 with W from is_weights (weighted) or 1.
double psi_is(const Grid<double>& sorted_is, bool weighted, const RegOptions& opt = {});
/// ||grad_angular(S)||_1
double psi_sa(const Grid<double>& sorted_sa, const RegOptions& opt = {});

/// Difference operators as two-tap stencils over a row-major M x N array.
std::shared_ptr<const ad::Stencil> detector_stencil(std::size_t m, std::size_t n, bool cyclic);
std::shared_ptr<const ad::Stencil> angular_stencil(std::size_t m, std::size_t n, bool cyclic);

/// Tape versions; `sorted` must already be the column-sorted M*N node. The
/// weights of the IS term are computed from the node's value (or taken from
/// `weights` when given) and held constant.
ad::Var psi_is_on_tape(ad::Tape& tape, ad::Var sorted, std::size_t m, std::size_t n, bool weighted,
                       std::shared_ptr<const ad::Stencil> detector, const RegOptions& opt,
                       const Grid<double>* weights = nullptr);
ad::Var psi_sa_on_tape(ad::Tape& tape, ad::Var sorted, std::size_t m, std::size_t n,
                       std::shared_ptr<const ad::Stencil> angular, const RegOptions& opt);

}  // namespace ringfree::reg
