#include "ringfree/residual.hpp"

#include "ringfree/error.hpp"

namespace ringfree::residual {

namespace {

void require_shape(const Grid<double>& g, const DefectMask& mask, const char* what) {
  if (g.rows() != mask.n_angles() || g.cols() != mask.n_detectors()) {
    throw InvalidShape(std::string(what) + " does not match the mask shape");
  }
}

}  // namespace

ResidualField residual(const Sinogram& p, const Sinogram& is_hat, const Sinogram& sa_hat,
                       const DefectMask& mask) {
  if (!p.same_shape(is_hat) || !p.same_shape(sa_hat)) {
    throw InvalidShape("residual operands differ in shape");
  }
  require_shape(p.values(), mask, "sinogram");
  ResidualField r{Grid<double>(p.n_angles(), p.n_detectors()), mask};
  for (std::size_t i = 0; i < p.n_angles(); ++i) {
    for (std::size_t j = 0; j < p.n_detectors(); ++j) {
      if (mask.good(i, j)) r.e(i, j) = p(i, j) - is_hat(i, j) - sa_hat(i, j);
    }
  }
  return r;
}

ResidualField center_angular(const ResidualField& e) {
  ResidualField out{Grid<double>(e.e.rows(), e.e.cols()), e.mask};
  const std::size_t m = e.e.rows();
  for (std::size_t j = 0; j < e.e.cols(); ++j) {
    if (!e.mask.column_good(j)) continue;
    double mean = 0.0;
    for (std::size_t i = 0; i < m; ++i) mean += e.e(i, j);
    mean /= static_cast<double>(m);
    for (std::size_t i = 0; i < m; ++i) out.e(i, j) = e.e(i, j) - mean;
  }
  return out;
}

Sinogram compensate(const Sinogram& is_hat, const ResidualField& e_tilde, double kappa) {
  return compensate(is_hat, is_hat.values(), e_tilde, kappa);
}

Sinogram compensate(const Sinogram& is_hat, const Grid<double>& scale,
                    const ResidualField& e_tilde, double kappa) {
  if (!(kappa >= 0.0)) throw ConfigError("kappa must be >= 0");
  require_shape(is_hat.values(), e_tilde.mask, "IS prediction");
  require_shape(e_tilde.e, e_tilde.mask, "residual");
  require_shape(scale, e_tilde.mask, "scale");
  Sinogram out = is_hat;
  if (kappa == 0.0) return out;
  for (std::size_t i = 0; i < out.n_angles(); ++i) {
    for (std::size_t j = 0; j < out.n_detectors(); ++j) {
      if (e_tilde.mask.good(i, j)) out(i, j) += kappa * scale(i, j) * e_tilde.e(i, j);
    }
  }
  return out;
}

}  // namespace ringfree::residual
