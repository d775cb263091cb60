#pragma once

#include "ringfree/grid.hpp"
#include "ringfree/sinogram.hpp"

namespace ringfree::residual {

/// Modeling residual; zero on defective columns by convention.
struct ResidualField {
  Grid<double> e;
  DefectMask mask;
};

/// E = P - IS - SA on non-defective pixels.
ResidualField residual(const Sinogram& p, const Sinogram& is_hat, const Sinogram& sa_hat,
                       const DefectMask& mask);

/// Subtracts the per-column angular mean from every non-defective column.
ResidualField center_angular(const ResidualField& e);

/// out = IS + kappa * scale .* E~ on non-defective pixels, out = IS elsewhere.
/// `scale` is the IS magnitude used for amplification (IS itself by default).
Sinogram compensate(const Sinogram& is_hat, const ResidualField& e_tilde, double kappa);
Sinogram compensate(const Sinogram& is_hat, const Grid<double>& scale,
                    const ResidualField& e_tilde, double kappa);

}  // namespace ringfree::residual
