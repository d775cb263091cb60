#pragma once

#include "ringfree/residual.hpp"
#include "ringfree/trainer.hpp"

namespace ringfree {

struct CorrectionResult {
  train::TrainResult trained;
  Sinogram is_hat;     // denormalized, clamped network prediction
  Sinogram sa_hat;     // stripe estimate in sinogram units
  Sinogram corrected;  // after residual compensation with config.kappa
};

/// Training followed by IS prediction and residual compensation. The
/// compensation amplifies the centered residual by the normalized IS value.
CorrectionResult run_correction(const Sinogram& p, const train::TrainConfig& config,
                                const train::Observer& observer = {});

/// Compensation step alone, for reuse with other kappa values.
Sinogram compensate_prediction(const Sinogram& p, const Sinogram& is_hat, const Sinogram& sa_hat,
                               const DefectMask& mask, const NormParams& norm, double kappa);

}  // namespace ringfree
