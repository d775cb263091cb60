#include "ringfree/pipeline.hpp"

namespace ringfree {

Sinogram compensate_prediction(const Sinogram& p, const Sinogram& is_hat, const Sinogram& sa_hat,
                               const DefectMask& mask, const NormParams& norm, double kappa) {
  const auto e = residual::center_angular(residual::residual(p, is_hat, sa_hat, mask));
  Grid<double> scale(is_hat.n_angles(), is_hat.n_detectors());
  const double span = norm.hi - norm.lo;
  for (std::size_t k = 0; k < scale.size(); ++k) scale[k] = (is_hat.flat()[k] - norm.lo) / span;
  return residual::compensate(is_hat, scale, e, kappa);
}

CorrectionResult run_correction(const Sinogram& p, const train::TrainConfig& config,
                                const train::Observer& observer) {
  auto trained = train::train(p, config, observer);
  auto is_hat = train::predict_is(trained.model, trained.norm);
  auto sa_hat = train::predict_sa(trained.model, trained.norm);
  auto corrected =
      compensate_prediction(p, is_hat, sa_hat, trained.mask, trained.norm, config.kappa);
  return {std::move(trained), std::move(is_hat), std::move(sa_hat), std::move(corrected)};
}

}  // namespace ringfree
