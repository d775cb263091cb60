#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ringfree/autodiff.hpp"
#include "ringfree/inr.hpp"
#include "ringfree/regularizers.hpp"
#include "ringfree/sinogram.hpp"

namespace ringfree::train {

struct TrainConfig {
  std::size_t iterations = 5000;
  double lr = 1e-4;
  double lambda_is_start = 1e-4;
  double lambda_is_end = 5e-3;
  double lambda_sa_start = 1e-4;
  double lambda_sa_end = 1e-3;
  /// Fraction of the run over which the lambdas ramp linearly to their end values.
  double ramp_fraction = 0.8;
  double kappa = 1.0;
  double mu = 1e-6;
  reg::RegMode reg_mode = reg::RegMode::BothWeighted;
  reg::RegOptions reg_options;
  std::uint64_t seed = 0;
  std::size_t log_every = 100;
  /// Arithmetic of the network evaluation during training. Predictions are always double.
  kernels::Precision precision = kernels::Precision::Single;

  /// Throws ConfigError on violated invariants.
  void validate() const;
};

struct Lambdas {
  double is = 0.0;
  double sa = 0.0;
};

/// Linear ramp from the start values at iteration 0 to the end values at
/// floor(ramp_fraction * iterations), constant afterwards.
Lambdas lambda_schedule(std::size_t iter, const TrainConfig& config);

struct LossTerms {
  double total = 0.0;
  double data = 0.0;
  double psi_is = 0.0;
  double psi_sa = 0.0;
};

/// Reference evaluation of the training objective on plain arrays: masked
/// mean absolute error plus the mode's regularizers. The sort order comes
/// from is_hat. Terms excluded by the mode are reported as 0.
LossTerms total_loss(const Sinogram& p, const DefectMask& mask, const Grid<double>& is_hat,
                     const Grid<double>& sa_hat, Lambdas lambdas, reg::RegMode mode,
                     const reg::RegOptions& opt = {});

/// Records the objective of one iteration on a tape. Holds the per-problem
/// constants (encoding stencils, difference stencils, mask indices).
class LossGraph {
 public:
  LossGraph(const inr::Model& model, const Sinogram& p_norm, const DefectMask& mask,
            reg::RegMode mode, const reg::RegOptions& opt);

  /// The non-differentiated parts of the objective: sort order and IS weights.
  struct Frozen {
    std::shared_ptr<const std::vector<std::uint32_t>> order;
    Grid<double> weights;
  };
  /// Sort order and weights at the model's current parameters.
  Frozen freeze(const inr::Model& model) const;

  /// Returns the terms and sets *root to the total-loss node. With `frozen`,
  /// the sort order and weights are taken from it instead of the current IS
  /// (used to compare against finite differences).
  LossTerms record(ad::Tape& tape, const inr::Model& model, Lambdas lambdas, ad::Var* root,
                   const Frozen* frozen = nullptr) const;
  /// Number of iterations so far in which the IS weights fell back to ones.
  std::size_t weight_fallbacks() const noexcept { return *fallbacks_; }

 private:
  std::size_t m_, n_;
  reg::RegMode mode_;
  reg::RegOptions opt_;
  std::vector<double> target_;
  std::shared_ptr<const std::vector<std::uint32_t>> good_;
  inr::Encoding encoding_;
  std::shared_ptr<const ad::Stencil> detector_;
  std::shared_ptr<const ad::Stencil> angular_;
  std::shared_ptr<std::size_t> fallbacks_;
};

struct LogRecord {
  std::size_t iter = 0;
  LossTerms terms;
  Lambdas lambdas;
  double elapsed_s = 0.0;
};

struct TrainReport {
  std::vector<LogRecord> records;
  double wall_seconds = 0.0;
  std::size_t weight_fallbacks = 0;

  /// One JSON object per line:
  /// {"iter","loss","data","psi_is","psi_sa","lam_is","lam_sa","elapsed_s"}
  std::string to_jsonl() const;
  void write_jsonl(const std::filesystem::path& path) const;
};

struct TrainResult {
  inr::Model model;
  NormParams norm;
  DefectMask mask;
  TrainReport report;
};

using Observer = std::function<void(const LogRecord&)>;

/// Defect detection, normalization, initialization and the full-grid
/// optimization loop (one Adam step each for the IS network and the stripe
/// matrix per iteration). Throws EmptyMask or NumericalFault.
TrainResult train(const Sinogram& p, const TrainConfig& config, const Observer& observer = {});

/// F_theta on every pixel in normalized units, no clamping.
Grid<double> predict_is_normalized(const inr::Model& model);
/// F_theta on every pixel, denormalized, negatives clamped to 0.
Sinogram predict_is(const inr::Model& model, const NormParams& norm);
/// Stripe matrix in sinogram units (scaled by hi - lo, no offset).
Sinogram predict_sa(const inr::Model& model, const NormParams& norm);

}  // namespace ringfree::train
