#include "ringfree/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "ringfree/error.hpp"

namespace ringfree::train {

void TrainConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(lambda_is_start >= 0.0) || !(lambda_sa_start >= 0.0)) {
    throw ConfigError("lambda start values must be >= 0");
  }
  if (!(lambda_is_end >= lambda_is_start) || !(lambda_sa_end >= lambda_sa_start)) {
    throw ConfigError("lambda end values must be >= start values");
  }
  if (!(ramp_fraction > 0.0 && ramp_fraction <= 1.0)) {
    throw ConfigError("ramp fraction must lie in (0, 1]");
  }
  if (!(kappa >= 0.0)) throw ConfigError("kappa must be >= 0");
  if (!(mu > 0.0)) throw ConfigError("mu must be positive");
  if (log_every < 1) throw ConfigError("log interval must be >= 1");
}

Lambdas lambda_schedule(std::size_t iter, const TrainConfig& c) {
  const auto horizon = static_cast<std::size_t>(std::floor(c.ramp_fraction * static_cast<double>(c.iterations)));
  if (horizon == 0 || iter >= horizon) return {c.lambda_is_end, c.lambda_sa_end};
  const double t = static_cast<double>(iter) / static_cast<double>(horizon);
  return {c.lambda_is_start + t * (c.lambda_is_end - c.lambda_is_start),
          c.lambda_sa_start + t * (c.lambda_sa_end - c.lambda_sa_start)};
}

LossTerms total_loss(const Sinogram& p, const DefectMask& mask, const Grid<double>& is_hat,
                     const Grid<double>& sa_hat, Lambdas lambdas, reg::RegMode mode,
                     const reg::RegOptions& opt) {
  const std::size_t m = p.n_angles(), n = p.n_detectors();
  if (is_hat.rows() != m || is_hat.cols() != n || sa_hat.rows() != m || sa_hat.cols() != n ||
      mask.n_angles() != m || mask.n_detectors() != n) {
    throw InvalidShape("loss operands differ in shape");
  }
  const std::size_t count = mask.good_pixels();
  if (count == 0) throw EmptyMask("no non-defective pixels in the data term");
  LossTerms t;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (mask.good(i, j)) t.data += std::abs(is_hat(i, j) + sa_hat(i, j) - p(i, j));
    }
  }
  t.data /= static_cast<double>(count);

  Grid<double> is_s = is_hat, sa_s = sa_hat;
  if (reg::uses_sorting(mode)) {
    const auto perm = sort_permutation(is_hat.flat(), m, n);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        is_s(i, j) = is_hat(perm(i, j), j);
        sa_s(i, j) = sa_hat(perm(i, j), j);
      }
    }
  }
  if (reg::uses_is_term(mode)) t.psi_is = reg::psi_is(is_s, reg::uses_weights(mode), opt);
  if (reg::uses_sa_term(mode)) t.psi_sa = reg::psi_sa(sa_s, opt);
  t.total = t.data + lambdas.is * t.psi_is + lambdas.sa * t.psi_sa;
  return t;
}

// ----------------------------------------------------------------- LossGraph

LossGraph::LossGraph(const inr::Model& model, const Sinogram& p_norm, const DefectMask& mask,
                     reg::RegMode mode, const reg::RegOptions& opt)
    : m_(p_norm.n_angles()),
      n_(p_norm.n_detectors()),
      mode_(mode),
      opt_(opt),
      target_(p_norm.flat().begin(), p_norm.flat().end()),
      good_(std::make_shared<const std::vector<std::uint32_t>>(mask.good_indices())),
      encoding_(inr::build_pixel_encoding(model)),
      detector_(reg::detector_stencil(m_, n_, opt.cyclic)),
      angular_(reg::angular_stencil(m_, n_, opt.cyclic)),
      fallbacks_(std::make_shared<std::size_t>(0)) {
  if (model.n_angles != m_ || model.n_detectors != n_) {
    throw InvalidShape("model shape does not match the sinogram");
  }
  if (good_->empty()) throw EmptyMask("no non-defective pixels in the data term");
}

LossGraph::Frozen LossGraph::freeze(const inr::Model& model) const {
  const auto v = inr::theta_batch(model, encoding_);
  const auto perm = sort_permutation(v, m_, n_);
  Frozen f;
  f.order = std::make_shared<const std::vector<std::uint32_t>>(perm.gather_indices());
  Grid<double> sorted(m_, n_);
  for (std::size_t k = 0; k < sorted.size(); ++k) sorted[k] = v[(*f.order)[k]];
  f.weights = reg::is_weights(sorted);
  return f;
}

LossTerms LossGraph::record(ad::Tape& tape, const inr::Model& model, Lambdas lambdas,
                            ad::Var* root, const Frozen* frozen) const {
  const std::size_t count = m_ * n_;
  ad::Var is = inr::theta_on_tape(tape, model, encoding_);
  ad::Var sa = tape.param(model.stripe.matrix);

  ad::Var resid = tape.sub(tape.add(is, sa), tape.constant(target_, count, 1));
  ad::Var data = tape.scale(tape.sum(tape.abs(tape.gather(resid, good_, good_->size(), 1))),
                            1.0 / static_cast<double>(good_->size()));
  LossTerms t;
  t.data = tape.scalar(data);
  ad::Var total = data;

  ad::Var is_s = is, sa_s = sa;
  if (reg::uses_sorting(mode_)) {
    std::shared_ptr<const std::vector<std::uint32_t>> idx;
    if (frozen) {
      idx = frozen->order;
    } else {
      const auto perm = sort_permutation(tape.value(is), m_, n_);
      idx = std::make_shared<const std::vector<std::uint32_t>>(perm.gather_indices());
    }
    is_s = tape.gather(is, idx, count, 1);
    sa_s = tape.gather(sa, idx, count, 1);
  }
  if (reg::uses_is_term(mode_)) {
    const bool weighted = reg::uses_weights(mode_);
    if (weighted && !frozen) {
      const auto v = tape.value(is_s);
      if (!(*std::max_element(v.begin(), v.end()) > 0.0)) ++*fallbacks_;
    }
    ad::Var psi = reg::psi_is_on_tape(tape, is_s, m_, n_, weighted, detector_, opt_,
                                      frozen ? &frozen->weights : nullptr);
    t.psi_is = tape.scalar(psi);
    total = tape.add(total, tape.scale(psi, lambdas.is));
  }
  if (reg::uses_sa_term(mode_)) {
    ad::Var psi = reg::psi_sa_on_tape(tape, sa_s, m_, n_, angular_, opt_);
    t.psi_sa = tape.scalar(psi);
    total = tape.add(total, tape.scale(psi, lambdas.sa));
  }
  t.total = tape.scalar(total);
  if (root) *root = total;
  return t;
}

// -------------------------------------------------------------------- report

std::string TrainReport::to_jsonl() const {
  std::ostringstream os;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["iter"] = r.iter;
    j["loss"] = r.terms.total;
    j["data"] = r.terms.data;
    j["psi_is"] = r.terms.psi_is;
    j["psi_sa"] = r.terms.psi_sa;
    j["lam_is"] = r.lambdas.is;
    j["lam_sa"] = r.lambdas.sa;
    j["elapsed_s"] = r.elapsed_s;
    os << j.dump() << '\n';
  }
  return os.str();
}

void TrainReport::write_jsonl(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << to_jsonl();
}

// --------------------------------------------------------------------- train

TrainResult train(const Sinogram& p, const TrainConfig& config, const Observer& observer) {
  config.validate();
  const auto start = std::chrono::steady_clock::now();
  auto mask = detect_defective(p, config.mu);
  if (mask.good_columns() == 0) throw EmptyMask("every detector column is defective");
  auto [p_norm, norm] = normalize(p, mask);

  inr::Model model = inr::init_params(p.n_angles(), p.n_detectors(), config.seed);
  const LossGraph graph(model, p_norm, mask, config.reg_mode, config.reg_options);

  ad::AdamConfig adam_cfg;
  adam_cfg.lr = config.lr;
  ad::AdamState theta_opt(model.store, model.theta_params(), adam_cfg);
  ad::AdamState phi_opt(model.store, model.phi_params(), adam_cfg);

  TrainReport report;
  ad::Tape tape(model.store, kernels::Exec::Parallel, config.precision);
  for (std::size_t it = 0; it < config.iterations; ++it) {
    const Lambdas lam = lambda_schedule(it, config);
    tape.clear();
    ad::Var root;
    const LossTerms terms = graph.record(tape, model, lam, &root);
    if (!std::isfinite(terms.total)) {
      throw NumericalFault("loss became non-finite at iteration " + std::to_string(it));
    }
    if (it % config.log_every == 0 || it + 1 == config.iterations) {
      const double el = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      report.records.push_back({it, terms, lam, el});
      if (observer) observer(report.records.back());
    }
    tape.backward(root);
    ad::adam_step(model.store, theta_opt);
    ad::adam_step(model.store, phi_opt);
  }
  report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.weight_fallbacks = graph.weight_fallbacks();
  if (report.weight_fallbacks > 0) {
    std::clog << "note: IS weights fell back to ones in " << report.weight_fallbacks
              << " iterations (non-positive maximum)\n";
  }
  return {std::move(model), norm, std::move(mask), std::move(report)};
}

Grid<double> predict_is_normalized(const inr::Model& model) {
  const auto enc = inr::build_pixel_encoding(model);
  return Grid<double>(model.n_angles, model.n_detectors, inr::theta_batch(model, enc));
}

Sinogram predict_is(const inr::Model& model, const NormParams& norm) {
  auto g = predict_is_normalized(model);
  const double span = norm.hi - norm.lo;
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = std::max(0.0, norm.lo + g[k] * span);
  return Sinogram(std::move(g));
}

Sinogram predict_sa(const inr::Model& model, const NormParams& norm) {
  const auto v = model.store.value(model.stripe.matrix);
  const double span = norm.hi - norm.lo;
  Grid<double> g(model.n_angles, model.n_detectors);
  for (std::size_t k = 0; k < g.size(); ++k) g[k] = v[k] * span;
  return Sinogram(std::move(g));
}

}  // namespace ringfree::train
