// Acceptance checks at desk scale. Prints one PASS/FAIL line per criterion and
// exits non-zero when any selected criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "../common/oracles.hpp"
#include "ringfree/ctsim.hpp"
#include "ringfree/inr.hpp"
#include "ringfree/io.hpp"
#include "ringfree/metrics.hpp"
#include "ringfree/pipeline.hpp"
#include "ringfree/regularizers.hpp"
#include "ringfree/trainer.hpp"

namespace fs = std::filesystem;
using namespace ringfree;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

// ------------------------------------------------------------------ fixtures

struct DeskData {
  ct::FanBeamGeometry geometry = ct::FanBeamGeometry::desk();
  std::size_t image_size = 256;
  Sinogram clean{2, 2};
  Sinogram corrupted{2, 2};
  ct::CorruptionTruth truth;
};

// Same recipe as `ringfree simulate --desk`.
const DeskData& desk() {
  static const DeskData data = [] {
    DeskData d;
    d.clean = ct::simulate_projection("shepp-logan", d.geometry, d.image_size);
    auto c = ct::corrupt(d.clean, ct::CorruptionSpec::desk());
    d.corrupted = std::move(c.sinogram);
    d.truth = std::move(c.truth);
    return d;
  }();
  return data;
}

struct Trained {
  inr::Model model;
  NormParams norm;
  DefectMask mask{2, {true, true}};
  double train_seconds = 0.0;
  Sinogram is_hat{2, 2};
  Sinogram sa_hat{2, 2};
};

// Training runs on the desk data, cached in the work directory so that the
// ctest entries can share them.
class Runs {
 public:
  Runs(fs::path dir, std::size_t iters) : dir_(std::move(dir)), iters_(iters) {
    if (!dir_.empty()) fs::create_directories(dir_);
  }

  const Trained& get(reg::RegMode mode) {
    const std::string key = std::string(reg::to_string(mode));
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    return cache_.emplace(key, load_or_train(mode)).first->second;
  }
  std::size_t iterations() const { return iters_; }

 private:
  Trained load_or_train(reg::RegMode mode) {
    const std::string stem = std::string(reg::to_string(mode)) + "-i" + std::to_string(iters_);
    const fs::path ckpt = dir_ / (stem + ".ckpt"), meta = dir_ / (stem + ".json");
    const auto& d = desk();
    Trained t;
    if (!dir_.empty() && fs::exists(ckpt) && fs::exists(meta)) {
      std::ifstream in(meta);
      const auto j = nlohmann::json::parse(in);
      t.model = inr::read_checkpoint(ckpt);
      t.norm = {j["norm_lo"].get<double>(), j["norm_hi"].get<double>()};
      t.train_seconds = j["train_seconds"].get<double>();
      t.mask = detect_defective(d.corrupted);
      std::clog << "reusing " << ckpt << "\n";
    } else {
      train::TrainConfig c;
      c.iterations = iters_;
      c.reg_mode = mode;
      c.log_every = 500;
      std::clog << "training " << reg::to_string(mode) << " for " << iters_ << " iterations\n";
      auto r = train::train(d.corrupted, c, [](const train::LogRecord& rec) {
        std::clog << "  iter " << rec.iter << " loss " << rec.terms.total << " (" << rec.elapsed_s
                  << " s)\n";
      });
      t.model = std::move(r.model);
      t.norm = r.norm;
      t.mask = std::move(r.mask);
      t.train_seconds = r.report.wall_seconds;
      if (!dir_.empty()) {
        inr::write_checkpoint(t.model, ckpt);
        nlohmann::json j;
        j["norm_lo"] = t.norm.lo;
        j["norm_hi"] = t.norm.hi;
        j["train_seconds"] = t.train_seconds;
        std::ofstream(meta) << j.dump() << "\n";
      }
    }
    t.is_hat = train::predict_is(t.model, t.norm);
    t.sa_hat = train::predict_sa(t.model, t.norm);
    return t;
  }

  fs::path dir_;
  std::size_t iters_;
  std::map<std::string, Trained> cache_;
};

Sinogram corrected(const Trained& t, double kappa) {
  return compensate_prediction(desk().corrupted, t.is_hat, t.sa_hat, t.mask, t.norm, kappa);
}

Image fbp(const Sinogram& s) { return ct::fbp_fan(s, desk().geometry, desk().image_size); }

Image difference(const Image& a, const Image& b) {
  Image d = a;
  for (std::size_t k = 0; k < d.size(); ++k) d[k] -= b[k];
  return d;
}

// Smooth IS plus column offsets and one dead column.
Sinogram small_problem(std::size_t m, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> off(-0.05, 0.05);
  std::vector<double> stripe(n);
  for (auto& s : stripe) s = off(rng);
  Sinogram p(m, n);
  for (std::size_t i = 0; i < m; ++i) {
    const double a = 2.0 * M_PI * static_cast<double>(i) / static_cast<double>(m);
    for (std::size_t j = 0; j < n; ++j) {
      const double u = static_cast<double>(j) / static_cast<double>(n - 1) - 0.5;
      p(i, j) = 0.5 + 0.3 * std::cos(3.0 * u + std::sin(a)) + stripe[j];
    }
  }
  for (std::size_t i = 0; i < m; ++i) p(i, n / 3) = 0.0;
  return p;
}

// ---------------------------------------------------------------- criteria

Outcome gradient_check() {
  const auto t0 = Clock::now();
  const auto p = small_problem(8, 8, 1);
  const auto mask = detect_defective(p);
  const auto [pn, norm] = normalize(p, mask);
  double worst = 0.0;
  for (auto mode : {reg::RegMode::BothWeighted, reg::RegMode::Both, reg::RegMode::BothUnsorted}) {
    auto model = inr::init_params(8, 8, 3);
    oracle::spread_parameters(model, 3);
    const train::LossGraph graph(model, pn, mask, mode, {});
    const auto frozen = graph.freeze(model);
    const auto fn = oracle::loss_function(model, graph, frozen, {5e-3, 1e-3});
    worst = std::max(worst, ad::check_gradients(fn, oracle::flatten(model.store, oracle::all_params(model)), 1e-6));
  }
  const double dt = seconds_since(t0);
  return {worst < 1e-4 && dt < 10.0,
          "max rel error " + fmt("%.3g", worst) + " (< 1e-4), " + fmt("%.2f", dt) + " s (< 10 s)"};
}

Outcome projector_oracle() {
  const auto t0 = Clock::now();
  const auto& g = desk().geometry;
  const auto sl = ct::shepp_logan(g, desk().image_size * ct::kProjectionOversample);
  const auto numeric = ct::project_fan(sl, g);
  const auto exact = ct::project_fan_analytic(sl.ellipses, g);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < exact.size(); ++k) {
    const double e = numeric.flat()[k] - exact.flat()[k];
    num += e * e;
    den += exact.flat()[k] * exact.flat()[k];
  }
  const double rel = std::sqrt(num / den);
  const double dt = seconds_since(t0);
  return {rel < 1e-2 && dt < 60.0,
          "relative L2 " + fmt("%.4g", rel) + " (< 1e-2), " + fmt("%.1f", dt) + " s (< 60 s)"};
}

Outcome ring_phenomenology() {
  const auto& d = desk();
  const auto base = fbp(d.clean);
  bool ok = true;
  std::ostringstream os;
  for (std::size_t col : {100u, 180u, 300u, 420u}) {
    Sinogram p = d.clean;
    for (std::size_t i = 0; i < p.n_angles(); ++i) p(i, col) += 0.02;
    const auto diff = difference(fbp(p), base);
    const double expect = ct::ring_radius_px(d.geometry, static_cast<double>(col), d.image_size);
    const double got = ct::strongest_ring_radius(diff);
    ok = ok && std::abs(got - expect) <= 2.0;
    os << "col " << col << ": " << fmt("%.1f", got) << " vs " << fmt("%.1f", expect) << " px; ";
  }
  os << "tolerance 2 px";
  return {ok, os.str()};
}

Outcome defect_detection() {
  const auto mask = detect_defective(desk().corrupted, 1e-6);
  const auto got = mask.defective_columns();
  const std::vector<std::size_t> want = {200, 201, 202, 203, 204};
  std::ostringstream os;
  os << "flagged " << got.size() << " columns";
  if (!got.empty()) os << " [" << got.front() << ".." << got.back() << "]";
  return {got == want, os.str() + ", expected exactly 200-204"};
}

Outcome end_to_end(Runs& runs) {
  const auto& d = desk();
  const auto& t = runs.get(reg::RegMode::BothWeighted);
  // training time plus the prediction and compensation that follow it
  const auto t0 = Clock::now();
  const auto is_hat = train::predict_is(t.model, t.norm);
  const auto sa_hat = train::predict_sa(t.model, t.norm);
  const auto out = compensate_prediction(d.corrupted, is_hat, sa_hat, t.mask, t.norm, 1.0);
  const double total = t.train_seconds + seconds_since(t0);
  const double s_before = metrics::psnr(d.corrupted.values(), d.clean.values());
  const double s_after = metrics::psnr(out.values(), d.clean.values());
  const auto ref = fbp(d.clean);
  const double r_before = metrics::psnr(fbp(d.corrupted), ref);
  const double r_after = metrics::psnr(fbp(out), ref);
  const bool ok = s_after - s_before >= 5.0 && r_after - r_before >= 3.0 && total <= 1800.0 &&
                  runs.iterations() == 5000;
  std::ostringstream os;
  os << "sinogram " << fmt("%.2f", s_before) << " -> " << fmt("%.2f", s_after) << " dB (+"
     << fmt("%.2f", s_after - s_before) << ", need 5); FBP " << fmt("%.2f", r_before) << " -> "
     << fmt("%.2f", r_after) << " dB (+" << fmt("%.2f", r_after - r_before) << ", need 3); "
     << runs.iterations() << " iterations in " << fmt("%.0f", total) << " s (<= 1800 s)";
  return {ok, os.str()};
}

Outcome ablation(Runs& runs) {
  const auto& d = desk();
  std::map<std::string, double> psnr;
  for (auto mode : {reg::RegMode::BothWeighted, reg::RegMode::Both, reg::RegMode::SaOnly,
                    reg::RegMode::IsOnly, reg::RegMode::BothUnsorted}) {
    const auto out = corrected(runs.get(mode), 1.0);
    psnr[std::string(reg::to_string(mode))] = metrics::psnr(out.values(), d.clean.values());
  }
  const bool ok = psnr["both-weighted"] >= psnr["both"] &&
                  psnr["both"] >= std::max(psnr["sa-only"], psnr["is-only"]) &&
                  psnr["both-unsorted"] < psnr["both-weighted"];
  std::ostringstream os;
  for (const auto& [k, v] : psnr) os << k << " " << fmt("%.2f", v) << " dB; ";
  os << "need both-weighted >= both >= max(sa-only, is-only), both-unsorted < both-weighted";
  return {ok, os.str()};
}

Outcome compensation(Runs& runs) {
  const auto& d = desk();
  const auto& t = runs.get(reg::RegMode::BothWeighted);
  const auto k0 = corrected(t, 0.0), k1 = corrected(t, 1.0);
  const double p0 = metrics::psnr(k0.values(), d.clean.values());
  const double p1 = metrics::psnr(k1.values(), d.clean.values());
  const bool same = k0 == t.is_hat;
  return {p1 >= p0 && same, "kappa 1: " + fmt("%.3f", p1) + " dB, kappa 0: " + fmt("%.3f", p0) +
                                " dB; kappa 0 output " + (same ? "bit-equals" : "differs from") +
                                " the IS prediction"};
}

Outcome inpainting(Runs& runs) {
  const auto& d = desk();
  const auto& t = runs.get(reg::RegMode::BothWeighted);
  std::vector<double> pred, truth;
  for (std::size_t j : d.truth.dead_columns) {
    for (std::size_t i = 0; i < d.clean.n_angles(); ++i) {
      pred.push_back(t.is_hat(i, j));
      truth.push_back(d.clean(i, j));
    }
  }
  const double r = metrics::pearson(pred, truth);
  const double center = 0.5 * static_cast<double>(d.truth.dead_columns.front() + d.truth.dead_columns.back());
  const double radius = ct::ring_radius_px(d.geometry, center, d.image_size);
  const auto ref = fbp(d.clean);
  const auto after = ct::detect_ring(difference(fbp(corrected(t, 1.0)), ref), radius);
  const auto before = ct::detect_ring(difference(fbp(d.corrupted), ref), radius);
  return {r > 0.9 && !after.detected,
          "Pearson r " + fmt("%.4f", r) + " (> 0.9); ring at " + fmt("%.1f", radius) + " px: score " +
              fmt("%.2f", after.score) + " after correction (" + (after.detected ? "detected" : "none") +
              "), " + fmt("%.2f", before.score) + " before (" + (before.detected ? "detected" : "none") + ")"};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism(const std::string& cli, const fs::path& work) {
  if (cli.empty()) return {false, "no CLI path given (--cli)"};
  const fs::path dir = work / "determinism";
  fs::create_directories(dir);
  const std::string geo = (dir / "g.json").string();
  std::ofstream(geo) << R"({"sdd_mm":416.696,"sod_mm":297.143,"n_det":96,"pitch_mm":1.6156,"n_views":72,"angle0":0.0})";
  auto sh = [&](const std::string& args) {
    const std::string cmd = "\"" + cli + "\" " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str());
  };
  const std::string in = (dir / "c.sgm").string();
  if (sh("simulate --geometry " + geo + " --image-size 96 --dead-begin 40 --dead-end 43 --seed 5 --out " + in) != 0) {
    return {false, "simulate failed"};
  }
  std::vector<std::string> outputs;
  std::string logs[2];
  for (const char* tag : {"a", "b"}) {
    const std::string base = (dir / tag).string();
    if (sh("correct --in " + in + " --iters 300 --seed 7 --out " + base + ".sgm --out-is " + base +
           "-is.sgm --out-sa " + base + "-sa.sgm --checkpoint " + base + ".ckpt --log " + base +
           ".jsonl --log-every 50") != 0) {
      return {false, "correct failed"};
    }
    outputs.push_back(slurp(base + ".sgm") + slurp(base + "-is.sgm") + slurp(base + "-sa.sgm") +
                      slurp(base + ".ckpt"));
    // the log carries wall-clock time, everything else in it must repeat
    std::ifstream log(base + ".jsonl");
    for (std::string line; std::getline(log, line);) {
      auto j = nlohmann::json::parse(line);
      j.erase("elapsed_s");
      logs[tag[0] - 'a'] += j.dump() + "\n";
    }
  }
  const bool same = outputs[0] == outputs[1] && !outputs[0].empty();
  const bool same_log = logs[0] == logs[1] && !logs[0].empty();
  return {same && same_log,
          std::string("two `correct` runs (96x72, 300 iterations, seed 7): sinograms and checkpoint ") +
              (same ? "bit-identical" : "differ") + ", log records apart from elapsed_s " +
              (same_log ? "identical" : "differ")};
}

Outcome invariants() {
  std::mt19937_64 rng(11);
  std::vector<std::string> failed;
  auto need = [&](bool ok, const char* what) {
    if (!ok) failed.emplace_back(what);
  };

  // sorting round trips and group action
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_int_distribution<int> vals(0, 5);  // many ties
    Sinogram s(3 + trial % 7, 2 + trial % 5);
    for (auto& v : s.flat()) v = vals(rng);
    const auto [sorted, perm] = sort_columns(s);
    need(apply_permutation(sorted, perm.inverse()) == s, "sort round trip");
    need(apply_permutation(s, perm) == sorted, "apply sort permutation");
    need(perm.inverse().inverse() == perm, "double inverse");
    // (p o q) acts as p then q
    Grid<std::uint32_t> q(s.n_angles(), s.n_detectors());
    for (std::size_t j = 0; j < s.n_detectors(); ++j) {
      std::vector<std::uint32_t> col(s.n_angles());
      std::iota(col.begin(), col.end(), 0u);
      std::shuffle(col.begin(), col.end(), rng);
      for (std::size_t i = 0; i < s.n_angles(); ++i) q(i, j) = col[i];
    }
    const ColumnPermutation qp(q);
    Grid<std::uint32_t> comp(s.n_angles(), s.n_detectors());
    for (std::size_t i = 0; i < s.n_angles(); ++i) {
      for (std::size_t j = 0; j < s.n_detectors(); ++j) comp(i, j) = perm(qp(i, j), j);
    }
    need(apply_permutation(apply_permutation(s, perm), qp) == apply_permutation(s, ColumnPermutation(comp)),
         "permutation composition");
    need(apply_permutation(s, ColumnPermutation::identity(s.n_angles(), s.n_detectors())) == s,
         "identity permutation");
  }

  // psi_sa = 0 iff column-constant: every binary 4x4 grid, then random multi-level ones
  for (std::uint32_t bits = 0; bits < (1u << 16); ++bits) {
    Grid<double> g(4, 4);
    for (std::size_t k = 0; k < 16; ++k) g[k] = (bits >> k) & 1u;
    bool cc = true;
    for (std::size_t j = 0; j < 4; ++j) {
      for (std::size_t i = 1; i < 4; ++i) cc = cc && g(i, j) == g(0, j);
    }
    if ((reg::psi_sa(g) == 0.0) != cc) {
      need(false, "psi_sa zero set");
      break;
    }
  }
  for (int trial = 0; trial < 2000; ++trial) {
    std::uniform_int_distribution<int> level(-2, 2);
    Grid<double> g(4, 4);
    for (std::size_t j = 0; j < 4; ++j) {
      const double c = level(rng) * 0.37;
      for (std::size_t i = 0; i < 4; ++i) g(i, j) = (trial % 2 == 0) ? c : c + 0.1 * level(rng);
    }
    bool cc = true;
    for (std::size_t j = 0; j < 4; ++j) {
      for (std::size_t i = 1; i < 4; ++i) cc = cc && g(i, j) == g(0, j);
    }
    need((reg::psi_sa(g) == 0.0) == cc, "psi_sa zero set (random levels)");
  }

  // partition of unity of the grid encoding
  {
    auto model = inr::init_params(37, 53, 2);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    bool ok = true;
    for (int k = 0; k < 5000 && ok; ++k) {
      const double x = u(rng), y = u(rng);
      for (const auto& lv : model.grid.levels) {
        const auto taps = inr::bilinear_taps(lv, x, y);
        const double s = taps.weight[0] + taps.weight[1] + taps.weight[2] + taps.weight[3];
        ok = ok && std::abs(s - 1.0) < 1e-14;
      }
    }
    need(ok, "partition of unity");
  }

  // loss and training ignore defective-pixel values
  {
    const auto p = small_problem(12, 16, 4);
    auto q = p;
    for (std::size_t i = 0; i < 12; ++i) q(i, 16 / 3) = 123.0;
    const auto mask = detect_defective(p);
    need(mask == detect_defective(q), "mask under dead-column values");
    Grid<double> ih(12, 16), sh(12, 16);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (auto& v : ih.flat()) v = u(rng);
    for (auto& v : sh.flat()) v = 0.01 * u(rng);
    for (auto mode : {reg::RegMode::BothWeighted, reg::RegMode::SaOnly, reg::RegMode::BothUnsorted}) {
      need(train::total_loss(p, mask, ih, sh, {0.1, 0.1}, mode).total ==
               train::total_loss(q, mask, ih, sh, {0.1, 0.1}, mode).total,
           "loss under dead-column values");
    }
    train::TrainConfig c;
    c.iterations = 20;
    need(train::train(p, c).model.store == train::train(q, c).model.store, "training under dead-column values");
  }

  std::string detail = "sorting round trips, permutation group action, psi_sa zero set (4x4 brute force), "
                       "partition of unity, dead-pixel invariance";
  if (!failed.empty()) {
    detail += "; failed:";
    for (const auto& f : failed) detail += " [" + f + "]";
  }
  return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ringfree acceptance checks"};
  std::vector<int> criteria;
  std::string work = (fs::temp_directory_path() / "ringfree-acceptance").string();
  std::string cli;
  std::size_t iters = 5000;
  app.add_option("--criteria", criteria, "Criteria to run (default: all)")->delimiter(',');
  app.add_option("--work-dir", work, "Directory for cached training runs")->capture_default_str();
  app.add_option("--cli", cli, "Path of the ringfree executable");
  app.add_option("--iters", iters, "Training iterations of the desk runs")->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  if (criteria.empty()) criteria = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};

  Runs runs(work, iters);
  const std::map<int, std::pair<std::string, std::function<Outcome()>>> table = {
      {1, {"gradient correctness", gradient_check}},
      {2, {"projector oracle", projector_oracle}},
      {3, {"ring phenomenology", ring_phenomenology}},
      {4, {"defect detection", defect_detection}},
      {5, {"end-to-end correction", [&] { return end_to_end(runs); }}},
      {6, {"ablation ordering", [&] { return ablation(runs); }}},
      {7, {"residual compensation", [&] { return compensation(runs); }}},
      {8, {"dead-column inpainting", [&] { return inpainting(runs); }}},
      {9, {"determinism", [&] { return determinism(cli, work); }}},
      {10, {"invariant suites", invariants}},
  };

  int failures = 0;
  for (int id : criteria) {
    const auto it = table.find(id);
    if (it == table.end()) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
    Outcome o;
    try {
      o = it->second.second();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    if (!o.pass) ++failures;
    std::cout << "criterion " << id << " " << (o.pass ? "PASS" : "FAIL") << " " << it->second.first
              << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
