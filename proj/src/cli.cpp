#include "ringfree/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ringfree/ctsim.hpp"
#include "ringfree/error.hpp"
#include "ringfree/inr.hpp"
#include "ringfree/io.hpp"
#include "ringfree/kernels.hpp"
#include "ringfree/metrics.hpp"
#include "ringfree/pipeline.hpp"

namespace ringfree::cli {

namespace {

using json = nlohmann::ordered_json;

struct GeometryFlags {
  bool desk = false;
  std::string file;

  ct::FanBeamGeometry resolve() const {
    if (!file.empty()) {
      std::ifstream in(file);
      if (!in) throw IoError("cannot open " + file);
      const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
      return ct::FanBeamGeometry::from_json(text);
    }
    auto g = desk ? ct::FanBeamGeometry::desk() : ct::FanBeamGeometry::full();
    g.validate();
    return g;
  }
};

void add_geometry(CLI::App* cmd, GeometryFlags& g) {
  cmd->add_flag("--desk", g.desk, "Reduced geometry: 512 bins, 360 views, 256^2 images");
  cmd->add_option("--geometry", g.file, "Geometry JSON file (overrides --desk)")->check(CLI::ExistingFile);
}

json geometry_json(const ct::FanBeamGeometry& g) { return json::parse(g.to_json()); }

void emit_config(std::ostream& out, const std::string& command, json config) {
  json line;
  line["command"] = command;
  line["config"] = std::move(config);
  out << line.dump() << '\n';
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f << text;
}

// ------------------------------------------------------------------ commands

struct SimulateArgs {
  GeometryFlags geometry;
  std::string phantom = "shepp-logan";
  std::size_t image_size = 0;  // 0: 256 with --desk, 512 otherwise
  std::string out, out_clean, out_phantom, out_geometry, out_truth;
  ct::CorruptionSpec spec;
  bool dead_set = false;
  bool noise_free = false;
};

int do_simulate(SimulateArgs a, std::ostream& out) {
  const auto g = a.geometry.resolve();
  if (a.image_size == 0) a.image_size = a.geometry.desk ? 256 : 512;
  if (!a.dead_set && a.geometry.desk) {
    a.spec.dead_begin = ct::CorruptionSpec::desk().dead_begin;
    a.spec.dead_end = ct::CorruptionSpec::desk().dead_end;
  }
  a.spec.noise = !a.noise_free;
  a.spec.validate();

  json cfg;
  cfg["geometry"] = geometry_json(g);
  cfg["phantom"] = a.phantom;
  cfg["image_size"] = a.image_size;
  cfg["gain_fraction"] = a.spec.gain_fraction;
  cfg["gain_amplitude"] = a.spec.gain_amplitude;
  cfg["dead_begin"] = a.spec.dead_begin;
  cfg["dead_end"] = a.spec.dead_end;
  cfg["i0"] = a.spec.i0;
  cfg["noise"] = a.spec.noise;
  cfg["seed"] = a.spec.seed;
  cfg["out"] = a.out;
  cfg["out_clean"] = a.out_clean;
  cfg["out_phantom"] = a.out_phantom;
  cfg["out_geometry"] = a.out_geometry;
  cfg["out_truth"] = a.out_truth;
  emit_config(out, "simulate", cfg);

  const auto phantom = ct::make_phantom(a.phantom, g, a.image_size);
  const auto clean = ct::simulate_projection(a.phantom, g, a.image_size);
  const auto corrupted = ct::corrupt(clean, a.spec);
  io::write_sinogram(corrupted.sinogram, a.out);
  if (!a.out_clean.empty()) io::write_sinogram(clean, a.out_clean);
  if (!a.out_phantom.empty()) io::write_image(phantom.raster(), a.out_phantom);
  if (!a.out_geometry.empty()) write_text(a.out_geometry, g.to_json() + "\n");
  if (!a.out_truth.empty()) {
    json t;
    t["gains"] = corrupted.truth.gains;
    t["gained_columns"] = corrupted.truth.gained_columns;
    t["dead_columns"] = corrupted.truth.dead_columns;
    write_text(a.out_truth, t.dump() + "\n");
  }
  json res;
  res["views"] = clean.n_angles();
  res["detectors"] = clean.n_detectors();
  res["gained_columns"] = corrupted.truth.gained_columns.size();
  res["dead_columns"] = corrupted.truth.dead_columns;
  out << res.dump() << '\n';
  return kExitOk;
}

struct DetectArgs {
  std::string in, out;
  double mu = 1e-6;
};

int do_detect(const DetectArgs& a, std::ostream& out) {
  json cfg;
  cfg["in"] = a.in;
  cfg["mu"] = a.mu;
  cfg["out"] = a.out;
  emit_config(out, "detect", cfg);
  const auto p = io::read_sinogram(a.in);
  const auto mask = detect_defective(p, a.mu);
  if (!a.out.empty()) io::write_mask(mask, a.out);
  json res;
  res["defective_columns"] = mask.defective_columns();
  res["good_columns"] = mask.good_columns();
  out << res.dump() << '\n';
  return kExitOk;
}

struct CorrectArgs {
  std::string in, out, out_is, out_sa, log, checkpoint, reg_mode = "both-weighted";
  std::string precision = "single";
  train::TrainConfig config;
  bool non_cyclic = false;
  int threads = 0;
};

int do_correct(CorrectArgs a, std::ostream& out, std::ostream& err) {
  a.config.reg_mode = reg::parse_reg_mode(a.reg_mode);
  a.config.reg_options.cyclic = !a.non_cyclic;
  a.config.precision =
      a.precision == "double" ? kernels::Precision::Double : kernels::Precision::Single;
  a.config.validate();
  if (a.threads > 0) kernels::set_threads(a.threads);

  const auto& c = a.config;
  json cfg;
  cfg["in"] = a.in;
  cfg["out"] = a.out;
  cfg["out_is"] = a.out_is;
  cfg["out_sa"] = a.out_sa;
  cfg["log"] = a.log;
  cfg["checkpoint"] = a.checkpoint;
  cfg["iters"] = c.iterations;
  cfg["lr"] = c.lr;
  cfg["lambda_is_start"] = c.lambda_is_start;
  cfg["lambda_is_end"] = c.lambda_is_end;
  cfg["lambda_sa_start"] = c.lambda_sa_start;
  cfg["lambda_sa_end"] = c.lambda_sa_end;
  cfg["ramp_fraction"] = c.ramp_fraction;
  cfg["kappa"] = c.kappa;
  cfg["mu"] = c.mu;
  cfg["reg_mode"] = std::string(reg::to_string(c.reg_mode));
  cfg["cyclic"] = c.reg_options.cyclic;
  cfg["size_normalized"] = c.reg_options.size_normalized;
  cfg["seed"] = c.seed;
  cfg["log_every"] = c.log_every;
  cfg["precision"] = a.precision;
  cfg["threads"] = kernels::max_threads();
  emit_config(out, "correct", cfg);

  const auto p = io::read_sinogram(a.in);
  const auto result = run_correction(p, c, [&](const train::LogRecord& r) {
    err << "iter " << r.iter << " loss " << r.terms.total << " data " << r.terms.data
        << " psi_is " << r.terms.psi_is << " psi_sa " << r.terms.psi_sa << '\n';
  });
  io::write_sinogram(result.corrected, a.out);
  if (!a.out_is.empty()) io::write_sinogram(result.is_hat, a.out_is);
  if (!a.out_sa.empty()) io::write_sinogram(result.sa_hat, a.out_sa);
  if (!a.log.empty()) result.trained.report.write_jsonl(a.log);
  if (!a.checkpoint.empty()) inr::write_checkpoint(result.trained.model, a.checkpoint);

  const auto& last = result.trained.report.records.back();
  json res;
  res["defective_columns"] = result.trained.mask.defective_columns();
  res["norm_lo"] = result.trained.norm.lo;
  res["norm_hi"] = result.trained.norm.hi;
  res["final_loss"] = last.terms.total;
  res["wall_s"] = result.trained.report.wall_seconds;
  out << res.dump() << '\n';
  return kExitOk;
}

struct BaselineArgs {
  std::string in, out;
  std::size_t window = 11;
};

int do_baseline(const BaselineArgs& a, std::ostream& out) {
  json cfg;
  cfg["in"] = a.in;
  cfg["out"] = a.out;
  cfg["window"] = a.window;
  emit_config(out, "baseline", cfg);
  io::write_sinogram(ct::sorted_median_baseline(io::read_sinogram(a.in), a.window), a.out);
  return kExitOk;
}

struct FbpArgs {
  GeometryFlags geometry;
  std::string in, out;
  std::size_t image_size = 0;
};

int do_fbp(FbpArgs a, std::ostream& out) {
  const auto g = a.geometry.resolve();
  if (a.image_size == 0) a.image_size = a.geometry.desk ? 256 : 512;
  json cfg;
  cfg["in"] = a.in;
  cfg["out"] = a.out;
  cfg["geometry"] = geometry_json(g);
  cfg["image_size"] = a.image_size;
  emit_config(out, "fbp", cfg);
  io::write_image(ct::fbp_fan(io::read_sinogram(a.in), g, a.image_size), a.out);
  return kExitOk;
}

struct MetricsArgs {
  std::string a, ref;
  bool union_range = false;
};

int do_metrics(const MetricsArgs& a, std::ostream& out) {
  json cfg;
  cfg["a"] = a.a;
  cfg["ref"] = a.ref;
  cfg["union_range"] = a.union_range;
  cfg["ssim_window"] = 11;
  cfg["ssim_sigma"] = 1.5;
  emit_config(out, "metrics", cfg);
  metrics::SsimOptions opt;
  opt.union_range = a.union_range;
  const auto ga = io::read_float_grid(a.a), gr = io::read_float_grid(a.ref);
  out << metrics::evaluate(ga, gr, opt).to_json() << '\n';
  return kExitOk;
}

struct ExportArgs {
  std::string in, out;
  std::optional<double> lo, hi;
};

int do_export(const ExportArgs& a, std::ostream& out) {
  const auto g = io::read_float_grid(a.in);
  const auto [mn, mx] = std::minmax_element(g.flat().begin(), g.flat().end());
  const double lo = a.lo.value_or(*mn), hi = a.hi.value_or(*mx);
  json cfg;
  cfg["in"] = a.in;
  cfg["out"] = a.out;
  cfg["lo"] = lo;
  cfg["hi"] = hi;
  emit_config(out, "export-pgm", cfg);
  io::export_pgm(g, lo, hi, a.out);
  return kExitOk;
}

int exit_code(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return kExitUsage;
    case ErrorKind::Data: return kExitData;
    case ErrorKind::Numerical: return kExitNumerical;
  }
  return kExitData;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unsupervised ring artifact removal for CT sinograms"};
  app.name("ringfree");
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Project a phantom and apply the corruption model");
  add_geometry(s, sim.geometry);
  s->add_option("--phantom", sim.phantom, "shepp-logan or disks")->capture_default_str();
  s->add_option("--image-size", sim.image_size, "Phantom raster size (default 256 with --desk, else 512)");
  s->add_option("--out", sim.out, "Corrupted sinogram (SGM1)")->required();
  s->add_option("--out-clean", sim.out_clean, "Clean sinogram (SGM1)");
  s->add_option("--out-phantom", sim.out_phantom, "Phantom raster (IMG1)");
  s->add_option("--out-geometry", sim.out_geometry, "Geometry JSON");
  s->add_option("--out-truth", sim.out_truth, "Per-column gains and dead set (JSON)");
  s->add_option("--gain-fraction", sim.spec.gain_fraction)->capture_default_str();
  s->add_option("--gain-amplitude", sim.spec.gain_amplitude)->capture_default_str();
  auto* db = s->add_option("--dead-begin", sim.spec.dead_begin, "First dead column")->capture_default_str();
  auto* de = s->add_option("--dead-end", sim.spec.dead_end, "One past the last dead column")->capture_default_str();
  s->add_option("--i0", sim.spec.i0, "Incident photons per ray")->capture_default_str();
  s->add_option("--seed", sim.spec.seed)->capture_default_str();
  s->add_flag("--noise-free", sim.noise_free, "Use expected counts instead of Poisson draws");

  DetectArgs det;
  auto* d = app.add_subcommand("detect", "Flag defective detector columns");
  d->add_option("--in", det.in)->required()->check(CLI::ExistingFile);
  d->add_option("--mu", det.mu, "Mean angular gradient threshold")->capture_default_str();
  d->add_option("--out", det.out, "Mask output (MSK1)");

  CorrectArgs cor;
  auto* c = app.add_subcommand("correct", "Decompose the sinogram and remove stripes");
  c->add_option("--in", cor.in)->required()->check(CLI::ExistingFile);
  c->add_option("--out", cor.out, "Corrected sinogram")->required();
  c->add_option("--out-is", cor.out_is, "Raw IS prediction");
  c->add_option("--out-sa", cor.out_sa, "Stripe estimate");
  c->add_option("--log", cor.log, "Training report (JSON lines)");
  c->add_option("--checkpoint", cor.checkpoint, "Trained parameters");
  c->add_option("--iters", cor.config.iterations)->capture_default_str();
  c->add_option("--lr", cor.config.lr)->capture_default_str();
  c->add_option("--lambda-is-start", cor.config.lambda_is_start)->capture_default_str();
  c->add_option("--lambda-is-end", cor.config.lambda_is_end)->capture_default_str();
  c->add_option("--lambda-sa-start", cor.config.lambda_sa_start)->capture_default_str();
  c->add_option("--lambda-sa-end", cor.config.lambda_sa_end)->capture_default_str();
  c->add_option("--ramp-fraction", cor.config.ramp_fraction)->capture_default_str();
  c->add_option("--kappa", cor.config.kappa)->capture_default_str();
  c->add_option("--mu", cor.config.mu)->capture_default_str();
  c->add_option("--reg-mode", cor.reg_mode)
      ->check(CLI::IsMember({"sa-only", "is-only", "both", "both-weighted", "both-unsorted"}))
      ->capture_default_str();
  c->add_flag("--non-cyclic", cor.non_cyclic, "Zero the last difference instead of wrapping");
  c->add_flag("--size-normalized", cor.config.reg_options.size_normalized,
              "Divide regularizers by the pixel count");
  c->add_option("--seed", cor.config.seed)->capture_default_str();
  c->add_option("--log-every", cor.config.log_every)->capture_default_str();
  c->add_option("--precision", cor.precision, "Network arithmetic during training")
      ->check(CLI::IsMember({"single", "double"}))
      ->capture_default_str();
  c->add_option("--threads", cor.threads, "Worker threads (0: runtime default)")->capture_default_str();

  BaselineArgs base;
  auto* b = app.add_subcommand("baseline", "Sorted-sinogram median filter");
  b->add_option("--in", base.in)->required()->check(CLI::ExistingFile);
  b->add_option("--out", base.out)->required();
  b->add_option("--window", base.window, "Odd median window")->capture_default_str();

  FbpArgs fbp;
  auto* f = app.add_subcommand("fbp", "Fan-beam filtered backprojection");
  add_geometry(f, fbp.geometry);
  f->add_option("--in", fbp.in)->required()->check(CLI::ExistingFile);
  f->add_option("--out", fbp.out, "Image output (IMG1)")->required();
  f->add_option("--image-size", fbp.image_size, "Output size (default 256 with --desk, else 512)");

  MetricsArgs met;
  auto* m = app.add_subcommand("metrics", "PSNR, SSIM and MSE of a grid against a reference");
  m->add_option("--a", met.a)->required()->check(CLI::ExistingFile);
  m->add_option("--ref", met.ref)->required()->check(CLI::ExistingFile);
  m->add_flag("--union-range", met.union_range, "SSIM range from both inputs");

  ExportArgs exp;
  auto* e = app.add_subcommand("export-pgm", "Write a sinogram or image as 16-bit PGM");
  e->add_option("--in", exp.in)->required()->check(CLI::ExistingFile);
  e->add_option("--out", exp.out)->required();
  e->add_option("--lo", exp.lo, "Window low end (default: data minimum)");
  e->add_option("--hi", exp.hi, "Window high end (default: data maximum)");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << "\n";
    const auto subs = app.get_subcommands();
    err << (subs.empty() ? app.help() : subs.front()->help());
    return kExitUsage;
  }
  sim.dead_set = db->count() > 0 || de->count() > 0;

  try {
    if (s->parsed()) return do_simulate(sim, out);
    if (d->parsed()) return do_detect(det, out);
    if (c->parsed()) return do_correct(cor, out, err);
    if (b->parsed()) return do_baseline(base, out);
    if (f->parsed()) return do_fbp(fbp, out);
    if (m->parsed()) return do_metrics(met, out);
    if (e->parsed()) return do_export(exp, out);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return exit_code(ex.kind());
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace ringfree::cli
