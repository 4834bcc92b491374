#include "toepnmf/convolution.hpp"
#include "toepnmf/error.hpp"
#include "toepnmf/hrir_io.hpp"
#include "toepnmf/metrics.hpp"
#include "toepnmf/model_io.hpp"
#include "toepnmf/parallel.hpp"
#include "toepnmf/seminmf.hpp"
#include "toepnmf/signal_io.hpp"
#include "toepnmf/sparse_residual.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <unistd.h>
#include <vector>

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace toepnmf;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct UsageError : Error {
  using Error::Error;
};

void require_file(const fs::path& p, const char* what) {
  if (!fs::is_regular_file(p)) throw UsageError(std::string(what) + " not found: " + p.string());
}

void require_dir(const fs::path& p, const char* what) {
  if (!fs::is_directory(p)) throw UsageError(std::string(what) + " is not a directory: " + p.string());
}

void require_output(const fs::path& p) {
  if (p.empty()) throw UsageError("output path is empty");
  const fs::path parent = fs::absolute(p).parent_path();
  if (!fs::is_directory(parent)) throw UsageError("output directory does not exist: " + parent.string());
}

fs::path temp_sibling(const fs::path& p) {
  fs::path t = p;
  t += ".tmp-" + std::to_string(::getpid());
  return t;
}

// Writes through a temporary sibling and renames it into place, so a failed
// run never leaves a partial output behind.
void write_atomically(const fs::path& out, const std::function<void(const fs::path&)>& writer) {
  const fs::path tmp = temp_sibling(out);
  fs::remove_all(tmp);
  try {
    writer(tmp);
    if (fs::is_directory(out)) fs::remove_all(out);
    fs::rename(tmp, out);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(tmp, ec);
    throw;
  }
}

void write_text(const fs::path& out, const std::string& text) {
  write_atomically(out, [&](const fs::path& tmp) {
    std::ofstream f(tmp, std::ios::binary);
    f << text;
    if (!f) throw DataError("cannot write " + tmp.string());
  });
}

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

fs::path run_json_path(const fs::path& out) {
  if (fs::is_directory(out)) return out / "run.json";
  fs::path p = out;
  p += ".run.json";
  return p;
}

struct Common {
  int threads = 0;
};

void apply_threads(const Common& c) {
  int n = c.threads;
  if (n == 0) {
    if (const char* env = std::getenv("TOEPNMF_THREADS"); env != nullptr && *env != '\0') {
      try {
        n = std::stoi(env);
      } catch (const std::exception&) {
        throw UsageError(std::string("TOEPNMF_THREADS is not an integer: ") + env);
      }
      if (n < 1) throw UsageError("TOEPNMF_THREADS must be >= 1");
    }
  }
  set_max_threads(n);
}

void finish_run(const std::string& command, json config, const fs::path& out) {
  config["subcommand"] = command;
  config["threads"] = max_threads();
  config["format_version"] = 1;
  write_text(run_json_path(out), config.dump(2) + "\n");
}

std::string abs_str(const fs::path& p) { return p.empty() ? std::string() : fs::absolute(p).string(); }

// ---- preprocess ------------------------------------------------------------

struct PreprocessArgs {
  fs::path in, directions, out;
  int sample_rate = 44100;
  bool no_minphase = false, no_delay = false, no_normalize = false;
  double onset_fraction = kDefaultOnsetFraction;
};

void cmd_preprocess(const PreprocessArgs& a) {
  const bool from_bundle = fs::is_directory(a.in);
  if (!from_bundle) {
    require_file(a.in, "input matrix CSV");
    if (a.directions.empty()) throw UsageError("--directions is required for CSV input");
    require_file(a.directions, "directions CSV");
  }
  require_output(a.out);
  if (fs::exists(a.out) && fs::equivalent(a.in, a.out)) throw UsageError("--out must differ from --in");
  if (!(a.onset_fraction > 0.0 && a.onset_fraction < 1.0)) throw UsageError("--onset-fraction must be in (0, 1)");

  const HrirSet in = from_bundle ? load_bundle(a.in) : load_csv(a.in, a.directions, a.sample_rate);
  PreprocessOptions opts;
  opts.minphase = !a.no_minphase;
  opts.remove_delay = !a.no_delay;
  opts.normalize = !a.no_normalize;
  opts.onset_fraction = a.onset_fraction;
  const HrirSet out = preprocess(in, opts);
  write_atomically(a.out, [&](const fs::path& tmp) { save_bundle(out, tmp); });

  finish_run("preprocess",
             {{"in", abs_str(a.in)},
              {"directions", abs_str(a.directions)},
              {"out", abs_str(a.out)},
              {"sample_rate_hz", in.sample_rate_hz()},
              {"minphase", opts.minphase},
              {"delay_removal", opts.remove_delay},
              {"normalize", opts.normalize},
              {"onset_fraction", opts.onset_fraction}},
             a.out);
  std::printf("preprocessed %td directions x %td taps -> %s\n", out.num_directions(), out.num_taps(),
              a.out.string().c_str());
}

// ---- factorize -------------------------------------------------------------

struct FactorizeArgs {
  fs::path bundle, out;
  Index k = 25;
  int iters = 50;
  std::uint64_t seed = 0;
  bool early_stop = false;
};

void cmd_factorize(const FactorizeArgs& a) {
  require_dir(a.bundle, "--bundle");
  require_output(a.out);
  if (a.k < 1) throw UsageError("--K must be >= 1");
  if (a.iters < 1) throw UsageError("--iters must be >= 1");
  const HrirSet set = load_bundle(a.bundle);
  if (a.k > set.num_taps())
    throw UsageError("--K (" + std::to_string(a.k) + ") exceeds the HRIR length (" + std::to_string(set.num_taps()) + ")");
  TrainConfig cfg;
  cfg.filter_length = a.k;
  cfg.iterations = a.iters;
  cfg.seed = a.seed;
  cfg.early_stop = a.early_stop;
  const FactorModel model = train(set, cfg);
  write_atomically(a.out, [&](const fs::path& tmp) { save_model(model, tmp); });
  finish_run("factorize",
             {{"bundle", abs_str(a.bundle)},
              {"out", abs_str(a.out)},
              {"K", a.k},
              {"iters", a.iters},
              {"seed", a.seed},
              {"early_stop", a.early_stop}},
             a.out);
  std::printf("trained K=%td over %zu iterations, final RMSE %s\n", a.k, model.training_log.size(),
              g17(model.training_log.back()).c_str());
}

// ---- sparsify --------------------------------------------------------------

struct SparsifyArgs {
  fs::path model, bundle, out;
  double lambda = 1e-3;
  std::string transform = "identity";
  std::optional<double> sigma;
  double prune = kDefaultPruneThreshold;
};

ResidualTransform parse_transform(const std::string& kind, const std::optional<double>& sigma) {
  ResidualTransform t;
  try {
    t.kind = transform_kind_from_string(kind);
  } catch (const Error&) {
    throw UsageError("--transform must be identity, convolution or window");
  }
  if (t.kind != TransformKind::identity) {
    if (!sigma) throw UsageError("--transform " + kind + " requires --sigma");
    if (!(*sigma > 0.0)) throw UsageError("--sigma must be > 0");
    t.sigma = *sigma;
  }
  return t;
}

void cmd_sparsify(const SparsifyArgs& a) {
  require_file(a.model, "--model");
  require_dir(a.bundle, "--bundle");
  require_output(a.out);
  const ResidualTransform t = parse_transform(a.transform, a.sigma);
  if (!(a.lambda >= 0.0)) throw UsageError("--lambda must be >= 0");
  if (!(a.prune >= 0.0)) throw UsageError("--prune must be >= 0");
  const FactorModel model = load_model(a.model);
  const HrirSet set = load_bundle(a.bundle);
  const FactorModel sparse = sparsify_model(model, set, a.lambda, t, a.prune);
  write_atomically(a.out, [&](const fs::path& tmp) { save_model(sparse, tmp); });
  finish_run("sparsify",
             {{"model", abs_str(a.model)},
              {"bundle", abs_str(a.bundle)},
              {"out", abs_str(a.out)},
              {"lambda", a.lambda},
              {"transform", to_string(t.kind)},
              {"sigma", t.sigma},
              {"prune", a.prune}},
             a.out);
  double nnze = 0.0;
  for (const auto& r : sparse.sparsity->rows) nnze += static_cast<double>(r.nnze());
  std::printf("mean NNZE %s\n", g17(nnze / static_cast<double>(sparse.num_directions)).c_str());
}

// ---- reconstruct -----------------------------------------------------------

struct ReconstructArgs {
  fs::path model, out;
  std::optional<Index> direction;
};

void cmd_reconstruct(const ReconstructArgs& a) {
  require_file(a.model, "--model");
  require_output(a.out);
  const FactorModel model = load_model(a.model);
  if (a.direction) {
    if (*a.direction < 0 || *a.direction >= model.num_directions) throw UsageError("--direction out of range");
    const Vector h = reconstruct(model, *a.direction);
    const Signal s(std::vector<double>(h.data(), h.data() + h.size()), model.sample_rate_hz);
    write_atomically(a.out, [&](const fs::path& tmp) {
      // The extension selects the format, so keep it on the temporary file.
      fs::path with_ext = tmp;
      with_ext += a.out.extension();
      write_signal(s, with_ext);
      fs::rename(with_ext, tmp);
    });
  } else {
    const HrirSet set(reconstruct_all(model), model.sample_rate_hz, model.directions);
    write_atomically(a.out, [&](const fs::path& tmp) { save_bundle(set, tmp); });
  }
  json cfg = {{"model", abs_str(a.model)}, {"out", abs_str(a.out)}};
  cfg["direction"] = a.direction ? json(*a.direction) : json(nullptr);
  finish_run("reconstruct", cfg, a.out);
}

// ---- render ----------------------------------------------------------------

struct RenderArgs {
  fs::path model, input, out;
  Index direction = 0;
  std::string mode = "sparse_direct";
  int raw_sample_rate = 44100;
};

void cmd_render(const RenderArgs& a) {
  require_file(a.model, "--model");
  require_file(a.input, "--input");
  require_output(a.out);
  ConvMode mode;
  try {
    mode = conv_mode_from_string(a.mode);
  } catch (const Error&) {
    throw UsageError("--mode must be sparse_direct, dense_direct or fft_overlap_save");
  }
  const FactorModel model = load_model(a.model);
  if (a.direction < 0 || a.direction >= model.num_directions) throw UsageError("--direction out of range");
  const Signal y = read_signal(a.input, a.raw_sample_rate);
  Renderer renderer(model, mode);
  const Signal out = renderer.render(y, a.direction);
  write_atomically(a.out, [&](const fs::path& tmp) {
    fs::path with_ext = tmp;
    with_ext += a.out.extension();
    write_signal(out, with_ext);
    fs::rename(with_ext, tmp);
  });
  finish_run("render",
             {{"model", abs_str(a.model)},
              {"input", abs_str(a.input)},
              {"out", abs_str(a.out)},
              {"direction", a.direction},
              {"mode", to_string(mode)},
              {"raw_sample_rate_hz", a.raw_sample_rate}},
             a.out);
  std::printf("rendered %zu samples (%llu reflection multiply-adds)\n", out.size(),
              static_cast<unsigned long long>(renderer.counters().reflection_macs));
}

// ---- metrics ---------------------------------------------------------------

struct MetricsArgs {
  fs::path model, bundle, out;
  double prune = kDefaultPruneThreshold;
};

void cmd_metrics(const MetricsArgs& a) {
  require_file(a.model, "--model");
  require_dir(a.bundle, "--bundle");
  require_output(a.out);
  const FactorModel model = load_model(a.model);
  const HrirSet set = load_bundle(a.bundle);
  const EvalReport r = evaluate(model, set, a.prune);
  write_atomically(a.out, [&](const fs::path& tmp) { write_report_csv(r, tmp); });
  finish_run("metrics",
             {{"model", abs_str(a.model)}, {"bundle", abs_str(a.bundle)}, {"out", abs_str(a.out)}, {"prune", a.prune}},
             a.out);
  std::printf("mean_sd_db %s\nmean_nnze %s\nrmse_global %s\n", g17(r.mean_sd_db).c_str(), g17(r.mean_nnze).c_str(),
              g17(r.rmse_global).c_str());
  std::printf("horizontal_plane n=%zu mean_sd_db %s\nmedian_plane n=%zu mean_sd_db %s\n", r.horizontal.members.size(),
              g17(r.horizontal.mean_sd_db).c_str(), r.median.members.size(), g17(r.median.mean_sd_db).c_str());
}

// ---- tune-sigma ------------------------------------------------------------

struct TuneArgs {
  fs::path model, bundle, out;
  std::optional<Index> direction;
  double lambda = 0.0;
  double prune = kDefaultPruneThreshold;
  std::vector<double> grid;
};

void cmd_tune_sigma(const TuneArgs& a) {
  require_file(a.model, "--model");
  require_dir(a.bundle, "--bundle");
  require_output(a.out);
  const std::vector<double> grid = a.grid.empty() ? default_sigma_grid() : a.grid;
  for (const double s : grid)
    if (!(s > 0.0)) throw UsageError("--grid values must be > 0");
  if (!(a.lambda >= 0.0)) throw UsageError("--lambda must be >= 0");
  const FactorModel model = load_model(a.model);
  const HrirSet set = load_bundle(a.bundle);
  std::vector<Index> dirs;
  if (a.direction) {
    if (*a.direction < 0 || *a.direction >= model.num_directions) throw UsageError("--direction out of range");
    dirs.push_back(*a.direction);
  } else {
    for (Index j = 0; j < model.num_directions; ++j) dirs.push_back(j);
  }
  std::vector<SigmaChoice> best(dirs.size());
  std::vector<double> identity(dirs.size());
  parallel_for(static_cast<Index>(dirs.size()), [&](Index i) {
    const auto u = static_cast<std::size_t>(i);
    best[u] = tune_sigma(model, set, dirs[u], grid, a.lambda, a.prune);
    identity[u] = resolved_sd(model, set, dirs[u], {}, a.lambda, a.prune);
  });
  std::string csv = "direction_index,az_deg,el_deg,sigma,sd_db,sd_identity_db\n";
  double mean_best = 0.0, mean_identity = 0.0;
  for (std::size_t i = 0; i < dirs.size(); ++i) {
    const Direction& d = set.directions()[static_cast<std::size_t>(dirs[i])];
    csv += std::to_string(dirs[i]) + "," + g17(d.azimuth_deg) + "," + g17(d.elevation_deg) + "," +
           g17(best[i].sigma) + "," + g17(best[i].sd_db) + "," + g17(identity[i]) + "\n";
    mean_best += best[i].sd_db;
    mean_identity += identity[i];
  }
  write_text(a.out, csv);
  json cfg = {{"model", abs_str(a.model)},
              {"bundle", abs_str(a.bundle)},
              {"out", abs_str(a.out)},
              {"lambda", a.lambda},
              {"prune", a.prune},
              {"grid", grid}};
  cfg["direction"] = a.direction ? json(*a.direction) : json(nullptr);
  finish_run("tune-sigma", cfg, a.out);
  const auto n = static_cast<double>(dirs.size());
  std::printf("mean_sd_db identity %s tuned %s\n", g17(mean_identity / n).c_str(), g17(mean_best / n).c_str());
}

// ---- bench -----------------------------------------------------------------

struct BenchArgs {
  fs::path out;
  std::size_t signal_len = 44100;
  std::vector<std::size_t> nnze = {1, 4, 16, 64, 128, 256, 1024};
  int repeats = 5;
  std::uint64_t seed = 1;
};

void cmd_bench(const BenchArgs& a) {
  require_output(a.out);
  if (a.repeats < 3) throw UsageError("--repeats must be >= 3");
  if (a.signal_len < 1) throw UsageError("--signal-len must be >= 1");
  for (const auto n : a.nnze)
    if (n < 1) throw UsageError("--nnze values must be >= 1");
  const auto rows = bench(a.signal_len, a.nnze, a.repeats, a.seed);
  write_text(a.out, bench_csv(rows));
  finish_run("bench",
             {{"out", abs_str(a.out)},
              {"signal_len", a.signal_len},
              {"nnze", a.nnze},
              {"repeats", a.repeats},
              {"seed", a.seed}},
             a.out);
  for (const std::size_t len : {a.signal_len, std::size_t{44100}, std::size_t{2205}})
    std::printf("cost model: time domain cheaper for |x| < %zu at |y| = %zu\n", time_domain_crossover(len), len);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Toeplitz semi-NMF HRIR factorization, sparsification and rendering"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--threads", common.threads, "Worker threads (default: TOEPNMF_THREADS or all cores)")
      ->check(CLI::PositiveNumber);

  std::function<void()> action;

  PreprocessArgs pre;
  auto* p = app.add_subcommand("preprocess", "Min-phase, onset removal and normalization into a bundle");
  p->add_option("--in", pre.in, "Bundle directory or N x M matrix CSV")->required();
  p->add_option("--directions", pre.directions, "Directions CSV (az_deg, el_deg) for CSV input");
  p->add_option("--sample-rate", pre.sample_rate, "Sample rate for CSV input")->check(CLI::PositiveNumber);
  p->add_option("--out", pre.out, "Output bundle directory")->required();
  p->add_flag("--no-minphase", pre.no_minphase, "Skip min-phase conversion");
  p->add_flag("--no-delay-removal", pre.no_delay, "Skip onset delay removal");
  p->add_flag("--no-normalize", pre.no_normalize, "Skip absolute-sum normalization");
  p->add_option("--onset-fraction", pre.onset_fraction, "Onset threshold as a fraction of the peak");
  p->callback([&] { action = [&] { cmd_preprocess(pre); }; });

  FactorizeArgs fac;
  auto* f = app.add_subcommand("factorize", "Train the resonance filter and reflection filters");
  f->add_option("--bundle", fac.bundle, "Input bundle directory")->required();
  f->add_option("-K,--K", fac.k, "Reflection filter length")->capture_default_str();
  f->add_option("--iters", fac.iters, "Iterations")->capture_default_str();
  f->add_option("--seed", fac.seed, "Seed for the initial G")->capture_default_str();
  f->add_flag("--early-stop", fac.early_stop, "Stop once the RMSE stalls");
  f->add_option("--out", fac.out, "Output model JSON")->required();
  f->callback([&] { action = [&] { cmd_factorize(fac); }; });

  SparsifyArgs sp;
  auto* s = app.add_subcommand("sparsify", "Re-solve reflection filters with the L1 penalty and prune");
  s->add_option("--model", sp.model, "Trained model JSON")->required();
  s->add_option("--bundle", sp.bundle, "Bundle the model was trained on")->required();
  s->add_option("--lambda", sp.lambda, "L1 weight")->capture_default_str();
  s->add_option("--transform", sp.transform, "identity | convolution | window")->capture_default_str();
  s->add_option("--sigma", sp.sigma, "Transform bandwidth");
  s->add_option("--prune", sp.prune, "Prune threshold")->capture_default_str();
  s->add_option("--out", sp.out, "Output sparse model JSON")->required();
  s->callback([&] { action = [&] { cmd_sparsify(sp); }; });

  ReconstructArgs rc;
  auto* r = app.add_subcommand("reconstruct", "Rebuild HRIRs from a model");
  r->add_option("--model", rc.model, "Model JSON")->required();
  r->add_option("--direction", rc.direction, "Single direction; writes a .wav or raw f32 signal");
  r->add_option("--out", rc.out, "Output bundle directory, or signal file with --direction")->required();
  r->callback([&] { action = [&] { cmd_reconstruct(rc); }; });

  RenderArgs rn;
  auto* rd = app.add_subcommand("render", "Render a mono signal for one direction as (y * f) * g");
  rd->add_option("--model", rn.model, "Model JSON")->required();
  rd->add_option("--input", rn.input, "Mono .wav or raw f32le signal")->required();
  rd->add_option("--direction", rn.direction, "Direction index")->required();
  rd->add_option("--mode", rn.mode, "sparse_direct | dense_direct | fft_overlap_save")->capture_default_str();
  rd->add_option("--raw-sample-rate", rn.raw_sample_rate, "Sample rate assumed for raw input")
      ->check(CLI::PositiveNumber);
  rd->add_option("--out", rn.out, "Output .wav or raw f32le file")->required();
  rd->callback([&] { action = [&] { cmd_render(rn); }; });

  MetricsArgs mt;
  auto* m = app.add_subcommand("metrics", "Per-direction RMSE, spectral distortion and NNZE");
  m->add_option("--model", mt.model, "Model JSON")->required();
  m->add_option("--bundle", mt.bundle, "Reference bundle")->required();
  m->add_option("--prune", mt.prune, "NNZE threshold for dense models")->capture_default_str();
  m->add_option("--out", mt.out, "Report CSV")->required();
  m->callback([&] { action = [&] { cmd_metrics(mt); }; });

  TuneArgs tu;
  auto* t = app.add_subcommand("tune-sigma", "Per-direction window bandwidth search");
  t->add_option("--model", tu.model, "Model JSON")->required();
  t->add_option("--bundle", tu.bundle, "Bundle the model was trained on")->required();
  t->add_option("--direction", tu.direction, "Single direction (default: all)");
  t->add_option("--lambda", tu.lambda, "L1 weight")->capture_default_str();
  t->add_option("--prune", tu.prune, "Prune threshold")->capture_default_str();
  t->add_option("--grid", tu.grid, "Sigma values (default 15,17,...,63,100,160,250)")->delimiter(',');
  t->add_option("--out", tu.out, "Output CSV")->required();
  t->callback([&] { action = [&] { cmd_tune_sigma(tu); }; });

  BenchArgs bn;
  auto* b = app.add_subcommand("bench", "Time the convolution modes");
  b->add_option("--signal-len", bn.signal_len, "Signal length |y|")->capture_default_str();
  b->add_option("--nnze", bn.nnze, "Filter NNZE values")->delimiter(',');
  b->add_option("--repeats", bn.repeats, "Timed repeats per cell (>= 3)")->capture_default_str();
  b->add_option("--seed", bn.seed, "Seed for signals and filters")->capture_default_str();
  b->add_option("--out", bn.out, "Output CSV")->required();
  b->callback([&] { action = [&] { cmd_bench(bn); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    apply_threads(common);
    action();
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DimensionError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
