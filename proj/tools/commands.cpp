#include "commands.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <thread>

#include "ctxscale/density.hpp"
#include "ctxscale/error.hpp"
#include "ctxscale/fit.hpp"
#include "ctxscale/formats.hpp"
#include "ctxscale/idlab.hpp"
#include "ctxscale/io.hpp"
#include "ctxscale/plot.hpp"
#include "ctxscale/rng.hpp"
#include "ctxscale/scaling.hpp"
#include "ctxscale/serialize.hpp"
#include "ctxscale/sweep.hpp"
#include "ctxscale/train.hpp"
#include "manifest.hpp"

namespace ctxscale::cli {

namespace fs = std::filesystem;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  int jobs = std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  fs::path out = ".";
};

std::string fmt(double v) { return io::format_double(v); }

template <typename T>
T parse_config(const fs::path& path, const std::string& what, RunManifest& manifest) {
  const std::string bytes = io::read_file(path);
  manifest.add_config_bytes(bytes);
  const Json j = parse_json(bytes, what);
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

Json read_json_file(const fs::path& path) { return parse_json(io::read_file(path), path.string()); }

// ---------------------------------------------------------------- gen-data

struct GenDataArgs {
  fs::path config;
  std::size_t n = 0;
  std::string format = "both";
  bool dedup = false;
};

int cmd_gen_data(const Globals& g, const GenDataArgs& a) {
  RunManifest m("gen-data", g.out);
  auto cfg = parse_config<parity::ParityConfig>(a.config, "parity config", m);
  cfg.validate();
  const std::uint64_t seed = g.seed.value_or(cfg.seed);
  m.add_seed(seed);
  const auto data = parity::gen_dataset(cfg, a.n, seed, {.dedup = a.dedup});
  if (a.format != "bin") m.write("dataset.csv", parity::dataset_to_csv(data));
  if (a.format != "csv") m.write("dataset.bin", parity::dataset_to_binary(data));
  m.extra()["n"] = a.n;
  m.extra()["dedup"] = a.dedup;
  m.finish();
  std::cout << "wrote " << data.size() << " samples (T=" << data.n_control_bits() << ", L=" << data.n_context_bits()
            << ") to " << g.out.string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  fs::path config;
  fs::path train_config;
  int context_length = 0;
  std::size_t n_train = 200000;
  std::size_t n_val = 20000;
  std::string arch = "reference";
  std::vector<int> hidden = {400, 200, 200};
  std::optional<int> epochs, patience, batch_size;
  std::optional<double> lr, weight_decay;
  std::optional<std::string> precision;
  std::size_t n_features = 5000;
  bool verbose = false;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  RunManifest m("train", g.out);
  auto cfg = parse_config<parity::ParityConfig>(a.config, "parity config", m);
  cfg.validate();
  nn::TrainConfig tc;
  if (!a.train_config.empty()) tc = parse_config<nn::TrainConfig>(a.train_config, "train config", m);
  if (a.epochs) tc.max_epochs = *a.epochs;
  if (a.patience) tc.patience = *a.patience;
  if (a.batch_size) tc.batch_size = *a.batch_size;
  if (a.lr) tc.learning_rate = *a.lr;
  if (a.weight_decay) tc.weight_decay = *a.weight_decay;
  if (a.precision) tc.precision = *a.precision == "f64" ? nn::Precision::F64 : nn::Precision::F32;
  require(a.context_length >= 1 && a.context_length <= cfg.n_context_bits, "train: context length outside [1, L]");

  const std::uint64_t base = g.seed.value_or(cfg.seed);
  m.add_seed(base);
  const int l = a.context_length, T = cfg.n_control_bits();
  const std::uint64_t model_seed = derive_seed(base, 0x30de1);
  tc.seed = derive_seed(base, 0x7a1);
  tc.validate();
  nn::ModelSpec spec;
  if (a.arch == "split")
    spec = nn::make_split_spec(l, T, model_seed);
  else if (a.arch == "mlp")
    spec = nn::make_mlp_spec(l, T, a.hidden, model_seed);
  else
    spec = nn::make_reference_mlp_spec(l, T, model_seed);

  const auto split = parity::split_disjoint(cfg, a.n_train, a.n_val, derive_seed(base, 0xda7a));
  const auto t0 = std::chrono::steady_clock::now();
  nn::EpochCallback log;
  if (a.verbose)
    log = [](int epoch, double tr, double va) {
      std::fprintf(stderr, "epoch %d train %.5f val %.5f\n", epoch, tr, va);
    };
  const auto result = nn::train(spec, tc, split.train, split.val, log);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto dec = parity::decompose_loss(nn::predict(result.model, split.val), split.val, cfg, l);
  Json run{{"arch", a.arch},
           {"context_length", l},
           {"n_train", a.n_train},
           {"n_val", a.n_val},
           {"parity", cfg},
           {"train", tc},
           {"model", spec},
           {"val_ce", result.history.best_val_loss()},
           {"bayes_risk", parity::bayes_risk(cfg, l)},
           {"posterior_ce", dec.posterior_ce},
           {"approx_loss", dec.approx_loss},
           {"solvable_tasks", parity::solvable_tasks(cfg, l)},
           {"epochs", result.history.epochs()},
           {"best_epoch", result.history.best_epoch},
           {"stopped_early", result.history.stopped_early}};

  nn::save_checkpoint(g.out / "model.bin", result.model, run);
  m.record("model.bin");
  m.record("model.bin.json");
  m.write("run.json", dump_json(run));
  m.write("history.json", dump_json(Json(result.history)));
  std::string csv = "epoch,train_loss,val_loss\n";
  for (int e = 0; e < result.history.epochs(); ++e)
    csv += std::to_string(e) + "," + fmt(result.history.train_loss[static_cast<std::size_t>(e)]) + "," +
           fmt(result.history.val_loss[static_cast<std::size_t>(e)]) + "\n";
  m.write("history.csv", csv);

  if (spec.is_split()) {
    const auto features = nn::extract_context_features(result.model, split.val, std::min(a.n_features, split.val.size()));
    m.write("features.bin", matrix_to_bytes(features));
    m.write("spectrum.json", dump_json(Json(pca(features))));
  }
  m.extra()["wall_time_s"] = wall;
  m.finish();
  std::cout << "l=" << l << " val_ce=" << fmt(result.history.best_val_loss())
            << " bayes_risk=" << fmt(parity::bayes_risk(cfg, l)) << " epochs=" << result.history.epochs() << "\n";
  return kExitOk;
}

// -------------------------------------------------------------- measure-id

struct MeasureIdArgs {
  std::vector<fs::path> runs;
  std::vector<double> thresholds;
  std::size_t subspace = 70;
  std::optional<double> id_threshold;
};

struct LoadedRun {
  fs::path dir;
  int context_length = 0;
  double ce = 0.0;
  int true_id = 0;
  EigenSpectrum spectrum;
  double pca_entropy = 0.0;
  double kde_entropy = 0.0;
};

plot::Chart spectrum_chart(const std::vector<LoadedRun>& runs, bool log_y, const std::string& ts) {
  plot::Chart c{.title = "relative eigenvalue vs index",
                .x_label = "index",
                .y_label = "relative eigenvalue",
                .log_x = false,
                .log_y = log_y,
                .series = {},
                .timestamp = ts};
  for (const auto& r : runs) {
    plot::Series s{.label = "l=" + std::to_string(r.context_length), .x = {}, .y = {}, .highlight = std::nullopt};
    for (std::size_t i = 0; i < r.spectrum.size(); ++i) {
      s.x.push_back(static_cast<double>(i + 1));
      s.y.push_back(r.spectrum.relative_eigenvalues[i]);
    }
    if (r.true_id >= 1 && static_cast<std::size_t>(r.true_id) <= r.spectrum.size())
      s.highlight = static_cast<std::size_t>(r.true_id - 1);
    c.series.push_back(std::move(s));
  }
  return c;
}

int cmd_measure_id(const Globals& g, const MeasureIdArgs& a) {
  RunManifest m("measure-id", g.out);
  std::vector<LoadedRun> runs;
  for (const auto& dir : a.runs) {
    const std::string run_bytes = io::read_file(dir / "run.json");
    m.add_config_bytes(run_bytes);
    const Json run = parse_json(run_bytes, (dir / "run.json").string());
    LoadedRun r;
    r.dir = dir;
    try {
      r.context_length = run.at("context_length").get<int>();
      r.ce = run.at("val_ce").get<double>();
      const auto cfg = run.at("parity").get<parity::ParityConfig>();
      r.true_id = parity::solvable_tasks(cfg, r.context_length);
      m.add_seed(cfg.seed);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError((dir / "run.json").string() + ": " + e.what());
    }
    const Matrix features = matrix_from_bytes(io::read_file(dir / "features.bin"));
    r.spectrum = pca(features);
    r.pca_entropy = idlab::subspace_entropy(r.spectrum, std::min(a.subspace, r.spectrum.size())).value;
    r.kde_entropy = idlab::kde_entropy(features).value;
    runs.push_back(std::move(r));
  }
  std::stable_sort(runs.begin(), runs.end(),
                   [](const LoadedRun& x, const LoadedRun& y) { return x.context_length < y.context_length; });

  const auto thresholds = a.thresholds.empty() ? idlab::default_threshold_grid() : a.thresholds;
  std::string csv = "l,threshold,measured_id,entropy,ce\n";
  Json per_run = Json::array();
  std::vector<EigenSpectrum> spectra;
  std::vector<int> true_ids;
  for (const auto& r : runs) {
    const auto label = "l=" + std::to_string(r.context_length);
    const auto sweep = idlab::threshold_sweep(r.spectrum, thresholds, label);
    for (const auto& s : sweep)
      csv += std::to_string(r.context_length) + "," + fmt(s.threshold) + "," + std::to_string(s.measured_id) + "," +
             fmt(r.pca_entropy) + "," + fmt(r.ce) + "\n";
    const auto band = idlab::id_band(r.spectrum, r.true_id);
    per_run.push_back(Json{{"run", r.dir.filename().string()},
                           {"context_length", r.context_length},
                           {"ce", r.ce},
                           {"true_id", r.true_id},
                           {"band", band ? Json(*band) : Json(nullptr)},
                           {"relative_eigenvalues", r.spectrum.relative_eigenvalues},
                           {"pca_entropy", r.pca_entropy},
                           {"kde_entropy", r.kde_entropy},
                           {"sweep", sweep}});
    spectra.push_back(r.spectrum);
    true_ids.push_back(r.true_id);
  }

  Json report{{"runs", per_run}, {"thresholds", thresholds}, {"subspace_size", a.subspace}};
  std::optional<idlab::ThresholdInterval> consistent;
  if (runs.size() >= 2) consistent = idlab::find_consistent_threshold(spectra, true_ids);
  report["consistent_threshold"] = consistent ? Json(*consistent) : Json(nullptr);

  std::optional<double> y = a.id_threshold;
  if (!y && consistent) y = consistent->midpoint();
  report["id_threshold"] = y ? Json(*y) : Json(nullptr);

  std::vector<double> pca_e, kde_e, ce, ids;
  std::vector<idlab::CeIdPoint> points;
  for (const auto& r : runs) {
    pca_e.push_back(r.pca_entropy);
    kde_e.push_back(r.kde_entropy);
    ce.push_back(r.ce);
    const int id = y ? idlab::measure_id(r.spectrum, *y).measured_id : r.true_id;
    ids.push_back(id);
    points.push_back({r.context_length, r.ce, static_cast<double>(id)});
  }
  report["measured_ids"] = ids;
  report["id_source"] = y ? "threshold" : "solvable_tasks";
  report["entropy_correlation"] = runs.size() >= 3 ? Json(correlation(kde_e, pca_e)) : Json(nullptr);
  std::vector<int> ls;
  for (const auto& r : runs) ls.push_back(r.context_length);
  ls.erase(std::unique(ls.begin(), ls.end()), ls.end());
  report["ce_vs_id"] = ls.size() >= 4 ? Json(idlab::ce_vs_id_report(points)) : Json(nullptr);

  m.write("id_sweep.csv", csv);
  m.write("idlab_report.json", dump_json(report));
  m.write("rel_eig_linear.svg", plot::render_svg(spectrum_chart(runs, false, m.timestamp())));
  m.write("rel_eig_log.svg", plot::render_svg(spectrum_chart(runs, true, m.timestamp())));
  plot::Chart cc{.title = "validation CE vs measured ID",
                 .x_label = "ID",
                 .y_label = "CE (nats)",
                 .log_x = false,
                 .log_y = false,
                 .series = {{.label = "runs", .x = ids, .y = ce, .highlight = std::nullopt}},
                 .timestamp = m.timestamp()};
  m.write("ce_vs_id.svg", plot::render_svg(cc));
  m.finish();

  if (consistent)
    std::cout << "consistent threshold interval (" << fmt(consistent->lo) << ", " << fmt(consistent->hi) << "]\n";
  else
    std::cout << "no consistent threshold\n";
  return kExitOk;
}

// --------------------------------------------------------------------- fit

struct FitArgs {
  fs::path csv;
  std::string model = "power";
  std::string x_col, y_col;
};

std::pair<std::vector<double>, std::vector<double>> read_xy_csv(const fs::path& path, const std::string& x_col,
                                                                const std::string& y_col) {
  std::istringstream in(io::read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path.string() + ": empty csv");
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    for (std::string cell; std::getline(ss, cell, ',');) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      out.push_back(cell);
    }
    return out;
  };
  const auto header = split(line);
  auto column = [&](const std::string& name, std::size_t fallback) {
    if (name.empty()) {
      if (fallback >= header.size()) throw ConfigError(path.string() + ": need at least two columns");
      return fallback;
    }
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ConfigError(path.string() + ": no column \"" + name + "\"");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t xi = column(x_col, 0), yi = column(y_col, 1);
  std::vector<double> x, y;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto f = split(line);
    if (f.size() != header.size()) throw ConfigError(path.string() + ": row " + std::to_string(row) + " has wrong width");
    try {
      std::size_t px = 0, py = 0;
      const double vx = std::stod(f[xi], &px), vy = std::stod(f[yi], &py);
      if (px != f[xi].size() || py != f[yi].size()) throw std::invalid_argument("trailing");
      x.push_back(vx);
      y.push_back(vy);
    } catch (const std::exception&) {
      throw ConfigError(path.string() + ": row " + std::to_string(row) + " is not numeric");
    }
  }
  return {x, y};
}

int cmd_fit(const Globals& g, const FitArgs& a) {
  RunManifest m("fit", g.out);
  m.add_config_bytes(io::read_file(a.csv));
  const auto [x, y] = read_xy_csv(a.csv, a.x_col, a.y_col);
  Json report{{"model", a.model}, {"n_points", x.size()}, {"input", a.csv.filename().string()}};
  std::function<double(double)> curve;
  if (a.model == "linear") {
    const auto f = fit_linear(x, y);
    report["fit"] = f;
    curve = f;
    std::printf("slope %.10g\nintercept %.10g\nr_squared %.10g\n", f.slope, f.intercept, f.r_squared);
  } else {
    const auto f = fit_power_law(x, y);
    report["fit"] = f;
    curve = f;
    std::printf("c0 %.10g\nc %.10g\ngamma %.10g\nr_squared %.10g\n", f.c0, f.c, f.gamma, f.r_squared);
  }
  const bool log_x = a.model == "power";
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  plot::Series fitted{.label = "fit", .x = {}, .y = {}, .highlight = std::nullopt};
  for (int i = 0; i <= 100; ++i) {
    const double t = i / 100.0;
    const double xv = log_x ? *lo * std::pow(*hi / *lo, t) : *lo + (*hi - *lo) * t;
    fitted.x.push_back(xv);
    fitted.y.push_back(curve(xv));
  }
  plot::Chart c{.title = a.model + " fit",
                .x_label = "x",
                .y_label = "y",
                .log_x = log_x,
                .log_y = false,
                .series = {{.label = "data", .x = x, .y = y, .highlight = std::nullopt}, fitted},
                .timestamp = m.timestamp()};
  m.write("fit_report.json", dump_json(report));
  m.write("fit.svg", plot::render_svg(c));
  m.finish();
  return kExitOk;
}

// ----------------------------------------------------------------- nn-dist

struct NnDistArgs {
  int dim = 1;
  std::string density = "uniform";
  double epsilon = 1.0;
  std::vector<std::size_t> sizes = {100, 300, 1000, 3000, 10000};
  int trials = 10;
  double cap = std::numeric_limits<double>::infinity();
};

int cmd_nn_dist(const Globals& g, const NnDistArgs& a) {
  if (!g.seed) throw ConfigError("nn-dist: --seed is required");
  RunManifest m("nn-dist", g.out);
  m.add_seed(*g.seed);
  scaling::Density density = a.density == "gaussian"     ? scaling::Density::gaussian()
                             : a.density == "heavy-tail" ? scaling::Density::heavy_tail(a.epsilon)
                                                         : scaling::Density::uniform();
  const auto r = scaling::nn_scaling_exponent(a.dim, density, a.sizes, a.trials, a.cap, *g.seed);
  Json report{{"dim", a.dim},
              {"density", a.density},
              {"epsilon", a.epsilon},
              {"trials", a.trials},
              {"cap", std::isfinite(a.cap) ? Json(a.cap) : Json(nullptr)},
              {"seed", *g.seed},
              {"theory_exponent", -1.0 / a.dim},
              {"result", r}};
  std::string csv = "dataset_size,mean_distance,std_error\n";
  for (std::size_t i = 0; i < r.dataset_sizes.size(); ++i)
    csv += fmt(r.dataset_sizes[i]) + "," + fmt(r.mean_distance[i]) + "," + fmt(r.std_error[i]) + "\n";
  plot::Series fitted{.label = "fit", .x = r.dataset_sizes, .y = {}, .highlight = std::nullopt};
  for (double d : r.dataset_sizes) fitted.y.push_back(std::exp(r.intercept + r.exponent * std::log(d)));
  plot::Chart c{.title = "mean nearest-neighbour distance, d=" + std::to_string(a.dim),
                .x_label = "D",
                .y_label = "mean NN distance",
                .log_x = true,
                .log_y = true,
                .series = {{.label = "measured", .x = r.dataset_sizes, .y = r.mean_distance, .highlight = std::nullopt},
                           fitted},
                .timestamp = m.timestamp()};
  m.write("nn_report.json", dump_json(report));
  m.write("nn_dist.csv", csv);
  m.write("nn_dist.svg", plot::render_svg(c));
  m.finish();
  std::printf("exponent %.6f (theory %.6f) r_squared %.6f%s\n", r.exponent, -1.0 / a.dim, r.r_squared,
              r.degenerate ? " degenerate" : "");
  return kExitOk;
}

// ------------------------------------------------------------------- sweep

struct SweepArgs {
  fs::path config;
  bool quiet = false;
};

int cmd_sweep(const Globals& g, const SweepArgs& a) {
  RunManifest m("sweep", g.out);
  auto cfg = parse_config<scaling::SweepConfig>(a.config, "sweep config", m);
  if (g.seed) cfg.seeds = {*g.seed};
  for (auto s : cfg.seeds) m.add_seed(s);
  scaling::SweepOptions opt;
  opt.jobs = g.jobs;
  opt.receipt_dir = g.out / "cells";
  std::size_t resumed = 0;
  opt.on_cell = [&](const scaling::RunRecord& r, bool from_receipt) {
    resumed += from_receipt;
    if (a.quiet) return;
    std::fprintf(stderr, "%s D=%zu l=%d seed=%llu ce=%.5f%s\n", from_receipt ? "resumed" : "done", r.dataset_size,
                 r.context_length, static_cast<unsigned long long>(r.seed), r.final_val_ce,
                 r.valid ? "" : (" invalid: " + r.error).c_str());
  };
  const auto report = scaling::run_sweep(cfg, opt);

  Json rj(report);
  Json timings = Json::array();
  for (auto& rec : rj["records"]) {
    timings.push_back(Json{{"dataset_size", rec["dataset_size"]},
                           {"context_length", rec["context_length"]},
                           {"seed", rec["seed"]},
                           {"wall_time_s", rec["wall_time_s"]}});
    rec.erase("wall_time_s");
  }
  std::string csv = "D,l,seed,val_ce,bayes_risk,approx_loss,epochs,valid\n";
  for (const auto& r : report.records)
    csv += std::to_string(r.dataset_size) + "," + std::to_string(r.context_length) + "," + std::to_string(r.seed) +
           "," + fmt(r.final_val_ce) + "," + fmt(r.bayes_risk) + "," + fmt(r.approx_loss) + "," +
           std::to_string(r.epochs) + "," + (r.valid ? "1" : "0") + "\n";

  plot::Chart c{.title = "validation CE vs context length",
                .x_label = "context length l",
                .y_label = "val CE (nats)",
                .log_x = true,
                .log_y = false,
                .series = {},
                .timestamp = m.timestamp()};
  for (auto d : cfg.dataset_sizes) {
    plot::Series s{.label = "D=" + std::to_string(d), .x = {}, .y = {}, .highlight = std::nullopt};
    for (int l : cfg.context_lengths) {
      double sum = 0;
      int n = 0;
      for (const auto& r : report.records)
        if (r.valid && r.dataset_size == d && r.context_length == l) sum += r.final_val_ce, ++n;
      if (n == 0) continue;
      s.x.push_back(l);
      s.y.push_back(sum / n);
    }
    for (const auto& o : report.optimal)
      if (o.dataset_size == d)
        for (std::size_t i = 0; i < s.x.size(); ++i)
          if (s.x[i] == o.context_length) s.highlight = i;
    c.series.push_back(std::move(s));
  }

  m.write("sweep_report.json", dump_json(rj));
  m.write("sweep_grid.csv", csv);
  m.write("sweep_ce_vs_l.svg", plot::render_svg(c));
  m.record("cells");
  m.extra()["timings"] = timings;
  m.extra()["resumed_cells"] = resumed;
  m.finish();

  for (const auto& o : report.optimal)
    std::printf("D=%zu optimal l=%d mean_ce=%.5f\n", o.dataset_size, o.context_length, o.mean_ce);
  std::printf("monotone %s, invalid cells %zu\n", report.monotone ? "yes" : "no", report.invalid_cells);
  if (report.invalid_cells > 0) {
    std::fprintf(stderr, "error: %zu sweep cells failed\n", report.invalid_cells);
    return kExitNumerical;
  }
  return kExitOk;
}

// ------------------------------------------------------------------ report

struct ReportArgs {
  fs::path in;
};

std::string summarise_artifact(const std::string& command, const fs::path& dir, Json& entry) {
  std::ostringstream md;
  char buf[256];
  if (command == "sweep") {
    const Json r = read_json_file(dir / "sweep_report.json");
    md << "| D | optimal l | mean CE |\n|---|---|---|\n";
    for (const auto& o : r.at("optimal")) {
      std::snprintf(buf, sizeof buf, "| %s | %d | %.4f |\n", o.at("dataset_size").dump().c_str(),
                    o.at("context_length").get<int>(), o.at("mean_ce").get<double>());
      md << buf;
    }
    md << "\nmonotone: " << (r.at("monotone").get<bool>() ? "yes" : "no")
       << ", invalid cells: " << r.at("invalid_cells").dump() << "\n";
    entry["monotone"] = r.at("monotone");
    entry["optimal"] = r.at("optimal");
  } else if (command == "train") {
    const Json r = read_json_file(dir / "run.json");
    std::snprintf(buf, sizeof buf, "%s model, l=%d: val CE %.4f, Bayes risk %.4f, gap %.4f\n",
                  r.at("arch").get<std::string>().c_str(), r.at("context_length").get<int>(),
                  r.at("val_ce").get<double>(), r.at("bayes_risk").get<double>(),
                  r.at("val_ce").get<double>() - r.at("bayes_risk").get<double>());
    md << buf;
    entry["val_ce"] = r.at("val_ce");
    entry["bayes_risk"] = r.at("bayes_risk");
  } else if (command == "measure-id") {
    const Json r = read_json_file(dir / "idlab_report.json");
    const auto& ct = r.at("consistent_threshold");
    if (ct.is_null())
      md << "no consistent threshold\n";
    else {
      std::snprintf(buf, sizeof buf, "consistent threshold interval (%.4f, %.4f]\n", ct.at("lo").get<double>(),
                    ct.at("hi").get<double>());
      md << buf;
    }
    if (!r.at("entropy_correlation").is_null())
      md << "KDE vs PCA entropy correlation: " << r.at("entropy_correlation").dump() << "\n";
    entry["consistent_threshold"] = ct;
    entry["entropy_correlation"] = r.at("entropy_correlation");
  } else if (command == "fit") {
    const Json r = read_json_file(dir / "fit_report.json");
    md << r.at("model").get<std::string>() << " fit: `" << r.at("fit").dump() << "`\n";
    entry["fit"] = r.at("fit");
  } else if (command == "nn-dist") {
    const Json r = read_json_file(dir / "nn_report.json");
    std::snprintf(buf, sizeof buf, "d=%d %s: exponent %.4f (theory %.4f)\n", r.at("dim").get<int>(),
                  r.at("density").get<std::string>().c_str(), r.at("result").at("exponent").get<double>(),
                  r.at("theory_exponent").get<double>());
    md << buf;
    entry["exponent"] = r.at("result").at("exponent");
  } else if (command == "gen-data") {
    md << "dataset with " << read_json_file(dir / "manifest.json").at("n").dump() << " samples\n";
  }
  return md.str();
}

int cmd_report(const Globals& g, const ReportArgs& a) {
  const fs::path in = a.in.empty() ? g.out : a.in;
  if (!fs::is_directory(in)) throw IoError("report: " + in.string() + " is not a directory");
  std::vector<fs::path> manifests;
  for (const auto& e : fs::recursive_directory_iterator(in))
    if (e.is_regular_file() && e.path().filename() == "manifest.json") manifests.push_back(e.path());
  std::sort(manifests.begin(), manifests.end());

  RunManifest m("report", g.out);
  std::string md = "# ctxscale report\n";
  Json index = Json::array();
  for (const auto& path : manifests) {
    const Json man = read_json_file(path);
    const std::string command = man.value("command", "");
    if (command == "report") continue;
    const fs::path dir = path.parent_path();
    Json entry{{"command", command},
               {"dir", fs::relative(dir, in).generic_string()},
               {"config_hash", man.value("config_hash", Json(nullptr))}};
    std::string body;
    try {
      body = summarise_artifact(command, dir, entry);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(dir.string() + ": " + e.what());
    }
    md += "\n## " + command + " (" + entry["dir"].get<std::string>() + ")\n\n" + body;
    index.push_back(std::move(entry));
  }
  m.write("report.md", md);
  m.write("report.json", dump_json(Json{{"entries", index}}));
  m.finish();
  std::cout << "summarised " << index.size() << " artifact directories\n";
  return kExitOk;
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"ctxscale: context-length scaling experiments on multitask sparse parity"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed override (required where no config supplies one)");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory");
  app.set_version_flag("--version", std::string(kToolVersion));

  GenDataArgs gd;
  auto* sc_gd = app.add_subcommand("gen-data", "Generate a parity dataset (CSV and binary)");
  sc_gd->add_option("--config", gd.config, "Parity config JSON")->required();
  sc_gd->add_option("--n", gd.n, "Number of samples")->required()->check(CLI::PositiveNumber);
  sc_gd->add_option("--format", gd.format, "csv, bin or both")->check(CLI::IsMember({"csv", "bin", "both"}));
  sc_gd->add_flag("--dedup", gd.dedup, "Reject repeated input vectors");

  TrainArgs tr;
  auto* sc_tr = app.add_subcommand("train", "Train one model at a fixed context length");
  sc_tr->add_option("--config", tr.config, "Parity config JSON")->required();
  sc_tr->add_option("--context-length,-l", tr.context_length, "Visible context bits")->required();
  sc_tr->add_option("--n-train", tr.n_train, "Training samples")->check(CLI::PositiveNumber);
  sc_tr->add_option("--n-val", tr.n_val, "Validation samples")->check(CLI::PositiveNumber);
  sc_tr->add_option("--arch", tr.arch, "reference, mlp or split")
      ->check(CLI::IsMember({"reference", "mlp", "split"}));
  sc_tr->add_option("--hidden", tr.hidden, "Hidden widths for --arch mlp")->delimiter(',');
  sc_tr->add_option("--train-config", tr.train_config, "Training config JSON");
  sc_tr->add_option("--epochs", tr.epochs, "Maximum epochs");
  sc_tr->add_option("--patience", tr.patience, "Early-stopping patience");
  sc_tr->add_option("--batch-size", tr.batch_size, "Mini-batch size");
  sc_tr->add_option("--lr", tr.lr, "Learning rate");
  sc_tr->add_option("--weight-decay", tr.weight_decay, "Decoupled weight decay");
  sc_tr->add_option("--precision", tr.precision, "f32 or f64")->check(CLI::IsMember({"f32", "f64"}));
  sc_tr->add_option("--features", tr.n_features, "Validation samples whose features are saved (split only)");
  sc_tr->add_flag("--verbose,-v", tr.verbose, "Per-epoch losses on stderr");

  MeasureIdArgs mi;
  auto* sc_mi = app.add_subcommand("measure-id", "Threshold ID and entropy of saved split-model features");
  sc_mi->add_option("--run", mi.runs, "Train output directories")->required()->check(CLI::ExistingDirectory);
  sc_mi->add_option("--thresholds", mi.thresholds, "Relative-eigenvalue thresholds")->delimiter(',');
  sc_mi->add_option("--subspace", mi.subspace, "Subspace size for the PCA entropy")->check(CLI::PositiveNumber);
  sc_mi->add_option("--id-threshold", mi.id_threshold, "Threshold for the CE vs ID fit");

  FitArgs ft;
  auto* sc_ft = app.add_subcommand("fit", "Fit a power law or a line to CSV columns");
  sc_ft->add_option("--csv", ft.csv, "Input CSV with a header row")->required();
  sc_ft->add_option("--model", ft.model, "power or linear")->check(CLI::IsMember({"power", "linear"}));
  sc_ft->add_option("--x", ft.x_col, "x column name (default: first)");
  sc_ft->add_option("--y", ft.y_col, "y column name (default: second)");

  NnDistArgs nd;
  auto* sc_nd = app.add_subcommand("nn-dist", "Nearest-neighbour distance scaling exponent");
  sc_nd->add_option("--dim", nd.dim, "Dimension")->required()->check(CLI::PositiveNumber);
  sc_nd->add_option("--density", nd.density, "uniform, gaussian or heavy-tail")
      ->check(CLI::IsMember({"uniform", "gaussian", "heavy-tail"}));
  sc_nd->add_option("--epsilon", nd.epsilon, "Heavy-tail index")->check(CLI::PositiveNumber);
  sc_nd->add_option("--sizes", nd.sizes, "Dataset sizes")->delimiter(',');
  sc_nd->add_option("--trials", nd.trials, "Trials per size");
  sc_nd->add_option("--cap", nd.cap, "Distance cap")->check(CLI::PositiveNumber);

  SweepArgs sw;
  auto* sc_sw = app.add_subcommand("sweep", "Dataset size x context length grid");
  sc_sw->add_option("--config", sw.config, "Sweep config JSON")->required();
  sc_sw->add_flag("--quiet,-q", sw.quiet, "No per-cell progress");

  ReportArgs rp;
  auto* sc_rp = app.add_subcommand("report", "Summarise artifact directories");
  sc_rp->add_option("--in", rp.in, "Directory to scan (default: --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (sc_gd->parsed()) return cmd_gen_data(g, gd);
    if (sc_tr->parsed()) return cmd_train(g, tr);
    if (sc_mi->parsed()) return cmd_measure_id(g, mi);
    if (sc_ft->parsed()) return cmd_fit(g, ft);
    if (sc_nd->parsed()) return cmd_nn_dist(g, nd);
    if (sc_sw->parsed()) return cmd_sweep(g, sw);
    if (sc_rp->parsed()) return cmd_report(g, rp);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "invalid argument: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return kExitUsage;
}

}  // namespace ctxscale::cli
