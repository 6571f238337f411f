#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ctxscale/density.hpp"
#include "ctxscale/error.hpp"
#include "ctxscale/fit.hpp"
#include "ctxscale/formats.hpp"
#include "ctxscale/idlab.hpp"
#include "ctxscale/linalg.hpp"
#include "ctxscale/parity.hpp"
#include "ctxscale/rng.hpp"
#include "ctxscale/scaling.hpp"
#include "ctxscale/serialize.hpp"
#include "ctxscale/sweep.hpp"
#include "ctxscale/train.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace ctxscale;

namespace {

template <typename T>
T from_json_text(const std::string& text, const std::string& what) {
  const Json j = parse_json(text, what);
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

template <typename T>
std::string to_json_text(const T& v) {
  return Json(v).dump();
}

py::bytes as_bytes(const std::string& s) { return py::bytes(s.data(), s.size()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Context-length scaling experiments on multitask sparse parity";
  m.attr("__version__") = "0.1.0";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  // numerics
  py::class_<EigenSpectrum>(m, "EigenSpectrum")
      .def_readonly("raw_eigenvalues", &EigenSpectrum::raw_eigenvalues)
      .def_readonly("relative_eigenvalues", &EigenSpectrum::relative_eigenvalues)
      .def_readonly("source_dim", &EigenSpectrum::source_dim)
      .def_readonly("degenerate", &EigenSpectrum::degenerate)
      .def("rel_eig", &EigenSpectrum::rel_eig, "index_1based"_a)
      .def("__len__", &EigenSpectrum::size)
      .def("to_json", &to_json_text<EigenSpectrum>);
  m.def(
      "make_spectrum", [](std::vector<double> raw) { return make_spectrum(raw, raw.size()); }, "raw_eigenvalues"_a);

  m.def(
      "sym_eig",
      [](const Matrix& a) {
        auto r = sym_eig(a);
        return py::make_tuple(r.eigenvalues, r.eigenvectors, r.sweeps);
      },
      "matrix"_a, "Cyclic Jacobi eigendecomposition: (eigenvalues descending, eigenvectors as columns, sweeps).");
  m.def("covariance", &covariance, "samples"_a);
  m.def("pca", &pca, "features"_a, py::call_guard<py::gil_scoped_release>());

  py::class_<PowerLawFit>(m, "PowerLawFit")
      .def_readonly("c0", &PowerLawFit::c0)
      .def_readonly("c", &PowerLawFit::c)
      .def_readonly("gamma", &PowerLawFit::gamma)
      .def_readonly("c0_stderr", &PowerLawFit::c0_stderr)
      .def_readonly("c_stderr", &PowerLawFit::c_stderr)
      .def_readonly("gamma_stderr", &PowerLawFit::gamma_stderr)
      .def_readonly("r_squared", &PowerLawFit::r_squared)
      .def_readonly("degenerate", &PowerLawFit::degenerate)
      .def("__call__", &PowerLawFit::operator(), "x"_a)
      .def("to_json", &to_json_text<PowerLawFit>);
  py::class_<LinearFit>(m, "LinearFit")
      .def_readonly("slope", &LinearFit::slope)
      .def_readonly("intercept", &LinearFit::intercept)
      .def_readonly("r_squared", &LinearFit::r_squared)
      .def("__call__", &LinearFit::operator(), "x"_a);
  m.def(
      "fit_power_law", [](std::vector<double> x, std::vector<double> y) { return fit_power_law(x, y); }, "x"_a, "y"_a);
  m.def(
      "fit_linear", [](std::vector<double> x, std::vector<double> y) { return fit_linear(x, y); }, "x"_a, "y"_a);
  m.def(
      "correlation", [](std::vector<double> x, std::vector<double> y) { return correlation(x, y); }, "x"_a, "y"_a);
  m.def(
      "gaussian_kde_entropy",
      [](const Matrix& samples, std::optional<double> bandwidth) {
        const auto k = gaussian_kde_entropy(samples, bandwidth);
        return py::dict("entropy"_a = k.entropy, "bandwidth"_a = k.bandwidth, "dims_used"_a = k.dims_used);
      },
      "samples"_a, "bandwidth"_a = py::none(), py::call_guard<py::gil_scoped_release>());

  // parity
  py::class_<parity::ParityConfig>(m, "ParityConfig")
      .def_static(
          "from_json", [](const std::string& s) { return from_json_text<parity::ParityConfig>(s, "parity config"); },
          "text"_a)
      .def("to_json", &to_json_text<parity::ParityConfig>)
      .def_readonly("n_context_bits", &parity::ParityConfig::n_context_bits)
      .def_readonly("seed", &parity::ParityConfig::seed)
      .def_property_readonly("n_control_bits", &parity::ParityConfig::n_control_bits)
      .def_property_readonly("tasks",
                             [](const parity::ParityConfig& c) {
                               std::vector<std::pair<int, int>> t;
                               for (const auto& s : c.tasks) t.emplace_back(s.bit_hi, s.bit_lo);
                               return t;
                             })
      .def("validate", &parity::ParityConfig::validate);
  m.def("canonical_task_set", &parity::canonical_task_set, "seed"_a = 0);

  py::class_<parity::Dataset>(m, "Dataset")
      .def("__len__", &parity::Dataset::size)
      .def_property_readonly("n_control_bits", &parity::Dataset::n_control_bits)
      .def_property_readonly("n_context_bits", &parity::Dataset::n_context_bits)
      .def("task", &parity::Dataset::task, "i"_a)
      .def("label", &parity::Dataset::label, "i"_a)
      .def("n_visible", &parity::Dataset::n_visible, "i"_a)
      .def("labels",
           [](const parity::Dataset& d) {
             std::vector<int> out(d.size());
             for (std::size_t i = 0; i < d.size(); ++i) out[i] = d.label(i);
             return out;
           })
      .def(
          "inputs",
          [](const parity::Dataset& d, int l) { return Matrix(nn::build_inputs<double>(d, l, 0, d.size())); },
          "context_length"_a, "Rows of [context_1..context_l, control_1..control_T].")
      .def("to_csv", &parity::dataset_to_csv)
      .def("to_binary", [](const parity::Dataset& d) { return as_bytes(parity::dataset_to_binary(d)); })
      .def_static("from_csv", [](const std::string& s) { return parity::dataset_from_csv(s); }, "text"_a)
      .def_static(
          "from_binary", [](const py::bytes& b) { return parity::dataset_from_binary(std::string(b)); }, "data"_a)
      .def("__eq__", [](const parity::Dataset& a, const parity::Dataset& b) { return a == b; });

  m.def(
      "gen_dataset",
      [](const parity::ParityConfig& c, std::size_t n, std::uint64_t seed, bool dedup) {
        return parity::gen_dataset(c, n, seed, {.dedup = dedup});
      },
      "config"_a, "n"_a, "seed"_a, "dedup"_a = false, py::call_guard<py::gil_scoped_release>());
  m.def(
      "split_disjoint",
      [](const parity::ParityConfig& c, std::size_t n_train, std::size_t n_val, std::uint64_t seed) {
        auto s = parity::split_disjoint(c, n_train, n_val, seed);
        return py::make_tuple(std::move(s.train), std::move(s.val));
      },
      "config"_a, "n_train"_a, "n_val"_a, "seed"_a);
  m.def("solvable_tasks", &parity::solvable_tasks, "config"_a, "context_length"_a);
  m.def("bayes_risk", &parity::bayes_risk, "config"_a, "context_length"_a);
  m.def("log2_input_space", &parity::log2_input_space, "config"_a);
  m.def(
      "decompose_loss",
      [](std::vector<double> predictions, const parity::Dataset& d, const parity::ParityConfig& c, int l) {
        const auto r = parity::decompose_loss(predictions, d, c, l);
        return py::dict("total_ce"_a = r.total_ce, "posterior_ce"_a = r.posterior_ce, "bayes_risk"_a = r.bayes_risk,
                        "approx_loss"_a = r.approx_loss, "clamped"_a = r.clamped);
      },
      "predictions"_a, "data"_a, "config"_a, "context_length"_a);
  m.def(
      "bayes_posteriors",
      [](const parity::Dataset& d, const parity::ParityConfig& c, int l) {
        std::vector<double> out(d.size());
        for (std::size_t i = 0; i < d.size(); ++i) out[i] = parity::bayes_posterior(d, i, c, l);
        return out;
      },
      "data"_a, "config"_a, "context_length"_a);

  // nn
  py::class_<nn::Model<double>>(m, "Model")
      .def_property_readonly("param_count", &nn::Model<double>::param_count)
      .def_property_readonly("spec_json", [](const nn::Model<double>& mo) { return to_json_text(mo.spec()); })
      .def("predict", [](const nn::Model<double>& mo, const parity::Dataset& d) { return nn::predict(mo, d); })
      .def("evaluate_ce", [](const nn::Model<double>& mo, const parity::Dataset& d) { return nn::evaluate_ce(mo, d); })
      .def(
          "context_features",
          [](const nn::Model<double>& mo, const parity::Dataset& d, std::size_t n) {
            return nn::extract_context_features(mo, d, n);
          },
          "data"_a, "n"_a = 0)
      .def("to_bytes", [](const nn::Model<double>& mo) { return as_bytes(nn::checkpoint_to_bytes(mo)); })
      .def_static(
          "from_bytes", [](const py::bytes& b) { return nn::checkpoint_from_bytes(std::string(b)); }, "data"_a);

  m.def(
      "reference_mlp_spec",
      [](int l, int t, std::uint64_t seed) { return to_json_text(nn::make_reference_mlp_spec(l, t, seed)); },
      "context_length"_a, "n_control_bits"_a, "seed"_a);
  m.def(
      "split_model_spec",
      [](int l, int t, std::uint64_t seed) { return to_json_text(nn::make_split_spec(l, t, seed)); },
      "context_length"_a, "n_control_bits"_a, "seed"_a);
  m.def(
      "train",
      [](const std::string& spec_json, const std::string& train_json, const parity::Dataset& tr,
         const parity::Dataset& va) {
        const auto spec = from_json_text<nn::ModelSpec>(spec_json, "model spec");
        const auto tc = from_json_text<nn::TrainConfig>(train_json, "train config");
        nn::TrainResult r = [&] {
          py::gil_scoped_release release;
          return nn::train(spec, tc, tr, va);
        }();
        return py::make_tuple(std::move(r.model), r.history.train_loss, r.history.val_loss, r.history.best_epoch);
      },
      "model_spec"_a, "train_config"_a, "train_data"_a, "val_data"_a,
      "Returns (model, train_loss, val_loss, best_epoch); configs are JSON text.");

  // idlab
  m.def(
      "measure_id",
      [](const EigenSpectrum& s, double threshold) { return idlab::measure_id(s, threshold).measured_id; },
      "spectrum"_a, "threshold"_a);
  m.def(
      "threshold_sweep",
      [](const EigenSpectrum& s, std::vector<double> thresholds) {
        std::vector<int> ids;
        for (const auto& r : idlab::threshold_sweep(s, thresholds)) ids.push_back(r.measured_id);
        return ids;
      },
      "spectrum"_a, "thresholds"_a);
  m.def("default_threshold_grid", &idlab::default_threshold_grid, "count"_a = 25);
  m.def(
      "subspace_entropy", [](const EigenSpectrum& s, std::size_t n) { return idlab::subspace_entropy(s, n).value; },
      "spectrum"_a, "n"_a);
  m.def(
      "kde_entropy", [](const Matrix& f) { return idlab::kde_entropy(f).value; }, "features"_a,
      py::call_guard<py::gil_scoped_release>());
  m.def(
      "find_consistent_threshold",
      [](std::vector<EigenSpectrum> spectra, std::vector<int> ids) -> std::optional<std::pair<double, double>> {
        const auto r = idlab::find_consistent_threshold(spectra, ids);
        if (!r) return std::nullopt;
        return std::make_pair(r->lo, r->hi);
      },
      "spectra"_a, "true_ids"_a, "Interval (lo, hi] of thresholds measuring every true ID, or None.");

  // scaling
  py::class_<scaling::LossModelParams>(m, "LossModelParams")
      .def(py::init([](double c0, double c, double gamma, double dim_inf, double c_dim, double c_alpha, double a0,
                       double beta) {
             return scaling::LossModelParams{c0, c, gamma, dim_inf, c_dim, c_alpha, a0, beta};
           }),
           "c0"_a, "c"_a, "gamma"_a, "dim_inf"_a, "c_dim"_a, "c_alpha"_a, "a0"_a, "beta"_a = 0.5)
      .def("dim", &scaling::LossModelParams::dim, "context_length"_a);
  m.def("model_loss", &scaling::model_loss, "params"_a, "dataset_size"_a, "context_length"_a);
  m.def(
      "optimal_context",
      [](const scaling::LossModelParams& p, double d, std::vector<int> grid) {
        return scaling::optimal_context(p, d, grid);
      },
      "params"_a, "dataset_size"_a, "l_grid"_a);
  m.def("capped_nn_mean", &scaling::capped_nn_mean, "points"_a, "cap"_a);
  m.def(
      "nn_scaling_exponent",
      [](int dim, const std::string& density, double epsilon, std::vector<std::size_t> sizes, int trials, double cap,
         std::uint64_t seed) {
        const scaling::Density d = density == "gaussian"     ? scaling::Density::gaussian()
                                   : density == "heavy-tail" ? scaling::Density::heavy_tail(epsilon)
                                   : density == "uniform"    ? scaling::Density::uniform()
                                                             : throw InvalidArgument("unknown density " + density);
        scaling::NnScalingResult r;
        {
          py::gil_scoped_release release;
          r = scaling::nn_scaling_exponent(dim, d, sizes, trials, cap, seed);
        }
        return py::dict("exponent"_a = r.exponent, "intercept"_a = r.intercept, "r_squared"_a = r.r_squared,
                        "dataset_sizes"_a = r.dataset_sizes, "mean_distance"_a = r.mean_distance,
                        "std_error"_a = r.std_error, "degenerate"_a = r.degenerate);
      },
      "dim"_a, "density"_a = "uniform", "epsilon"_a = 1.0, "dataset_sizes"_a, "trials"_a = 10,
      "cap"_a = std::numeric_limits<double>::infinity(), "seed"_a);
  m.def(
      "run_sweep",
      [](const std::string& config_json, int jobs, const std::string& receipt_dir) {
        const auto cfg = from_json_text<scaling::SweepConfig>(config_json, "sweep config");
        scaling::SweepOptions opt;
        opt.jobs = jobs;
        opt.receipt_dir = receipt_dir;
        scaling::SweepReport r;
        {
          py::gil_scoped_release release;
          r = scaling::run_sweep(cfg, opt);
        }
        return to_json_text(r);
      },
      "config"_a, "jobs"_a = 1, "receipt_dir"_a = "", "Runs the grid; returns the report as JSON text.");
  m.def("derive_seed", &derive_seed, "parent"_a, "stream"_a);
}
