#include "ctxscale/serialize.hpp"

#include "ctxscale/error.hpp"

namespace ctxscale {

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw ConfigError(what + ": invalid JSON: " + e.what());
  }
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

namespace {

template <typename T>
void read_opt(const Json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) out = it->template get<T>();
}

template <typename T>
void read_req(const Json& j, const char* key, T& out, const char* what) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) throw ConfigError(std::string(what) + ": missing required field \"" + key + "\"");
  out = it->template get<T>();
}

}  // namespace

void to_json(Json& j, const EigenSpectrum& s) {
  j = Json{{"raw_eigenvalues", s.raw_eigenvalues},
           {"relative_eigenvalues", s.relative_eigenvalues},
           {"source_dim", s.source_dim},
           {"degenerate", s.degenerate}};
}

void from_json(const Json& j, EigenSpectrum& s) {
  std::vector<double> raw;
  read_req(j, "raw_eigenvalues", raw, "spectrum");
  std::size_t dim = raw.size();
  read_opt(j, "source_dim", dim);
  s = make_spectrum(std::move(raw), dim);
}

void to_json(Json& j, const PowerLawFit& f) {
  j = Json{{"c0", f.c0},
           {"c", f.c},
           {"gamma", f.gamma},
           {"c0_stderr", f.c0_stderr},
           {"c_stderr", f.c_stderr},
           {"gamma_stderr", f.gamma_stderr ? Json(*f.gamma_stderr) : Json(nullptr)},
           {"r_squared", f.r_squared},
           {"degenerate", f.degenerate}};
}

void from_json(const Json& j, PowerLawFit& f) {
  read_opt(j, "c0", f.c0);
  read_opt(j, "c", f.c);
  read_opt(j, "gamma", f.gamma);
  read_opt(j, "c0_stderr", f.c0_stderr);
  read_opt(j, "c_stderr", f.c_stderr);
  if (auto it = j.find("gamma_stderr"); it != j.end() && !it->is_null()) f.gamma_stderr = it->get<double>();
  read_opt(j, "r_squared", f.r_squared);
  read_opt(j, "degenerate", f.degenerate);
}

void to_json(Json& j, const LinearFit& f) {
  j = Json{{"slope", f.slope}, {"intercept", f.intercept}, {"r_squared", f.r_squared}};
}

void to_json(Json& j, const SpectrumDecayFit& f) {
  j = Json{{"alpha", f.alpha}, {"intercept", f.intercept}, {"r_squared", f.r_squared}};
}

namespace parity {

void to_json(Json& j, const TaskSpec& t) { j = Json{{"bits", {t.bit_hi, t.bit_lo}}, {"frequency", t.frequency}}; }

void from_json(const Json& j, TaskSpec& t) {
  std::vector<int> bits;
  read_req(j, "bits", bits, "task");
  if (bits.size() != 2) throw ConfigError("task: \"bits\" must hold exactly two positions");
  double f = 1.0;
  read_opt(j, "frequency", f);
  t = TaskSpec::make(bits[0], bits[1], f);
}

void to_json(Json& j, const MaskPolicy& m) {
  j = Json{{"kind", m.kind == MaskPolicy::Kind::None ? "none" : "random_suffix"},
           {"min_visible", m.min_visible},
           {"max_visible", m.max_visible},
           {"masked_fraction", m.masked_fraction}};
}

void from_json(const Json& j, MaskPolicy& m) {
  std::string kind = "none";
  read_opt(j, "kind", kind);
  if (kind == "none")
    m.kind = MaskPolicy::Kind::None;
  else if (kind == "random_suffix")
    m.kind = MaskPolicy::Kind::RandomSuffix;
  else
    throw ConfigError("mask: unknown kind \"" + kind + "\"");
  read_opt(j, "min_visible", m.min_visible);
  read_opt(j, "max_visible", m.max_visible);
  read_opt(j, "masked_fraction", m.masked_fraction);
}

void to_json(Json& j, const ParityConfig& c) {
  j = Json{{"tasks", c.tasks}, {"n_context_bits", c.n_context_bits}, {"mask", c.mask}, {"seed", c.seed}};
}

void from_json(const Json& j, ParityConfig& c) {
  if (!j.is_object()) throw ConfigError("parity config: expected a JSON object");
  c = ParityConfig{};
  if (auto it = j.find("preset"); it != j.end()) {
    const auto preset = it->get<std::string>();
    if (preset != "canonical") throw ConfigError("parity config: unknown preset \"" + preset + "\"");
    c = canonical_task_set();
  }
  read_opt(j, "tasks", c.tasks);
  read_opt(j, "n_context_bits", c.n_context_bits);
  read_opt(j, "mask", c.mask);
  read_req(j, "seed", c.seed, "parity config");
}

}  // namespace parity

namespace nn {

void to_json(Json& j, const MlpSpec& s) {
  j = Json{{"layer_dims", s.layer_dims}, {"activation_after", s.activation_after}, {"leaky_slope", s.leaky_slope}};
}

void from_json(const Json& j, MlpSpec& s) {
  read_req(j, "layer_dims", s.layer_dims, "mlp spec");
  std::vector<bool> act;
  read_opt(j, "activation_after", act);
  if (act.empty() && s.layer_dims.size() >= 2) act.assign(s.layer_dims.size() - 2, true);
  s.activation_after = act;
  read_opt(j, "leaky_slope", s.leaky_slope);
}

void to_json(Json& j, const ModelSpec& s) {
  j = Json{{"context_length", s.context_length}, {"n_control_bits", s.n_control_bits}, {"seed", s.seed}};
  if (const auto* split = std::get_if<SplitModelSpec>(&s.arch)) {
    j["kind"] = "split";
    j["encoder"] = split->encoder;
    j["decoder"] = split->decoder;
  } else {
    j["kind"] = "mlp";
    j["mlp"] = std::get<MlpSpec>(s.arch);
  }
}

void from_json(const Json& j, ModelSpec& s) {
  read_req(j, "context_length", s.context_length, "model spec");
  read_req(j, "n_control_bits", s.n_control_bits, "model spec");
  read_req(j, "seed", s.seed, "model spec");
  std::string kind;
  read_req(j, "kind", kind, "model spec");
  if (kind == "split") {
    SplitModelSpec split;
    read_req(j, "encoder", split.encoder, "model spec");
    read_req(j, "decoder", split.decoder, "model spec");
    s.arch = split;
  } else if (kind == "mlp") {
    MlpSpec mlp;
    read_req(j, "mlp", mlp, "model spec");
    s.arch = mlp;
  } else {
    throw ConfigError("model spec: unknown kind \"" + kind + "\"");
  }
}

void to_json(Json& j, const TrainConfig& c) {
  j = Json{{"learning_rate", c.learning_rate},
           {"weight_decay", c.weight_decay},
           {"batch_size", c.batch_size},
           {"max_epochs", c.max_epochs},
           {"patience", c.patience},
           {"adam_beta1", c.adam_beta1},
           {"adam_beta2", c.adam_beta2},
           {"adam_eps", c.adam_eps},
           {"seed", c.seed},
           {"precision", c.precision == Precision::F32 ? "f32" : "f64"}};
}

void from_json(const Json& j, TrainConfig& c) {
  read_opt(j, "learning_rate", c.learning_rate);
  read_opt(j, "weight_decay", c.weight_decay);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "max_epochs", c.max_epochs);
  read_opt(j, "patience", c.patience);
  read_opt(j, "adam_beta1", c.adam_beta1);
  read_opt(j, "adam_beta2", c.adam_beta2);
  read_opt(j, "adam_eps", c.adam_eps);
  read_opt(j, "seed", c.seed);
  std::string precision = c.precision == Precision::F32 ? "f32" : "f64";
  read_opt(j, "precision", precision);
  if (precision == "f32")
    c.precision = Precision::F32;
  else if (precision == "f64")
    c.precision = Precision::F64;
  else
    throw ConfigError("train config: precision must be \"f32\" or \"f64\"");
}

void to_json(Json& j, const TrainHistory& h) {
  j = Json{{"train_loss", h.train_loss},
           {"val_loss", h.val_loss},
           {"best_epoch", h.best_epoch},
           {"stopped_early", h.stopped_early}};
}

void from_json(const Json& j, TrainHistory& h) {
  read_opt(j, "train_loss", h.train_loss);
  read_opt(j, "val_loss", h.val_loss);
  read_opt(j, "best_epoch", h.best_epoch);
  read_opt(j, "stopped_early", h.stopped_early);
}

}  // namespace nn

namespace idlab {

void to_json(Json& j, const IdMeasurement& m) {
  j = Json{{"threshold", m.threshold}, {"measured_id", m.measured_id}, {"spectrum", m.spectrum}};
}

void to_json(Json& j, const EntropyEstimate& e) {
  j = Json{{"value", e.value}, {"method", e.method == EntropyMethod::Kde ? "kde" : "pca-subspace"}};
  j["subspace_size"] = e.subspace_size ? Json(*e.subspace_size) : Json(nullptr);
}

void to_json(Json& j, const ThresholdInterval& t) { j = Json{{"lo", t.lo}, {"hi", t.hi}, {"lo_inclusive", false}, {"hi_inclusive", true}}; }

void to_json(Json& j, const CeIdReport& r) {
  j = Json{{"ce_vs_id", r.ce_vs_id}, {"id_vs_l", r.id_vs_l}, {"ce_vs_l", r.ce_vs_l}, {"n_points", r.n_points}};
}

}  // namespace idlab

namespace scaling {

void to_json(Json& j, const LossModelParams& p) {
  j = Json{{"c0", p.c0},           {"c", p.c},   {"gamma", p.gamma}, {"dim_inf", p.dim_inf}, {"c_dim", p.c_dim},
           {"c_alpha", p.c_alpha}, {"a0", p.a0}, {"beta", p.beta}};
}

void from_json(const Json& j, LossModelParams& p) {
  read_opt(j, "c0", p.c0);
  read_opt(j, "c", p.c);
  read_opt(j, "gamma", p.gamma);
  read_opt(j, "dim_inf", p.dim_inf);
  read_opt(j, "c_dim", p.c_dim);
  read_opt(j, "c_alpha", p.c_alpha);
  read_opt(j, "a0", p.a0);
  read_opt(j, "beta", p.beta);
}

void to_json(Json& j, const NnScalingResult& r) {
  j = Json{{"exponent", r.exponent},           {"intercept", r.intercept},         {"r_squared", r.r_squared},
           {"dataset_sizes", r.dataset_sizes}, {"mean_distance", r.mean_distance}, {"std_error", r.std_error},
           {"degenerate", r.degenerate}};
}

void to_json(Json& j, const RunRecord& r) {
  j = Json{{"dataset_size", r.dataset_size}, {"context_length", r.context_length},
           {"seed", r.seed},                 {"final_val_ce", r.final_val_ce},
           {"bayes_risk", r.bayes_risk},     {"approx_loss", r.approx_loss},
           {"epochs", r.epochs},             {"best_epoch", r.best_epoch},
           {"wall_time_s", r.wall_time_s},   {"valid", r.valid},
           {"error", r.error}};
}

void from_json(const Json& j, RunRecord& r) {
  read_req(j, "dataset_size", r.dataset_size, "run record");
  read_req(j, "context_length", r.context_length, "run record");
  read_req(j, "seed", r.seed, "run record");
  read_opt(j, "final_val_ce", r.final_val_ce);
  read_opt(j, "bayes_risk", r.bayes_risk);
  read_opt(j, "approx_loss", r.approx_loss);
  read_opt(j, "epochs", r.epochs);
  read_opt(j, "best_epoch", r.best_epoch);
  read_opt(j, "wall_time_s", r.wall_time_s);
  read_opt(j, "valid", r.valid);
  read_opt(j, "error", r.error);
}

void to_json(Json& j, const OptimalContext& o) {
  j = Json{{"dataset_size", o.dataset_size}, {"context_length", o.context_length}, {"mean_ce", o.mean_ce}};
}

void to_json(Json& j, const SweepReport& r) {
  j = Json{{"records", r.records},
           {"optimal", r.optimal},
           {"monotone", r.monotone},
           {"invalid_cells", r.invalid_cells}};
}

void to_json(Json& j, const SweepConfig& c) {
  j = Json{{"parity", c.parity},
           {"hidden", c.hidden},
           {"activation_after", c.activation_after},
           {"train", c.train},
           {"dataset_sizes", c.dataset_sizes},
           {"context_lengths", c.context_lengths},
           {"seeds", c.seeds},
           {"n_val", c.n_val}};
}

void from_json(const Json& j, SweepConfig& c) {
  if (!j.is_object()) throw ConfigError("sweep config: expected a JSON object");
  c = SweepConfig{};
  read_req(j, "parity", c.parity, "sweep config");
  read_opt(j, "hidden", c.hidden);
  if (j.contains("hidden") && !j.contains("activation_after")) {
    c.activation_after.assign(c.hidden.size(), true);
  }
  read_opt(j, "activation_after", c.activation_after);
  read_opt(j, "train", c.train);
  read_req(j, "dataset_sizes", c.dataset_sizes, "sweep config");
  read_req(j, "context_lengths", c.context_lengths, "sweep config");
  read_req(j, "seeds", c.seeds, "sweep config");
  read_opt(j, "n_val", c.n_val);
}

}  // namespace scaling

}  // namespace ctxscale
