#include "ctxscale/nn.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctxscale/error.hpp"
#include "ctxscale/rng.hpp"

namespace ctxscale::nn {

// ---------------------------------------------------------------------------
// Specs

std::size_t MlpSpec::param_count() const {
  std::size_t n = 0;
  for (int k = 0; k < n_layers(); ++k) {
    const auto in = static_cast<std::size_t>(layer_dims[static_cast<std::size_t>(k)]);
    const auto out = static_cast<std::size_t>(layer_dims[static_cast<std::size_t>(k) + 1]);
    n += in * out + out;
  }
  return n;
}

void MlpSpec::validate() const {
  require(layer_dims.size() >= 2, "mlp spec: need at least one linear layer");
  for (int d : layer_dims) require(d >= 1, "mlp spec: layer dims must be positive");
  require(activation_after.size() == layer_dims.size() - 2, "mlp spec: one activation flag per inner junction");
  require(leaky_slope >= 0.0 && leaky_slope < 1.0, "mlp spec: leaky slope outside [0, 1)");
}

MlpSpec MlpSpec::chain(std::vector<int> dims) {
  MlpSpec s;
  s.activation_after.assign(dims.size() >= 2 ? dims.size() - 2 : 0, true);
  s.layer_dims = std::move(dims);
  return s;
}

void ModelSpec::validate() const {
  require(context_length >= 1, "model spec: context length must be >= 1");
  require(n_control_bits >= 1, "model spec: need control bits");
  if (const auto* mlp = std::get_if<MlpSpec>(&arch)) {
    mlp->validate();
    require(mlp->n_layers() >= 2, "model spec: an MLP needs at least 2 linear layers");
    require(mlp->input_dim() == input_dim(), "model spec: MLP input dim must equal l + T");
    require(mlp->output_dim() == 1, "model spec: MLP must end in a single logit");
  } else {
    const auto& s = std::get<SplitModelSpec>(arch);
    s.encoder.validate();
    s.decoder.validate();
    require(s.encoder.input_dim() == context_length, "model spec: encoder must consume exactly l context bits");
    require(s.decoder.input_dim() == s.feature_dim() + n_control_bits,
            "model spec: decoder input must be feature_dim + T");
    require(s.decoder.output_dim() == 1, "model spec: decoder must end in a single logit");
  }
}

ModelSpec make_mlp_spec(int context_length, int n_control_bits, std::vector<int> hidden, std::uint64_t seed) {
  std::vector<int> dims{context_length + n_control_bits};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  ModelSpec spec{context_length, n_control_bits, seed, MlpSpec::chain(std::move(dims))};
  spec.validate();
  return spec;
}

ModelSpec make_reference_mlp_spec(int context_length, int n_control_bits, std::uint64_t seed) {
  MlpSpec mlp;
  mlp.layer_dims = {context_length + n_control_bits, 400, 200, 200, 1};
  mlp.activation_after = {true, true, false};
  ModelSpec spec{context_length, n_control_bits, seed, mlp};
  spec.validate();
  return spec;
}

ModelSpec make_split_spec(int context_length, int n_control_bits, std::uint64_t seed, int encoder_hidden,
                          int feature_dim, int decoder_hidden) {
  SplitModelSpec split{MlpSpec::chain({context_length, encoder_hidden, feature_dim}),
                       MlpSpec::chain({feature_dim + n_control_bits, decoder_hidden, 1})};
  ModelSpec spec{context_length, n_control_bits, seed, split};
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// Layout and per-MLP passes

MlpLayout::MlpLayout(MlpSpec spec, std::size_t offset) : spec_(std::move(spec)), offset_(offset) {
  std::size_t at = offset;
  for (int k = 0; k < spec_.n_layers(); ++k) {
    const auto in = static_cast<std::size_t>(spec_.layer_dims[static_cast<std::size_t>(k)]);
    const auto out = static_cast<std::size_t>(spec_.layer_dims[static_cast<std::size_t>(k) + 1]);
    weight_off_.push_back(at);
    at += in * out;
    bias_off_.push_back(at);
    at += out;
  }
  count_ = at - offset;
}

namespace {

template <typename Scalar>
using ConstMatMap = Eigen::Map<const MatrixT<Scalar>>;
template <typename Scalar>
using MatMap = Eigen::Map<MatrixT<Scalar>>;
template <typename Scalar>
using ConstRowMap = Eigen::Map<const Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>;
template <typename Scalar>
using RowMap = Eigen::Map<Eigen::Matrix<Scalar, 1, Eigen::Dynamic>>;

template <typename Scalar>
void mlp_forward(const MlpLayout& layout, std::span<const Scalar> params, const MatrixT<Scalar>& input,
                 MlpTape<Scalar>& tape) {
  const auto& spec = layout.spec();
  const int layers = spec.n_layers();
  tape.pre.resize(static_cast<std::size_t>(layers));
  tape.post.resize(static_cast<std::size_t>(layers) + 1);
  tape.post[0] = input;
  const auto slope = static_cast<Scalar>(spec.leaky_slope);
  for (int k = 0; k < layers; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    const int in = spec.layer_dims[ku], out = spec.layer_dims[ku + 1];
    ConstMatMap<Scalar> w(params.data() + layout.weight_offset(k), in, out);
    ConstRowMap<Scalar> b(params.data() + layout.bias_offset(k), out);
    auto& z = tape.pre[ku];
    z.noalias() = tape.post[ku] * w;
    z.rowwise() += b;
    auto& a = tape.post[ku + 1];
    if (k < layers - 1 && spec.activation_after[ku]) {
      a = z.unaryExpr([slope](Scalar v) { return v > Scalar(0) ? v : slope * v; });
    } else {
      a = z;
    }
  }
}

// `d_out` is d(loss)/d(last layer output); on return `d_input` (if given)
// holds d(loss)/d(input).
template <typename Scalar>
void mlp_backward(const MlpLayout& layout, std::span<const Scalar> params, const MlpTape<Scalar>& tape,
                  MatrixT<Scalar> d_out, std::span<Scalar> grad, MatrixT<Scalar>* d_input) {
  const auto& spec = layout.spec();
  const int layers = spec.n_layers();
  const auto slope = static_cast<Scalar>(spec.leaky_slope);
  MatrixT<Scalar> delta = std::move(d_out);  // d(loss)/d(post[k+1])
  for (int k = layers - 1; k >= 0; --k) {
    const auto ku = static_cast<std::size_t>(k);
    const int in = spec.layer_dims[ku], out = spec.layer_dims[ku + 1];
    if (k < layers - 1 && spec.activation_after[ku]) {
      const auto& z = tape.pre[ku];
      delta = delta.binaryExpr(z, [slope](Scalar d, Scalar v) { return v > Scalar(0) ? d : slope * d; });
    }
    MatMap<Scalar> gw(grad.data() + layout.weight_offset(k), in, out);
    RowMap<Scalar> gb(grad.data() + layout.bias_offset(k), out);
    gw.noalias() = tape.post[ku].transpose() * delta;
    gb = delta.colwise().sum();
    if (k > 0 || d_input != nullptr) {
      ConstMatMap<Scalar> w(params.data() + layout.weight_offset(k), in, out);
      MatrixT<Scalar> next = delta * w.transpose();
      if (k == 0) {
        *d_input = std::move(next);
      } else {
        delta = std::move(next);
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Model

template <typename Scalar>
Model<Scalar>::Model(ModelSpec spec, std::vector<Scalar> params)
    : spec_(std::move(spec)), params_(params.begin(), params.end()) {
  spec_.validate();
  std::size_t count = 0;
  if (const auto* mlp = std::get_if<MlpSpec>(&spec_.arch)) {
    trunk_ = MlpLayout(*mlp, 0);
    count = trunk_.end();
  } else {
    const auto& s = std::get<SplitModelSpec>(spec_.arch);
    encoder_ = MlpLayout(s.encoder, 0);
    trunk_ = MlpLayout(s.decoder, encoder_.end());
    count = trunk_.end();
  }
  require(params_.size() == count, "model: parameter buffer has " + std::to_string(params_.size()) +
                                       " entries, spec needs " + std::to_string(count));
}

namespace {

template <typename Scalar>
std::vector<Scalar> initial_params(const ModelSpec& spec) {
  spec.validate();
  std::vector<const MlpSpec*> parts;
  if (const auto* mlp = std::get_if<MlpSpec>(&spec.arch)) {
    parts.push_back(mlp);
  } else {
    const auto& s = std::get<SplitModelSpec>(spec.arch);
    parts.push_back(&s.encoder);
    parts.push_back(&s.decoder);
  }
  std::vector<Scalar> params;
  Rng rng(derive_seed(spec.seed, 0x1417));
  for (const MlpSpec* part : parts) {
    for (int k = 0; k < part->n_layers(); ++k) {
      const auto ku = static_cast<std::size_t>(k);
      const int in = part->layer_dims[ku], out = part->layer_dims[ku + 1];
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      for (int i = 0; i < in * out + out; ++i) params.push_back(static_cast<Scalar>(rng.uniform(-bound, bound)));
    }
  }
  return params;
}

}  // namespace

template <typename Scalar>
Model<Scalar>::Model(ModelSpec spec) : Model(spec, initial_params<Scalar>(spec)) {}

template <typename Scalar>
Scalar Model<Scalar>::forward(std::span<const Scalar> input) const {
  require(input.size() == static_cast<std::size_t>(spec_.input_dim()),
          "forward: input has " + std::to_string(input.size()) + " entries, model expects " +
              std::to_string(spec_.input_dim()));
  Mat x = Eigen::Map<const Mat>(input.data(), 1, spec_.input_dim());
  ModelTape<Scalar> tape;
  Vec logits;
  forward_batch(x, tape, logits);
  return logits(0);
}

template <typename Scalar>
void Model<Scalar>::forward_batch(const Mat& inputs, ModelTape<Scalar>& tape, Vec& logits) const {
  require(inputs.cols() == spec_.input_dim(), "forward_batch: input width " + std::to_string(inputs.cols()) +
                                                  " != l + T = " + std::to_string(spec_.input_dim()));
  const int l = spec_.context_length;
  const int T = spec_.n_control_bits;
  if (!spec_.is_split()) {
    mlp_forward<Scalar>(trunk_, params_, inputs, tape.trunk);
  } else {
    mlp_forward<Scalar>(encoder_, params_, inputs.leftCols(l), tape.encoder);
    const Mat& features = tape.encoder.post.back();
    Mat joined(inputs.rows(), features.cols() + T);
    joined.leftCols(features.cols()) = features;
    joined.rightCols(T) = inputs.rightCols(T);
    mlp_forward<Scalar>(trunk_, params_, joined, tape.trunk);
  }
  logits = tape.trunk.post.back().col(0);
}

template <typename Scalar>
void Model<Scalar>::backward_batch(const ModelTape<Scalar>& tape, const Vec& d_logits, std::span<Scalar> grad) const {
  require(grad.size() == params_.size(), "backward_batch: gradient buffer size mismatch");
  Mat d_out = d_logits;
  if (!spec_.is_split()) {
    mlp_backward<Scalar>(trunk_, params_, tape.trunk, std::move(d_out), grad, nullptr);
    return;
  }
  Mat d_joined;
  mlp_backward<Scalar>(trunk_, params_, tape.trunk, std::move(d_out), grad, &d_joined);
  const auto features = static_cast<Eigen::Index>(std::get<SplitModelSpec>(spec_.arch).feature_dim());
  mlp_backward<Scalar>(encoder_, params_, tape.encoder, d_joined.leftCols(features), grad, nullptr);
}

template <typename Scalar>
typename Model<Scalar>::Mat Model<Scalar>::context_features(const Mat& inputs) const {
  if (!spec_.is_split()) throw InvalidArgument("context_features: model has no context encoder");
  require(inputs.cols() == spec_.input_dim(), "context_features: input width mismatch");
  MlpTape<Scalar> tape;
  mlp_forward<Scalar>(encoder_, params_, inputs.leftCols(spec_.context_length), tape);
  return tape.post.back();
}

template class Model<float>;
template class Model<double>;

// ---------------------------------------------------------------------------
// Losses and helpers

double sigmoid(double logit) {
  return logit >= 0.0 ? 1.0 / (1.0 + std::exp(-logit)) : std::exp(logit) / (1.0 + std::exp(logit));
}

double bce_with_logit(double logit, double label) {
  return std::max(logit, 0.0) - label * logit + std::log1p(std::exp(-std::abs(logit)));
}

template <typename Scalar>
double loss_and_gradient(const Model<Scalar>& model, const MatrixT<Scalar>& inputs, std::span<const Scalar> labels,
                         std::vector<Scalar>& grad) {
  require(inputs.rows() > 0, "loss_and_gradient: empty batch");
  require(labels.size() == static_cast<std::size_t>(inputs.rows()), "loss_and_gradient: one label per row");
  ModelTape<Scalar> tape;
  VectorT<Scalar> logits;
  model.forward_batch(inputs, tape, logits);
  const auto n = static_cast<double>(inputs.rows());
  VectorT<Scalar> d_logits(inputs.rows());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < inputs.rows(); ++i) {
    const double z = static_cast<double>(logits(i));
    const double y = static_cast<double>(labels[static_cast<std::size_t>(i)]);
    loss += bce_with_logit(z, y);
    d_logits(i) = static_cast<Scalar>((sigmoid(z) - y) / n);
  }
  AlignedVector<Scalar> g(model.param_count(), Scalar(0));
  model.backward_batch(tape, d_logits, g);
  grad.assign(g.begin(), g.end());
  return loss / n;
}

template <typename Scalar>
double mean_bce(const Model<Scalar>& model, const MatrixT<Scalar>& inputs, std::span<const Scalar> labels) {
  ModelTape<Scalar> tape;
  VectorT<Scalar> logits;
  model.forward_batch(inputs, tape, logits);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < inputs.rows(); ++i)
    loss += bce_with_logit(static_cast<double>(logits(i)), static_cast<double>(labels[static_cast<std::size_t>(i)]));
  return loss / static_cast<double>(inputs.rows());
}

template <typename Scalar>
void weight_decay_gradient(std::span<const Scalar> params, double weight_decay, std::span<Scalar> out) {
  require(out.size() == params.size(), "weight_decay_gradient: size mismatch");
  const auto wd = static_cast<Scalar>(weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) out[i] = wd * params[i];
}

template double loss_and_gradient<float>(const Model<float>&, const MatrixT<float>&, std::span<const float>,
                                         std::vector<float>&);
template double loss_and_gradient<double>(const Model<double>&, const MatrixT<double>&, std::span<const double>,
                                          std::vector<double>&);
template double mean_bce<float>(const Model<float>&, const MatrixT<float>&, std::span<const float>);
template double mean_bce<double>(const Model<double>&, const MatrixT<double>&, std::span<const double>);
template void weight_decay_gradient<float>(std::span<const float>, double, std::span<float>);
template void weight_decay_gradient<double>(std::span<const double>, double, std::span<double>);

template <typename Scalar>
MatrixT<Scalar> build_inputs(const parity::Dataset& data, int context_length, std::size_t first, std::size_t count) {
  require(first + count <= data.size(), "build_inputs: range outside dataset");
  const int width = context_length + data.n_control_bits();
  MatrixT<Scalar> x(static_cast<Eigen::Index>(count), width);
  for (std::size_t r = 0; r < count; ++r)
    data.fill_input<Scalar>(first + r, context_length,
                            std::span<Scalar>(x.data() + r * static_cast<std::size_t>(width),
                                              static_cast<std::size_t>(width)));
  return x;
}

template MatrixT<float> build_inputs<float>(const parity::Dataset&, int, std::size_t, std::size_t);
template MatrixT<double> build_inputs<double>(const parity::Dataset&, int, std::size_t, std::size_t);

namespace {
void require_compatible(const Model<double>& model, const parity::Dataset& data) {
  require(model.spec().n_control_bits == data.n_control_bits(), "model/dataset control-bit count mismatch");
}
}  // namespace

std::vector<double> predict(const Model<double>& model, const parity::Dataset& data, std::size_t chunk) {
  require_compatible(model, data);
  std::vector<double> out;
  out.reserve(data.size());
  ModelTape<double> tape;
  VectorT<double> logits;
  for (std::size_t first = 0; first < data.size(); first += chunk) {
    const std::size_t count = std::min(chunk, data.size() - first);
    model.forward_batch(build_inputs<double>(data, model.spec().context_length, first, count), tape, logits);
    for (Eigen::Index i = 0; i < logits.size(); ++i) out.push_back(sigmoid(logits(i)));
  }
  return out;
}

double evaluate_ce(const Model<double>& model, const parity::Dataset& data, std::size_t chunk) {
  require_compatible(model, data);
  require(!data.empty(), "evaluate_ce: empty dataset");
  double total = 0.0;
  ModelTape<double> tape;
  VectorT<double> logits;
  for (std::size_t first = 0; first < data.size(); first += chunk) {
    const std::size_t count = std::min(chunk, data.size() - first);
    model.forward_batch(build_inputs<double>(data, model.spec().context_length, first, count), tape, logits);
    for (Eigen::Index i = 0; i < logits.size(); ++i)
      total += bce_with_logit(logits(i), data.label(first + static_cast<std::size_t>(i)));
  }
  return total / static_cast<double>(data.size());
}

Matrix extract_context_features(const Model<double>& model, const parity::Dataset& data, std::size_t n) {
  if (!model.spec().is_split()) throw InvalidArgument("extract_context_features: model is not a split model");
  require_compatible(model, data);
  const std::size_t count = n == 0 ? data.size() : std::min(n, data.size());
  return model.context_features(build_inputs<double>(data, model.spec().context_length, 0, count));
}

}  // namespace ctxscale::nn
