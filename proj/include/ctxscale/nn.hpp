#pragma once

// Small feed-forward networks over parity inputs. Parameters live in one
// flat buffer per model so optimiser state, checkpoints and finite-difference
// checks can treat them uniformly.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "ctxscale/linalg.hpp"
#include "ctxscale/parity.hpp"

namespace ctxscale::nn {

/// Affine layers with optional leaky-ReLU after each junction.
struct MlpSpec {
  std::vector<int> layer_dims;         // input, hidden..., output
  std::vector<bool> activation_after;  // one flag per linear layer except the last
  double leaky_slope = 0.01;

  int n_layers() const { return static_cast<int>(layer_dims.size()) - 1; }
  int input_dim() const { return layer_dims.front(); }
  int output_dim() const { return layer_dims.back(); }
  std::size_t param_count() const;
  void validate() const;

  /// Leaky activation after every hidden layer.
  static MlpSpec chain(std::vector<int> dims);
};

/// Context encoder feeding a decoder that also sees the control bits:
/// logit = decoder([encoder(context[0:l]), control]).
struct SplitModelSpec {
  MlpSpec encoder;
  MlpSpec decoder;

  int feature_dim() const { return encoder.output_dim(); }
};

struct ModelSpec {
  int context_length = 0;  // visible context bits l
  int n_control_bits = 0;  // T
  std::uint64_t seed = 0;  // initialisation
  std::variant<MlpSpec, SplitModelSpec> arch;

  bool is_split() const { return std::holds_alternative<SplitModelSpec>(arch); }
  int input_dim() const { return context_length + n_control_bits; }
  void validate() const;
};

/// Plain MLP; `activation_after` defaults to one leaky junction per hidden layer.
ModelSpec make_mlp_spec(int context_length, int n_control_bits, std::vector<int> hidden, std::uint64_t seed);

/// in -> 400 -> 200 -> 200 -> 1, leaky after the first two layers only.
ModelSpec make_reference_mlp_spec(int context_length, int n_control_bits, std::uint64_t seed);

/// Encoder l -> encoder_hidden -> feature_dim; decoder (feature_dim + T) -> decoder_hidden -> 1.
ModelSpec make_split_spec(int context_length, int n_control_bits, std::uint64_t seed, int encoder_hidden = 400,
                          int feature_dim = 80, int decoder_hidden = 200);

template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
/// Buffers touched by vectorised kernels keep a fixed alignment so that float
/// results do not depend on where the allocator happened to place them.
template <typename Scalar>
using AlignedVector = std::vector<Scalar, Eigen::aligned_allocator<Scalar>>;

/// Offsets of each layer's weights (in x out, row-major) and bias inside a
/// flat parameter buffer.
class MlpLayout {
 public:
  MlpLayout() = default;
  MlpLayout(MlpSpec spec, std::size_t offset);

  const MlpSpec& spec() const { return spec_; }
  std::size_t begin() const { return offset_; }
  std::size_t end() const { return offset_ + count_; }
  std::size_t weight_offset(int layer) const { return weight_off_[static_cast<std::size_t>(layer)]; }
  std::size_t bias_offset(int layer) const { return bias_off_[static_cast<std::size_t>(layer)]; }

 private:
  MlpSpec spec_;
  std::size_t offset_ = 0;
  std::size_t count_ = 0;
  std::vector<std::size_t> weight_off_;
  std::vector<std::size_t> bias_off_;
};

/// Per-layer activations retained for the backward pass.
template <typename Scalar>
struct MlpTape {
  std::vector<MatrixT<Scalar>> pre;   // affine outputs per layer
  std::vector<MatrixT<Scalar>> post;  // post[0] = input, post[k+1] = layer k output
};

template <typename Scalar>
struct ModelTape {
  MlpTape<Scalar> trunk;  // plain MLP, or the decoder of a split model
  MlpTape<Scalar> encoder;
};

template <typename Scalar>
class Model {
 public:
  using Mat = MatrixT<Scalar>;
  using Vec = VectorT<Scalar>;

  /// Fan-in scaled uniform initialisation, U(-1/sqrt(fan_in), 1/sqrt(fan_in)),
  /// drawn from `spec.seed`.
  explicit Model(ModelSpec spec);
  Model(ModelSpec spec, std::vector<Scalar> params);

  const ModelSpec& spec() const { return spec_; }
  std::size_t param_count() const { return params_.size(); }
  std::span<Scalar> params() { return params_; }
  std::span<const Scalar> params() const { return params_; }

  /// Logit for a single input vector of length l + T.
  Scalar forward(std::span<const Scalar> input) const;

  /// Logits for each row of `inputs` (n x (l + T)); fills `tape` for backward.
  void forward_batch(const Mat& inputs, ModelTape<Scalar>& tape, Vec& logits) const;
  /// Accumulates (overwrites) d(loss)/d(params) into `grad` given d(loss)/d(logits).
  void backward_batch(const ModelTape<Scalar>& tape, const Vec& d_logits, std::span<Scalar> grad) const;

  /// Encoder outputs (n x feature_dim). Throws InvalidArgument for plain MLPs.
  Mat context_features(const Mat& inputs) const;

  template <typename Other>
  Model<Other> cast() const {
    std::vector<Other> p(params_.begin(), params_.end());
    return Model<Other>(spec_, std::move(p));
  }

 private:
  ModelSpec spec_;
  AlignedVector<Scalar> params_;
  MlpLayout trunk_;    // plain MLP or decoder
  MlpLayout encoder_;  // split only
};

extern template class Model<float>;
extern template class Model<double>;

/// Mean binary cross-entropy with logits (nats) and its gradient w.r.t. every
/// parameter. `grad` is resized to param_count().
template <typename Scalar>
double loss_and_gradient(const Model<Scalar>& model, const MatrixT<Scalar>& inputs, std::span<const Scalar> labels,
                         std::vector<Scalar>& grad);

/// Mean BCE without gradients.
template <typename Scalar>
double mean_bce(const Model<Scalar>& model, const MatrixT<Scalar>& inputs, std::span<const Scalar> labels);

/// d/dp of (weight_decay / 2) * ||p||^2.
template <typename Scalar>
void weight_decay_gradient(std::span<const Scalar> params, double weight_decay, std::span<Scalar> out);

/// Stable log(1 + exp(z)) - y z.
double bce_with_logit(double logit, double label);
double sigmoid(double logit);

/// Model inputs for samples [first, first + count) of `data`.
template <typename Scalar>
MatrixT<Scalar> build_inputs(const parity::Dataset& data, int context_length, std::size_t first, std::size_t count);

/// Probability of label 1 for every sample.
std::vector<double> predict(const Model<double>& model, const parity::Dataset& data, std::size_t chunk = 4096);

/// Mean validation BCE over a dataset.
double evaluate_ce(const Model<double>& model, const parity::Dataset& data, std::size_t chunk = 4096);

/// Encoder outputs for the first `n` samples (all when n == 0).
Matrix extract_context_features(const Model<double>& model, const parity::Dataset& data, std::size_t n = 0);

}  // namespace ctxscale::nn
