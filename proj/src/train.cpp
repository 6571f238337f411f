#include "ctxscale/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ctxscale/error.hpp"
#include "ctxscale/rng.hpp"

namespace ctxscale::nn {

void TrainConfig::validate() const {
  require(learning_rate > 0.0, "train config: learning_rate must be positive");
  require(weight_decay >= 0.0, "train config: weight_decay must be non-negative");
  require(batch_size >= 1, "train config: batch_size must be >= 1");
  require(max_epochs >= 1, "train config: max_epochs must be >= 1");
  require(patience >= 1 && patience <= max_epochs, "train config: patience must lie in [1, max_epochs]");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
          "train config: Adam betas must lie in [0, 1)");
  require(adam_eps > 0.0, "train config: adam_eps must be positive");
}

template <typename Scalar>
Adam<Scalar>::Adam(std::size_t n, const TrainConfig& config)
    : lr_(config.learning_rate),
      wd_(config.weight_decay),
      b1_(config.adam_beta1),
      b2_(config.adam_beta2),
      eps_(config.adam_eps),
      m_(n, Scalar(0)),
      v_(n, Scalar(0)) {}

template <typename Scalar>
void Adam<Scalar>::step(std::span<Scalar> params, std::span<const Scalar> grad) {
  require(params.size() == m_.size() && grad.size() == m_.size(), "adam: size mismatch");
  ++t_;
  const auto b1 = static_cast<Scalar>(b1_), b2 = static_cast<Scalar>(b2_);
  const auto c1 = static_cast<Scalar>(1.0 / (1.0 - std::pow(b1_, static_cast<double>(t_))));
  const auto c2 = static_cast<Scalar>(1.0 / (1.0 - std::pow(b2_, static_cast<double>(t_))));
  const auto lr = static_cast<Scalar>(lr_), decay = static_cast<Scalar>(1.0 - lr_ * wd_);
  const auto eps = static_cast<Scalar>(eps_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Scalar g = grad[i];
    m_[i] = b1 * m_[i] + (Scalar(1) - b1) * g;
    v_[i] = b2 * v_[i] + (Scalar(1) - b2) * g * g;
    params[i] *= decay;
    params[i] -= lr * (m_[i] * c1) / (std::sqrt(v_[i] * c2) + eps);
  }
}

template class Adam<float>;
template class Adam<double>;

namespace {

template <typename Scalar>
double validation_loss(const Model<Scalar>& model, const parity::Dataset& data) {
  constexpr std::size_t kChunk = 4096;
  const int l = model.spec().context_length;
  double total = 0.0;
  ModelTape<Scalar> tape;
  VectorT<Scalar> logits;
  for (std::size_t first = 0; first < data.size(); first += kChunk) {
    const std::size_t count = std::min(kChunk, data.size() - first);
    model.forward_batch(build_inputs<Scalar>(data, l, first, count), tape, logits);
    for (Eigen::Index i = 0; i < logits.size(); ++i)
      total += bce_with_logit(static_cast<double>(logits(i)), data.label(first + static_cast<std::size_t>(i)));
  }
  return total / static_cast<double>(data.size());
}

template <typename Scalar>
TrainResult train_impl(const ModelSpec& spec, const TrainConfig& config, const parity::Dataset& train_data,
                       const parity::Dataset& val_data, const EpochCallback& on_epoch) {
  // Initialise in double so both precisions start from the same draw.
  Model<Scalar> model = Model<double>(spec).template cast<Scalar>();
  const int l = spec.context_length;
  const std::size_t n = train_data.size();
  const int width = spec.input_dim();

  Adam<Scalar> adam(model.param_count(), config);
  AlignedVector<Scalar> grad(model.param_count());
  std::vector<Scalar> best = std::vector<Scalar>(model.params().begin(), model.params().end());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainHistory history;
  double best_val = std::numeric_limits<double>::infinity();
  MatrixT<Scalar> batch;
  std::vector<Scalar> labels;
  ModelTape<Scalar> tape;
  VectorT<Scalar> logits, d_logits;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    Rng shuffle(derive_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double epoch_loss = 0.0;
    for (std::size_t first = 0; first < n; first += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t count = std::min(static_cast<std::size_t>(config.batch_size), n - first);
      batch.resize(static_cast<Eigen::Index>(count), width);
      labels.resize(count);
      for (std::size_t r = 0; r < count; ++r) {
        const std::size_t s = order[first + r];
        train_data.fill_input<Scalar>(
            s, l, std::span<Scalar>(batch.data() + r * static_cast<std::size_t>(width), static_cast<std::size_t>(width)));
        labels[r] = static_cast<Scalar>(train_data.label(s));
      }
      model.forward_batch(batch, tape, logits);
      d_logits.resize(logits.size());
      double loss = 0.0;
      for (Eigen::Index i = 0; i < logits.size(); ++i) {
        const double z = static_cast<double>(logits(i));
        const double y = static_cast<double>(labels[static_cast<std::size_t>(i)]);
        loss += bce_with_logit(z, y);
        d_logits(i) = static_cast<Scalar>((sigmoid(z) - y) / static_cast<double>(count));
      }
      if (!std::isfinite(loss))
        throw NumericalError("train: non-finite loss at epoch " + std::to_string(epoch) +
                             " (check learning rate and input data)");
      epoch_loss += loss;
      model.backward_batch(tape, d_logits, grad);
      adam.step(model.params(), grad);
    }

    const double train_loss = epoch_loss / static_cast<double>(n);
    const double val_loss = validation_loss(model, val_data);
    if (!std::isfinite(val_loss))
      throw NumericalError("train: non-finite validation loss at epoch " + std::to_string(epoch));
    history.train_loss.push_back(train_loss);
    history.val_loss.push_back(val_loss);
    if (val_loss < best_val) {
      best_val = val_loss;
      history.best_epoch = epoch;
      std::copy(model.params().begin(), model.params().end(), best.begin());
    }
    if (on_epoch) on_epoch(epoch, train_loss, val_loss);
    if (epoch - history.best_epoch >= config.patience) {
      history.stopped_early = true;
      break;
    }
  }

  std::vector<double> best_params(best.begin(), best.end());
  return {Model<double>(spec, std::move(best_params)), std::move(history)};
}

}  // namespace

TrainResult train(const ModelSpec& spec, const TrainConfig& config, const parity::Dataset& train_data,
                  const parity::Dataset& val_data, const EpochCallback& on_epoch) {
  spec.validate();
  config.validate();
  require(!train_data.empty() && !val_data.empty(), "train: empty dataset");
  require(train_data.n_control_bits() == spec.n_control_bits && val_data.n_control_bits() == spec.n_control_bits,
          "train: dataset control bits do not match the model");
  require(train_data.n_context_bits() == val_data.n_context_bits(), "train: train/val context widths differ");
  require(spec.context_length <= train_data.n_context_bits(), "train: context length exceeds the dataset's context");
  if (config.precision == Precision::F32) return train_impl<float>(spec, config, train_data, val_data, on_epoch);
  return train_impl<double>(spec, config, train_data, val_data, on_epoch);
}

}  // namespace ctxscale::nn
