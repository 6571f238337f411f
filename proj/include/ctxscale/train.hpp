#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ctxscale/nn.hpp"
#include "ctxscale/parity.hpp"

namespace ctxscale::nn {

enum class Precision { F32, F64 };

struct TrainConfig {
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  int batch_size = 250;
  int max_epochs = 200;
  int patience = 25;  // epochs without validation improvement before stopping
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;  // batch order
  Precision precision = Precision::F32;

  void validate() const;
};

struct TrainHistory {
  std::vector<double> train_loss;  // nats, mean over the epoch's batches
  std::vector<double> val_loss;    // nats, after each epoch
  int best_epoch = -1;             // 0-based
  bool stopped_early = false;

  int epochs() const { return static_cast<int>(val_loss.size()); }
  double best_val_loss() const { return val_loss.at(static_cast<std::size_t>(best_epoch)); }
  bool operator==(const TrainHistory&) const = default;
};

struct TrainResult {
  Model<double> model;  // parameters from the best validation epoch
  TrainHistory history;
};

/// Adam with decoupled weight decay: p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p).
template <typename Scalar>
class Adam {
 public:
  Adam(std::size_t n, const TrainConfig& config);
  void step(std::span<Scalar> params, std::span<const Scalar> grad);
  long steps() const { return t_; }

 private:
  double lr_, wd_, b1_, b2_, eps_;
  long t_ = 0;
  std::vector<Scalar> m_, v_;
};

extern template class Adam<float>;
extern template class Adam<double>;

using EpochCallback = std::function<void(int epoch, double train_loss, double val_loss)>;

/// Mini-batch BCE training with early stopping on validation loss. Fully
/// deterministic given (spec.seed, config.seed, data). Throws NumericalError
/// on a non-finite loss.
TrainResult train(const ModelSpec& spec, const TrainConfig& config, const parity::Dataset& train_data,
                  const parity::Dataset& val_data, const EpochCallback& on_epoch = {});

}  // namespace ctxscale::nn
