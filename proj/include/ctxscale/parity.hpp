#pragma once

// Position-weighted multitask sparse parity: one-hot control bits select a
// subtask, and the label is the XOR of two context bits of that subtask.
// Context bit indices are 1-based throughout.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ctxscale::parity {

struct TaskSpec {
  int bit_hi = 2;
  int bit_lo = 1;
  double frequency = 1.0;

  /// Orders the two bits so that bit_hi > bit_lo.
  static TaskSpec make(int bit_a, int bit_b, double frequency = 1.0);
};

struct MaskPolicy {
  enum class Kind { None, RandomSuffix };
  Kind kind = Kind::None;
  /// RandomSuffix: with probability `masked_fraction` a sample keeps only its
  /// first V context bits, V uniform in [min_visible, max_visible]; the rest
  /// are set to 0.5.
  int min_visible = 0;
  int max_visible = 0;
  double masked_fraction = 0.5;
};

struct ParityConfig {
  std::vector<TaskSpec> tasks;
  int n_context_bits = 0;
  MaskPolicy mask;
  std::uint64_t seed = 0;

  int n_control_bits() const { return static_cast<int>(tasks.size()); }
  int max_bit_hi() const;
  double total_frequency() const;
  /// Throws InvalidArgument on any broken invariant.
  void validate() const;
};

/// The 50 canonical tasks (equal frequency, L = 522, T = 50, no masking).
ParityConfig canonical_task_set(std::uint64_t seed = 0);

/// A single sample in materialised form.
struct Sample {
  std::vector<double> control;  // one-hot, length T
  std::vector<double> context;  // length L, 0/1, 0.5 where masked
  int label = 0;
  int active_task = 0;  // 0-based index into ParityConfig::tasks
  int n_visible = 0;    // context bits left unmasked
};

/// Columnar sample store with bit-packed context.
class Dataset {
 public:
  Dataset() = default;
  Dataset(int n_control_bits, int n_context_bits);

  std::size_t size() const { return task_.size(); }
  bool empty() const { return task_.empty(); }
  int n_control_bits() const { return n_control_bits_; }
  int n_context_bits() const { return n_context_bits_; }
  std::size_t words_per_sample() const { return words_; }

  int task(std::size_t i) const { return task_[i]; }
  int label(std::size_t i) const { return label_[i]; }
  int n_visible(std::size_t i) const { return n_visible_[i]; }
  /// Generator bit (before masking), 1-based position.
  int bit(std::size_t i, int position) const;
  bool masked(std::size_t i, int position) const { return position > n_visible_[i]; }
  /// Model-facing context value at a 1-based position: 0, 1 or 0.5.
  double context_value(std::size_t i, int position) const;
  std::span<const std::uint64_t> packed_bits(std::size_t i) const;

  void push_back(int task, std::span<const std::uint64_t> packed, int n_visible, int label);
  void reserve(std::size_t n);

  /// Writes [context_1..context_l, control_1..control_T] into `out` (length l + T).
  template <typename Scalar>
  void fill_input(std::size_t i, int l, std::span<Scalar> out) const;

  Sample sample(std::size_t i) const;

  /// Hash and equality over the full input vector (control, context, mask).
  std::uint64_t input_hash(std::size_t i) const;
  bool same_input(std::size_t i, const Dataset& other, std::size_t j) const;

  bool operator==(const Dataset&) const = default;

 private:
  int n_control_bits_ = 0;
  int n_context_bits_ = 0;
  std::size_t words_ = 0;
  std::vector<std::uint16_t> task_;
  std::vector<std::uint16_t> n_visible_;
  std::vector<std::uint8_t> label_;
  std::vector<std::uint64_t> bits_;
};

struct GenOptions {
  bool dedup = false;
};

/// Number of tasks whose both bits lie inside the first `l` context bits.
int solvable_tasks(const ParityConfig& config, int l);

/// i.i.d. samples: task drawn proportional to frequency, context bits fair
/// coins, label computed before masking. Deterministic in (config, n, seed).
/// With `dedup`, repeated full input vectors are redrawn; throws
/// InvalidArgument when n exceeds the number of distinct inputs.
Dataset gen_dataset(const ParityConfig& config, std::size_t n, std::uint64_t seed, GenOptions options = {});

struct Split {
  Dataset train;
  Dataset val;
};

/// Train/validation sets with no shared full input vector.
Split split_disjoint(const ParityConfig& config, std::size_t n_train, std::size_t n_val, std::uint64_t seed);

/// log2 of the number of distinct full input vectors the config can emit.
double log2_input_space(const ParityConfig& config);

/// P(label = 1 | what a context-l model sees): 0 or 1 when the active task is
/// visible and unmasked, otherwise 0.5.
double bayes_posterior(const Sample& sample, const ParityConfig& config, int l);
double bayes_posterior(const Dataset& data, std::size_t i, const ParityConfig& config, int l);

/// Minimum achievable expected binary cross-entropy (nats) at context length l:
/// frequency-weighted probability that the active task is unsolvable, times ln 2.
double bayes_risk(const ParityConfig& config, int l);

struct LossDecomposition {
  double total_ce = 0.0;      // mean BCE against the sampled labels
  double posterior_ce = 0.0;  // mean BCE against the exact Bayes posterior
  double bayes_risk = 0.0;    // mean entropy of the exact posterior
  double approx_loss = 0.0;   // mean KL(posterior || model)
  std::size_t clamped = 0;    // predictions clamped into [1e-12, 1 - 1e-12]
};

/// Splits the model's cross-entropy into Bayes risk plus approximation loss.
/// posterior_ce == bayes_risk + approx_loss up to rounding.
LossDecomposition decompose_loss(std::span<const double> predictions, const Dataset& data,
                                 const ParityConfig& config, int l);

}  // namespace ctxscale::parity
