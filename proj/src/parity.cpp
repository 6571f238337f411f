#include "ctxscale/parity.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <cmath>
#include <numbers>
#include <set>
#include <string>
#include <unordered_set>

#include "ctxscale/error.hpp"
#include "ctxscale/rng.hpp"

namespace ctxscale::parity {

namespace {

constexpr int kCanonicalContextBits = 522;

// (bit_hi, bit_lo); chosen so that the visible tasks' XORs stay independent
// for every context length >= 23.
constexpr std::pair<int, int> kCanonicalPairs[] = {
    {21, 20},  {21, 1},   {21, 2},   {22, 3},   {22, 4},   {22, 5},   {23, 6},  {23, 7},  {24, 8},   {24, 9},
    {25, 10},  {25, 11},  {26, 12},  {26, 13},  {27, 14},  {27, 15},  {28, 16}, {29, 17}, {30, 18},  {30, 19},
    {31, 20},  {32, 1},   {33, 3},   {34, 6},   {35, 8},   {36, 10},  {37, 12}, {39, 14}, {40, 16},  {42, 38},
    {43, 41},  {45, 44},  {47, 46},  {50, 48},  {52, 51},  {55, 54},  {58, 57}, {62, 61}, {66, 65},  {71, 70},
    {77, 76},  {84, 83},  {93, 92},  {103, 102}, {118, 87}, {137, 25}, {165, 20}, {209, 34}, {293, 128}, {522, 353},
};

constexpr double kLn2 = std::numbers::ln2;

bool equal_frequencies(const ParityConfig& config) {
  return std::all_of(config.tasks.begin(), config.tasks.end(),
                     [&](const TaskSpec& t) { return t.frequency == config.tasks.front().frequency; });
}

// Set of distinct visible-prefix lengths the mask policy can produce.
std::set<int> visible_lengths(const ParityConfig& config) {
  const int L = config.n_context_bits;
  std::set<int> out;
  if (config.mask.kind == MaskPolicy::Kind::None) {
    out.insert(L);
    return out;
  }
  if (config.mask.masked_fraction < 1.0) out.insert(L);
  if (config.mask.masked_fraction > 0.0)
    for (int v = config.mask.min_visible; v <= config.mask.max_visible; ++v) out.insert(std::min(v, L));
  return out;
}

// Exact model-facing key: task, visible length and the visible bits.
std::string input_key(const Dataset& d, std::size_t i) {
  const auto words = d.packed_bits(i);
  const int visible = std::min(d.n_visible(i), d.n_context_bits());
  std::string key;
  key.resize(4 + words.size() * 8);
  const auto task = static_cast<std::uint16_t>(d.task(i));
  const auto vis = static_cast<std::uint16_t>(visible);
  std::memcpy(key.data(), &task, 2);
  std::memcpy(key.data() + 2, &vis, 2);
  for (std::size_t w = 0; w < words.size(); ++w) {
    std::uint64_t word = words[w];
    const int first = static_cast<int>(w * 64);
    if (visible <= first) {
      word = 0;
    } else if (visible < first + 64) {
      word &= (std::uint64_t{1} << (visible - first)) - 1;
    }
    std::memcpy(key.data() + 4 + w * 8, &word, 8);
  }
  return key;
}

class SampleDrawer {
 public:
  SampleDrawer(const ParityConfig& config, std::uint64_t seed)
      : config_(config), rng_(seed), uniform_tasks_(equal_frequencies(config)) {
    double acc = 0.0;
    for (const auto& t : config.tasks) cumulative_.push_back(acc += t.frequency);
    words_ = (static_cast<std::size_t>(config.n_context_bits) + 63) / 64;
    scratch_.resize(words_);
  }

  void draw_into(Dataset& out) {
    const int T = config_.n_control_bits();
    int task;
    if (uniform_tasks_) {
      task = static_cast<int>(rng_.below(static_cast<std::uint64_t>(T)));
    } else {
      const double u = rng_.uniform() * cumulative_.back();
      task = static_cast<int>(std::upper_bound(cumulative_.begin(), cumulative_.end(), u) - cumulative_.begin());
      task = std::min(task, T - 1);
    }
    const int L = config_.n_context_bits;
    for (std::size_t w = 0; w < words_; ++w) scratch_[w] = rng_.next_u64();
    const int tail = L % 64;
    if (tail != 0) scratch_.back() &= (std::uint64_t{1} << tail) - 1;

    const auto& spec = config_.tasks[static_cast<std::size_t>(task)];
    const int label = bit_of(spec.bit_hi) ^ bit_of(spec.bit_lo);

    int visible = L;
    if (config_.mask.kind == MaskPolicy::Kind::RandomSuffix && rng_.uniform() < config_.mask.masked_fraction) {
      const auto span = static_cast<std::uint64_t>(config_.mask.max_visible - config_.mask.min_visible + 1);
      visible = std::min(L, config_.mask.min_visible + static_cast<int>(rng_.below(span)));
    }
    out.push_back(task, scratch_, visible, label);
  }

 private:
  int bit_of(int position) const {
    const auto p = static_cast<std::size_t>(position - 1);
    return static_cast<int>((scratch_[p / 64] >> (p % 64)) & 1U);
  }

  const ParityConfig& config_;
  Rng rng_;
  bool uniform_tasks_;
  std::vector<double> cumulative_;
  std::size_t words_ = 0;
  std::vector<std::uint64_t> scratch_;
};

void require_capacity(const ParityConfig& config, std::size_t n, const char* what) {
  if (n == 0) return;
  const double space = log2_input_space(config);
  if (std::log2(static_cast<double>(n)) > space + 1e-9)
    throw InvalidArgument(std::string(what) + ": requested " + std::to_string(n) +
                          " distinct samples but the input space holds only 2^" + std::to_string(space));
}

}  // namespace

TaskSpec TaskSpec::make(int bit_a, int bit_b, double frequency) {
  return {std::max(bit_a, bit_b), std::min(bit_a, bit_b), frequency};
}

int ParityConfig::max_bit_hi() const {
  int m = 0;
  for (const auto& t : tasks) m = std::max(m, t.bit_hi);
  return m;
}

double ParityConfig::total_frequency() const {
  double s = 0.0;
  for (const auto& t : tasks) s += t.frequency;
  return s;
}

void ParityConfig::validate() const {
  require(!tasks.empty(), "parity config: no tasks");
  require(tasks.size() <= 65535, "parity config: too many tasks");
  require(n_context_bits >= 1 && n_context_bits <= 65535, "parity config: n_context_bits out of range");
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& t = tasks[i];
    const std::string where = "parity config: task " + std::to_string(i);
    require(t.bit_lo >= 1, where + " has bit index < 1");
    require(t.bit_hi > t.bit_lo, where + " needs bit_hi > bit_lo");
    require(t.bit_hi <= n_context_bits, where + " uses a bit beyond n_context_bits");
    require(t.frequency > 0.0 && std::isfinite(t.frequency), where + " needs a positive frequency");
  }
  if (mask.kind == MaskPolicy::Kind::RandomSuffix) {
    require(mask.min_visible >= 0 && mask.min_visible <= mask.max_visible, "parity config: bad mask visible range");
    require(mask.masked_fraction >= 0.0 && mask.masked_fraction <= 1.0, "parity config: masked_fraction outside [0,1]");
  }
}

ParityConfig canonical_task_set(std::uint64_t seed) {
  ParityConfig config;
  config.n_context_bits = kCanonicalContextBits;
  config.seed = seed;
  for (const auto& [hi, lo] : kCanonicalPairs) config.tasks.push_back(TaskSpec::make(hi, lo));
  return config;
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(int n_control_bits, int n_context_bits)
    : n_control_bits_(n_control_bits),
      n_context_bits_(n_context_bits),
      words_((static_cast<std::size_t>(n_context_bits) + 63) / 64) {}

int Dataset::bit(std::size_t i, int position) const {
  const auto p = static_cast<std::size_t>(position - 1);
  return static_cast<int>((bits_[i * words_ + p / 64] >> (p % 64)) & 1U);
}

double Dataset::context_value(std::size_t i, int position) const {
  return masked(i, position) ? 0.5 : static_cast<double>(bit(i, position));
}

std::span<const std::uint64_t> Dataset::packed_bits(std::size_t i) const {
  return {bits_.data() + i * words_, words_};
}

void Dataset::push_back(int task, std::span<const std::uint64_t> packed, int n_visible, int label) {
  task_.push_back(static_cast<std::uint16_t>(task));
  n_visible_.push_back(static_cast<std::uint16_t>(std::min(n_visible, n_context_bits_)));
  label_.push_back(static_cast<std::uint8_t>(label));
  bits_.insert(bits_.end(), packed.begin(), packed.end());
}

void Dataset::reserve(std::size_t n) {
  task_.reserve(n);
  n_visible_.reserve(n);
  label_.reserve(n);
  bits_.reserve(n * words_);
}

template <typename Scalar>
void Dataset::fill_input(std::size_t i, int l, std::span<Scalar> out) const {
  const int visible = std::min(l, n_context_bits_);
  const auto words = packed_bits(i);
  const int limit = n_visible_[i];
  for (int p = 0; p < visible; ++p) {
    out[static_cast<std::size_t>(p)] =
        p < limit ? static_cast<Scalar>((words[static_cast<std::size_t>(p) / 64] >> (p % 64)) & 1U) : Scalar(0.5);
  }
  for (int p = visible; p < l; ++p) out[static_cast<std::size_t>(p)] = Scalar(0.5);
  for (int t = 0; t < n_control_bits_; ++t) out[static_cast<std::size_t>(l + t)] = Scalar(0);
  out[static_cast<std::size_t>(l + task_[i])] = Scalar(1);
}

template void Dataset::fill_input<float>(std::size_t, int, std::span<float>) const;
template void Dataset::fill_input<double>(std::size_t, int, std::span<double>) const;

Sample Dataset::sample(std::size_t i) const {
  Sample s;
  s.control.assign(static_cast<std::size_t>(n_control_bits_), 0.0);
  s.control[task_[i]] = 1.0;
  s.context.resize(static_cast<std::size_t>(n_context_bits_));
  for (int p = 1; p <= n_context_bits_; ++p) s.context[static_cast<std::size_t>(p - 1)] = context_value(i, p);
  s.label = label_[i];
  s.active_task = task_[i];
  s.n_visible = n_visible_[i];
  return s;
}

std::uint64_t Dataset::input_hash(std::size_t i) const {
  const std::string key = input_key(*this, i);
  return std::hash<std::string>{}(key);
}

bool Dataset::same_input(std::size_t i, const Dataset& other, std::size_t j) const {
  return input_key(*this, i) == input_key(other, j);
}

// ---------------------------------------------------------------------------
// Generation

int solvable_tasks(const ParityConfig& config, int l) {
  return static_cast<int>(
      std::count_if(config.tasks.begin(), config.tasks.end(), [&](const TaskSpec& t) { return t.bit_hi <= l; }));
}

double log2_input_space(const ParityConfig& config) {
  // log2( T * sum_V 2^V ), accumulated relative to the largest V.
  const auto lengths = visible_lengths(config);
  const int top = *lengths.rbegin();
  double rel = 0.0;
  for (int v : lengths) rel += std::exp2(static_cast<double>(v - top));
  return std::log2(static_cast<double>(config.n_control_bits())) + top + std::log2(rel);
}

Dataset gen_dataset(const ParityConfig& config, std::size_t n, std::uint64_t seed, GenOptions options) {
  config.validate();
  require(n >= 1, "gen_dataset: n must be >= 1");
  if (options.dedup) require_capacity(config, n, "gen_dataset");

  Dataset out(config.n_control_bits(), config.n_context_bits);
  out.reserve(n);
  SampleDrawer drawer(config, seed);
  if (!options.dedup) {
    for (std::size_t i = 0; i < n; ++i) drawer.draw_into(out);
    return out;
  }
  std::unordered_set<std::string> seen;
  seen.reserve(n);
  Dataset candidate(config.n_control_bits(), config.n_context_bits);
  while (out.size() < n) {
    candidate = Dataset(config.n_control_bits(), config.n_context_bits);
    drawer.draw_into(candidate);
    if (seen.insert(input_key(candidate, 0)).second)
      out.push_back(candidate.task(0), candidate.packed_bits(0), candidate.n_visible(0), candidate.label(0));
  }
  return out;
}

Split split_disjoint(const ParityConfig& config, std::size_t n_train, std::size_t n_val, std::uint64_t seed) {
  config.validate();
  require(n_train >= 1 && n_val >= 1, "split_disjoint: both splits need at least one sample");
  require_capacity(config, n_train + n_val, "split_disjoint");

  Split split;
  split.train = gen_dataset(config, n_train, derive_seed(seed, 1));

  std::unordered_set<std::string> train_keys;
  train_keys.reserve(n_train);
  for (std::size_t i = 0; i < split.train.size(); ++i) train_keys.insert(input_key(split.train, i));

  split.val = Dataset(config.n_control_bits(), config.n_context_bits);
  split.val.reserve(n_val);
  SampleDrawer drawer(config, derive_seed(seed, 2));
  Dataset candidate;
  while (split.val.size() < n_val) {
    candidate = Dataset(config.n_control_bits(), config.n_context_bits);
    drawer.draw_into(candidate);
    if (train_keys.contains(input_key(candidate, 0))) continue;
    split.val.push_back(candidate.task(0), candidate.packed_bits(0), candidate.n_visible(0), candidate.label(0));
  }
  return split;
}

// ---------------------------------------------------------------------------
// Oracles

double bayes_posterior(const Sample& sample, const ParityConfig& config, int l) {
  const auto& t = config.tasks.at(static_cast<std::size_t>(sample.active_task));
  const int visible = std::min(l, sample.n_visible);
  return t.bit_hi <= visible ? static_cast<double>(sample.label) : 0.5;
}

double bayes_posterior(const Dataset& data, std::size_t i, const ParityConfig& config, int l) {
  const auto& t = config.tasks[static_cast<std::size_t>(data.task(i))];
  const int visible = std::min(l, data.n_visible(i));
  return t.bit_hi <= visible ? static_cast<double>(data.label(i)) : 0.5;
}

double bayes_risk(const ParityConfig& config, int l) {
  require(l >= 0, "bayes_risk: l must be >= 0");
  double unsolvable = 0.0;
  for (const auto& t : config.tasks) {
    double p_hidden = t.bit_hi > l ? 1.0 : 0.0;
    if (p_hidden == 0.0 && config.mask.kind == MaskPolicy::Kind::RandomSuffix) {
      const int lo = config.mask.min_visible, hi = config.mask.max_visible;
      const int below = std::clamp(t.bit_hi - lo, 0, hi - lo + 1);  // count of V in [lo, hi] with V < bit_hi
      p_hidden = config.mask.masked_fraction * static_cast<double>(below) / static_cast<double>(hi - lo + 1);
    }
    unsolvable += t.frequency * p_hidden;
  }
  return unsolvable / config.total_frequency() * kLn2;
}

LossDecomposition decompose_loss(std::span<const double> predictions, const Dataset& data,
                                 const ParityConfig& config, int l) {
  require(predictions.size() == data.size(), "decompose_loss: one prediction per sample required");
  require(!data.empty(), "decompose_loss: empty dataset");
  constexpr double kClamp = 1e-12;
  LossDecomposition out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    double q = predictions[i];
    require(std::isfinite(q) && q >= 0.0 && q <= 1.0, "decompose_loss: prediction outside [0,1]");
    if (q < kClamp || q > 1.0 - kClamp) {
      q = std::clamp(q, kClamp, 1.0 - kClamp);
      ++out.clamped;
    }
    const double p = bayes_posterior(data, i, config, l);
    const double y = data.label(i);
    const double lq = std::log(q), l1q = std::log1p(-q);
    out.total_ce -= y * lq + (1.0 - y) * l1q;
    out.posterior_ce -= p * lq + (1.0 - p) * l1q;
    double entropy = 0.0, kl = 0.0;
    if (p > 0.0) {
      entropy -= p * std::log(p);
      kl += p * (std::log(p) - lq);
    }
    if (p < 1.0) {
      entropy -= (1.0 - p) * std::log1p(-p);
      kl += (1.0 - p) * (std::log1p(-p) - l1q);
    }
    out.bayes_risk += entropy;
    out.approx_loss += kl;
  }
  const double n = static_cast<double>(data.size());
  out.total_ce /= n;
  out.posterior_ce /= n;
  out.bayes_risk /= n;
  out.approx_loss /= n;
  return out;
}

}  // namespace ctxscale::parity
