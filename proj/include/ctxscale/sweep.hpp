#pragma once

// (dataset size x context length) grid of training runs with resumable
// per-cell receipts.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctxscale/parity.hpp"
#include "ctxscale/train.hpp"

namespace ctxscale::scaling {

struct RunRecord {
  std::size_t dataset_size = 0;
  int context_length = 0;
  std::uint64_t seed = 0;
  double final_val_ce = 0.0;  // best-epoch validation CE, nats
  double bayes_risk = 0.0;
  double approx_loss = 0.0;  // final_val_ce - bayes_risk
  int epochs = 0;
  int best_epoch = -1;
  double wall_time_s = 0.0;  // excluded from equality
  bool valid = true;
  std::string error;

  bool same_result(const RunRecord& o) const;
};

struct OptimalContext {
  std::size_t dataset_size = 0;
  int context_length = 0;  // smallest l with the lowest seed-mean CE
  double mean_ce = 0.0;
};

struct SweepReport {
  std::vector<RunRecord> records;
  std::vector<OptimalContext> optimal;  // ascending D; only D with >= 2 valid l
  bool monotone = false;                // optimal l non-decreasing in D
  std::size_t invalid_cells = 0;

  bool same_result(const SweepReport& o) const;
};

struct SweepConfig {
  parity::ParityConfig parity;
  std::vector<int> hidden = {400, 200, 200};
  std::vector<bool> activation_after = {true, true, false};
  nn::TrainConfig train;
  std::vector<std::size_t> dataset_sizes;
  std::vector<int> context_lengths;
  std::vector<std::uint64_t> seeds;
  std::size_t n_val = 10000;

  void validate() const;
  nn::ModelSpec model_spec(int context_length, std::uint64_t seed) const;
};

struct SweepOptions {
  int jobs = 1;
  /// Directory of per-cell JSON receipts; empty disables persistence.
  std::filesystem::path receipt_dir;
  std::function<void(const RunRecord&, bool resumed)> on_cell;
};

/// Trains one model per (D, l, seed). All context lengths of a (D, seed) pair
/// share one disjoint train/validation split. Valid receipts whose config
/// hash matches are reused; failed cells are always rerun.
SweepReport run_sweep(const SweepConfig& config, const SweepOptions& options = {});

/// Recomputes optimal contexts and the monotonicity verdict from records.
void summarise(SweepReport& report);

/// Stable hash of everything that determines a cell's result.
std::string cell_config_hash(const SweepConfig& config, std::size_t dataset_size, int context_length,
                             std::uint64_t seed);

std::string receipt_name(std::size_t dataset_size, int context_length, std::uint64_t seed);

}  // namespace ctxscale::scaling
