#include "ctxscale/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "ctxscale/error.hpp"
#include "ctxscale/io.hpp"
#include "ctxscale/rng.hpp"
#include "ctxscale/serialize.hpp"

namespace ctxscale::scaling {

bool RunRecord::same_result(const RunRecord& o) const {
  return dataset_size == o.dataset_size && context_length == o.context_length && seed == o.seed &&
         final_val_ce == o.final_val_ce && bayes_risk == o.bayes_risk && approx_loss == o.approx_loss &&
         epochs == o.epochs && best_epoch == o.best_epoch && valid == o.valid && error == o.error;
}

bool SweepReport::same_result(const SweepReport& o) const {
  if (records.size() != o.records.size() || optimal.size() != o.optimal.size()) return false;
  for (std::size_t i = 0; i < records.size(); ++i)
    if (!records[i].same_result(o.records[i])) return false;
  for (std::size_t i = 0; i < optimal.size(); ++i)
    if (optimal[i].dataset_size != o.optimal[i].dataset_size ||
        optimal[i].context_length != o.optimal[i].context_length || optimal[i].mean_ce != o.optimal[i].mean_ce)
      return false;
  return monotone == o.monotone && invalid_cells == o.invalid_cells;
}

void SweepConfig::validate() const {
  parity.validate();
  train.validate();
  require(!dataset_sizes.empty() && !context_lengths.empty() && !seeds.empty(), "sweep config: empty grid");
  require(activation_after.size() == hidden.size(), "sweep config: activation_after needs one flag per hidden layer");
  for (int h : hidden) require(h >= 1, "sweep config: hidden widths must be positive");
  for (int l : context_lengths)
    require(l >= 1 && l <= parity.n_context_bits, "sweep config: context length outside [1, L]");
  for (auto d : dataset_sizes) require(d >= 1, "sweep config: dataset sizes must be positive");
  require(n_val >= 1, "sweep config: n_val must be positive");
  require(std::set<std::size_t>(dataset_sizes.begin(), dataset_sizes.end()).size() == dataset_sizes.size() &&
              std::set<int>(context_lengths.begin(), context_lengths.end()).size() == context_lengths.size() &&
              std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() == seeds.size(),
          "sweep config: grid values must be distinct");
}

nn::ModelSpec SweepConfig::model_spec(int context_length, std::uint64_t seed) const {
  nn::MlpSpec mlp;
  mlp.layer_dims.push_back(context_length + parity.n_control_bits());
  mlp.layer_dims.insert(mlp.layer_dims.end(), hidden.begin(), hidden.end());
  mlp.layer_dims.push_back(1);
  mlp.activation_after = activation_after;
  nn::ModelSpec spec;
  spec.context_length = context_length;
  spec.n_control_bits = parity.n_control_bits();
  spec.seed = derive_seed(derive_seed(seed, 0x1417), static_cast<std::uint64_t>(context_length));
  spec.arch = mlp;
  return spec;
}

std::string cell_config_hash(const SweepConfig& config, std::size_t dataset_size, int context_length,
                             std::uint64_t seed) {
  Json j{{"parity", config.parity},
         {"hidden", config.hidden},
         {"activation_after", config.activation_after},
         {"train", config.train},
         {"n_val", config.n_val},
         {"dataset_size", dataset_size},
         {"context_length", context_length},
         {"seed", seed}};
  return io::fnv1a_hex(j.dump());
}

std::string receipt_name(std::size_t dataset_size, int context_length, std::uint64_t seed) {
  return "D" + std::to_string(dataset_size) + "_l" + std::to_string(context_length) + "_s" + std::to_string(seed) +
         ".json";
}

void summarise(SweepReport& report) {
  report.optimal.clear();
  report.invalid_cells = 0;
  std::map<std::size_t, std::map<int, std::pair<double, int>>> acc;
  for (const auto& r : report.records) {
    if (!r.valid) {
      ++report.invalid_cells;
      continue;
    }
    auto& cell = acc[r.dataset_size][r.context_length];
    cell.first += r.final_val_ce;
    cell.second += 1;
  }
  for (const auto& [d, by_l] : acc) {
    if (by_l.size() < 2) continue;
    OptimalContext best{d, 0, std::numeric_limits<double>::infinity()};
    for (const auto& [l, sum] : by_l) {
      const double mean = sum.first / sum.second;
      if (mean < best.mean_ce) best = {d, l, mean};
    }
    report.optimal.push_back(best);
  }
  report.monotone = report.optimal.size() >= 2;
  for (std::size_t i = 1; i < report.optimal.size(); ++i)
    if (report.optimal[i].context_length < report.optimal[i - 1].context_length) report.monotone = false;
}

namespace {

struct Cell {
  std::size_t d_index;
  std::size_t seed_index;
  int context_length;
};

std::optional<RunRecord> load_receipt(const std::filesystem::path& path, const std::string& hash) {
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) return std::nullopt;
  try {
    const Json j = Json::parse(io::read_file(path));
    if (j.at("config_hash").get<std::string>() != hash) return std::nullopt;
    auto r = j.at("record").get<RunRecord>();
    if (!r.valid) return std::nullopt;
    return r;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

}  // namespace

SweepReport run_sweep(const SweepConfig& config, const SweepOptions& options) {
  config.validate();
  require(options.jobs >= 1, "run_sweep: jobs must be >= 1");
  const std::size_t nd = config.dataset_sizes.size(), nl = config.context_lengths.size(), ns = config.seeds.size();

  std::vector<RunRecord> records(nd * nl * ns);
  std::vector<bool> done(records.size(), false);
  std::vector<Cell> pending;
  std::vector<bool> need_data(nd * ns, false);
  auto slot = [&](std::size_t di, std::size_t li, std::size_t si) { return (di * nl + li) * ns + si; };

  for (std::size_t di = 0; di < nd; ++di)
    for (std::size_t li = 0; li < nl; ++li)
      for (std::size_t si = 0; si < ns; ++si) {
        const auto d = config.dataset_sizes[di];
        const int l = config.context_lengths[li];
        const auto seed = config.seeds[si];
        if (!options.receipt_dir.empty()) {
          const auto hash = cell_config_hash(config, d, l, seed);
          if (auto r = load_receipt(options.receipt_dir / receipt_name(d, l, seed), hash)) {
            records[slot(di, li, si)] = *r;
            done[slot(di, li, si)] = true;
            if (options.on_cell) options.on_cell(*r, true);
            continue;
          }
        }
        pending.push_back({di, si, l});
        need_data[di * ns + si] = true;
      }

  std::vector<std::optional<parity::Split>> data(nd * ns);
  std::vector<std::string> data_error(nd * ns);
  for (std::size_t di = 0; di < nd; ++di)
    for (std::size_t si = 0; si < ns; ++si) {
      if (!need_data[di * ns + si]) continue;
      try {
        data[di * ns + si] = parity::split_disjoint(config.parity, config.dataset_sizes[di], config.n_val,
                                                    derive_seed(config.seeds[si], config.dataset_sizes[di]));
      } catch (const std::exception& e) {
        data_error[di * ns + si] = e.what();
      }
    }

  std::mutex mu;
  std::exception_ptr io_failure;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t k = next++; k < pending.size(); k = next++) {
      const Cell& c = pending[k];
      const auto d = config.dataset_sizes[c.d_index];
      const auto seed = config.seeds[c.seed_index];
      const std::size_t li = static_cast<std::size_t>(
          std::find(config.context_lengths.begin(), config.context_lengths.end(), c.context_length) -
          config.context_lengths.begin());
      RunRecord r;
      r.dataset_size = d;
      r.context_length = c.context_length;
      r.seed = seed;
      r.bayes_risk = parity::bayes_risk(config.parity, c.context_length);
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const auto& split = data[c.d_index * ns + c.seed_index];
        if (!split) throw InvalidArgument("data generation failed: " + data_error[c.d_index * ns + c.seed_index]);
        nn::TrainConfig tc = config.train;
        tc.seed = derive_seed(derive_seed(config.train.seed ^ seed, d), static_cast<std::uint64_t>(c.context_length));
        const auto result = nn::train(config.model_spec(c.context_length, seed), tc, split->train, split->val);
        r.final_val_ce = result.history.best_val_loss();
        r.approx_loss = r.final_val_ce - r.bayes_risk;
        r.epochs = result.history.epochs();
        r.best_epoch = result.history.best_epoch;
      } catch (const std::exception& e) {
        r.valid = false;
        r.error = e.what();
      }
      r.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

      std::lock_guard lock(mu);
      if (!options.receipt_dir.empty() && !io_failure) {
        try {
          Json j{{"config_hash", cell_config_hash(config, d, c.context_length, seed)}, {"record", r}};
          io::write_file_atomic(options.receipt_dir / receipt_name(d, c.context_length, seed), dump_json(j));
        } catch (...) {
          io_failure = std::current_exception();
        }
      }
      records[slot(c.d_index, li, c.seed_index)] = r;
      if (options.on_cell) options.on_cell(r, false);
    }
  };

  const int n_threads = std::max(1, std::min<int>(options.jobs, static_cast<int>(pending.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }

  if (io_failure) std::rethrow_exception(io_failure);

  SweepReport report;
  report.records = std::move(records);
  summarise(report);
  return report;
}

}  // namespace ctxscale::scaling
