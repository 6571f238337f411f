#pragma once

// On-disk formats: dataset CSV/binary, parity config ingest, model checkpoints.

#include <filesystem>
#include <string>
#include <string_view>

#include "ctxscale/nn.hpp"
#include "ctxscale/parity.hpp"
#include "ctxscale/serialize.hpp"

namespace ctxscale {

namespace parity {

/// Header "task,context,mask,label"; one row per sample. `context` holds the
/// generator bits as a 0/1 string (position 1 first), `mask` holds 1 where the
/// position is hidden, `task` is the 0-based active control index.
std::string dataset_to_csv(const Dataset& data);
Dataset dataset_from_csv(std::string_view text);

/// 16-byte header: magic "CSPD", u16 version, u16 T, u32 L, u32 n; then per
/// sample u16 task, u16 n_visible, u8 label and ceil(L/64) u64 words. Little-endian.
std::string dataset_to_binary(const Dataset& data);
Dataset dataset_from_binary(std::string_view bytes);

/// Reads and validates a parity config JSON file.
ParityConfig load_parity_config(const std::filesystem::path& path);

}  // namespace parity

namespace nn {

/// Magic "CSCK", u32 version, u32 spec length, spec JSON, u64 count, f64 params.
std::string checkpoint_to_bytes(const Model<double>& model);
Model<double> checkpoint_from_bytes(std::string_view bytes);

/// Writes `path` and a `path`.json sidecar holding `metadata`.
void save_checkpoint(const std::filesystem::path& path, const Model<double>& model, const Json& metadata);
Model<double> load_checkpoint(const std::filesystem::path& path);

}  // namespace nn

/// Magic "CSFM", u32 rows, u32 cols, then row-major f64 entries.
std::string matrix_to_bytes(const Matrix& m);
Matrix matrix_from_bytes(std::string_view bytes);

}  // namespace ctxscale
