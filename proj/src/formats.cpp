#include "ctxscale/formats.hpp"

#include <sstream>
#include <vector>

#include "ctxscale/error.hpp"
#include "ctxscale/io.hpp"

namespace ctxscale {

namespace parity {

namespace {

constexpr char kDatasetMagic[4] = {'C', 'S', 'P', 'D'};
constexpr std::uint16_t kDatasetVersion = 1;

std::vector<std::uint64_t> pack(std::string_view bits) {
  std::vector<std::uint64_t> words((bits.size() + 63) / 64, 0);
  for (std::size_t p = 0; p < bits.size(); ++p) {
    if (bits[p] == '1')
      words[p / 64] |= std::uint64_t{1} << (p % 64);
    else if (bits[p] != '0')
      throw IoError("dataset csv: context must contain only 0 and 1");
  }
  return words;
}

}  // namespace

std::string dataset_to_csv(const Dataset& data) {
  const int L = data.n_context_bits();
  std::string out = "task,context,mask,label\n";
  out.reserve(out.size() + data.size() * static_cast<std::size_t>(2 * L + 12));
  for (std::size_t i = 0; i < data.size(); ++i) {
    out += std::to_string(data.task(i));
    out += ',';
    for (int p = 1; p <= L; ++p) out += data.bit(i, p) ? '1' : '0';
    out += ',';
    for (int p = 1; p <= L; ++p) out += data.masked(i, p) ? '1' : '0';
    out += ',';
    out += data.label(i) ? '1' : '0';
    out += '\n';
  }
  return out;
}

Dataset dataset_from_csv(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != "task,context,mask,label") throw IoError("dataset csv: unexpected header");
  std::vector<int> tasks, labels, visible;
  std::vector<std::vector<std::uint64_t>> bits;
  int L = -1, max_task = -1;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 4) throw IoError("dataset csv: row " + std::to_string(row) + " needs 4 fields");
    if (L < 0) L = static_cast<int>(f[1].size());
    if (static_cast<int>(f[1].size()) != L || static_cast<int>(f[2].size()) != L)
      throw IoError("dataset csv: row " + std::to_string(row) + " has inconsistent context width");
    const auto m = f[2].find('1');
    const int nv = m == std::string::npos ? L : static_cast<int>(m);
    if (f[2].find('0', static_cast<std::size_t>(nv)) != std::string::npos)
      throw IoError("dataset csv: row " + std::to_string(row) + " mask is not a suffix");
    int task = 0;
    try {
      task = std::stoi(f[0]);
    } catch (const std::exception&) {
      throw IoError("dataset csv: row " + std::to_string(row) + " has a bad task index");
    }
    if (task < 0 || (f[3] != "0" && f[3] != "1")) throw IoError("dataset csv: row " + std::to_string(row) + " is malformed");
    tasks.push_back(task);
    labels.push_back(f[3] == "1");
    visible.push_back(nv);
    bits.push_back(pack(f[1]));
    max_task = std::max(max_task, task);
  }
  if (L < 0) throw IoError("dataset csv: no rows (the number of control bits cannot be inferred)");
  Dataset d(max_task + 1, L);
  d.reserve(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) d.push_back(tasks[i], bits[i], visible[i], labels[i]);
  return d;
}

std::string dataset_to_binary(const Dataset& data) {
  require(data.size() <= 0xFFFFFFFFu, "dataset binary: too many samples");
  std::string out(kDatasetMagic, 4);
  io::put_u16(out, kDatasetVersion);
  io::put_u16(out, static_cast<std::uint16_t>(data.n_control_bits()));
  io::put_u32(out, static_cast<std::uint32_t>(data.n_context_bits()));
  io::put_u32(out, static_cast<std::uint32_t>(data.size()));
  out.reserve(16 + data.size() * (5 + 8 * data.words_per_sample()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    io::put_u16(out, static_cast<std::uint16_t>(data.task(i)));
    io::put_u16(out, static_cast<std::uint16_t>(data.n_visible(i)));
    out.push_back(static_cast<char>(data.label(i)));
    for (auto w : data.packed_bits(i)) io::put_u64(out, w);
  }
  return out;
}

Dataset dataset_from_binary(std::string_view bytes) {
  if (bytes.size() < 16 || bytes.substr(0, 4) != std::string_view(kDatasetMagic, 4))
    throw IoError("dataset binary: bad magic");
  std::size_t at = 4;
  const auto version = io::get_u16(bytes, at);
  if (version != kDatasetVersion) throw IoError("dataset binary: unsupported version " + std::to_string(version));
  const int T = io::get_u16(bytes, at);
  const int L = static_cast<int>(io::get_u32(bytes, at));
  const std::size_t n = io::get_u32(bytes, at);
  Dataset d(T, L);
  const std::size_t words = d.words_per_sample();
  if (bytes.size() != 16 + n * (5 + 8 * words)) throw IoError("dataset binary: size does not match header");
  d.reserve(n);
  std::vector<std::uint64_t> packed(words);
  for (std::size_t i = 0; i < n; ++i) {
    const int task = io::get_u16(bytes, at);
    const int nv = io::get_u16(bytes, at);
    const int label = static_cast<unsigned char>(bytes[at++]);
    for (auto& w : packed) w = io::get_u64(bytes, at);
    if (task >= T || nv > L || label > 1) throw IoError("dataset binary: record " + std::to_string(i) + " out of range");
    d.push_back(task, packed, nv, label);
  }
  return d;
}

ParityConfig load_parity_config(const std::filesystem::path& path) {
  const Json j = parse_json(io::read_file(path), path.string());
  ParityConfig c;
  try {
    c = j.get<ParityConfig>();
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    c.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return c;
}

}  // namespace parity

namespace nn {

namespace {
constexpr char kCheckpointMagic[4] = {'C', 'S', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;
}  // namespace

std::string checkpoint_to_bytes(const Model<double>& model) {
  const std::string spec = Json(model.spec()).dump();
  std::string out(kCheckpointMagic, 4);
  io::put_u32(out, kCheckpointVersion);
  io::put_u32(out, static_cast<std::uint32_t>(spec.size()));
  out += spec;
  io::put_u64(out, model.param_count());
  for (double p : model.params()) io::put_f64(out, p);
  return out;
}

Model<double> checkpoint_from_bytes(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != std::string_view(kCheckpointMagic, 4))
    throw IoError("checkpoint: bad magic");
  std::size_t at = 4;
  const auto version = io::get_u32(bytes, at);
  if (version != kCheckpointVersion) throw IoError("checkpoint: unsupported version " + std::to_string(version));
  const std::size_t len = io::get_u32(bytes, at);
  if (at + len > bytes.size()) throw IoError("checkpoint: truncated spec");
  ModelSpec spec;
  try {
    spec = Json::parse(bytes.substr(at, len)).get<ModelSpec>();
  } catch (const std::exception& e) {
    throw IoError(std::string("checkpoint: bad spec: ") + e.what());
  }
  at += len;
  const auto n = io::get_u64(bytes, at);
  if (bytes.size() - at != n * 8) throw IoError("checkpoint: parameter count does not match payload");
  std::vector<double> params(n);
  for (auto& p : params) p = io::get_f64(bytes, at);
  return Model<double>(spec, std::move(params));
}

void save_checkpoint(const std::filesystem::path& path, const Model<double>& model, const Json& metadata) {
  io::write_file_atomic(path, checkpoint_to_bytes(model));
  Json side = metadata;
  side["spec"] = model.spec();
  side["param_count"] = model.param_count();
  side["format_version"] = kCheckpointVersion;
  io::write_file_atomic(std::filesystem::path(path.string() + ".json"), dump_json(side));
}

Model<double> load_checkpoint(const std::filesystem::path& path) { return checkpoint_from_bytes(io::read_file(path)); }

}  // namespace nn

std::string matrix_to_bytes(const Matrix& m) {
  std::string out = "CSFM";
  io::put_u32(out, static_cast<std::uint32_t>(m.rows()));
  io::put_u32(out, static_cast<std::uint32_t>(m.cols()));
  out.reserve(out.size() + static_cast<std::size_t>(m.size()) * 8);
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) io::put_f64(out, m(i, j));
  return out;
}

Matrix matrix_from_bytes(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "CSFM") throw IoError("feature matrix: bad magic");
  std::size_t at = 4;
  const std::uint32_t rows = io::get_u32(bytes, at);
  const std::uint32_t cols = io::get_u32(bytes, at);
  if (bytes.size() - at != std::size_t{rows} * cols * 8) throw IoError("feature matrix: size does not match payload");
  Matrix m(rows, cols);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) m(i, j) = io::get_f64(bytes, at);
  return m;
}

}  // namespace ctxscale
