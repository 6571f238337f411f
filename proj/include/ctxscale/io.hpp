#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace ctxscale::io {

/// Whole-file read; throws IoError.
std::string read_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename, so readers never observe a
/// partially written file. Creates parent directories. Throws IoError.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// 64-bit FNV-1a, hex encoded (16 chars).
std::string fnv1a_hex(std::string_view bytes);

/// Shortest round-trip decimal form of a double ("nan"/"inf" spelled out).
std::string format_double(double v);

/// Little-endian scalar encoding independent of host byte order.
void put_u16(std::string& out, std::uint16_t v);
void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_f64(std::string& out, double v);
std::uint16_t get_u16(std::string_view in, std::size_t& at);
std::uint32_t get_u32(std::string_view in, std::size_t& at);
std::uint64_t get_u64(std::string_view in, std::size_t& at);
double get_f64(std::string_view in, std::size_t& at);

}  // namespace ctxscale::io
