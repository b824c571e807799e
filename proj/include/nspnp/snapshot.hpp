#pragma once

#include <filesystem>
#include <string>

#include "nspnp/state.hpp"

namespace nspnp {

/// Binary layout, little-endian throughout:
///   "NSPNP1\0" | u32 dims | u32 N[dims] | f64 L[dims] | u8 bc | f64 time |
///   f64 u components (face layout, one per axis) | P | n⁺ | n⁻ | Ψ
struct Snapshot {
  double time = 0.0;
  State state;
};

std::string encode_snapshot(const State& state, double time);
/// Throws FormatError naming the byte offset and the section that failed.
Snapshot decode_snapshot(const std::string& bytes);

void write_snapshot(const std::filesystem::path& path, const State& state, double time);
Snapshot read_snapshot(const std::filesystem::path& path);

/// Writes every slice as snap_%06d.nspnp into `dir` (created if needed).
void checkpoint(const FieldHistory& history, const std::filesystem::path& dir);
/// Reads all snap_*.nspnp files in name order. Throws FormatError when the
/// directory holds none.
FieldHistory restore(const std::filesystem::path& dir);

std::string snapshot_name(std::size_t index);

}  // namespace nspnp
