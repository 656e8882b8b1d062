// Binary field snapshots ("FLD1") and their JSON sidecars.
//
// Layout of one snapshot file, all integers little-endian:
//   4 bytes   magic "FLD1"
//   u32       format version (1)
//   u8        rank (number of spatial axes)
//   u64[rank] cells per axis
//   f64[...]  cell values, row-major (last axis fastest)
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sktlab/mesh.hpp"

namespace sktlab {

inline constexpr std::uint32_t kSnapshotVersion = 1;

struct RawSnapshot {
  std::vector<std::uint64_t> cells;
  std::vector<double> values;
};

std::vector<unsigned char> encode_snapshot(const Field& f);
RawSnapshot decode_snapshot(const std::vector<unsigned char>& bytes);

/// Writes via a temporary file and rename so readers never see partial data.
void write_file_atomic(const std::filesystem::path& path, const std::string& contents);
void write_file_atomic(const std::filesystem::path& path, const std::vector<unsigned char>& bytes);

void write_snapshot(const std::filesystem::path& path, const Field& f);
RawSnapshot read_snapshot(const std::filesystem::path& path);

/// Writes one file per slice named "<stem>_<k>.fld" plus "<stem>.json".
/// Returns the paths written (sidecar last).
std::vector<std::filesystem::path> write_space_time(const std::filesystem::path& dir,
                                                    const std::string& stem,
                                                    const SpaceTimeField& f);
SpaceTimeField read_space_time(const std::filesystem::path& dir, const std::string& stem);

}  // namespace sktlab
