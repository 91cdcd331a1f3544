#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "windscale/grid.hpp"

namespace windscale {

/// One named grid inside a field container file.
struct NamedField {
  std::string name;
  FieldGrid grid;
};

// Container layout (little-endian):
//   "WSFIELD1"                          8 bytes magic
//   u32 entry count
//   per entry:
//     str name, str timestamp           (u32 length + bytes)
//     f64 spacing_km
//     u32 C, u64 H, u64 W
//     C x (str channel name, str units)
//     C*H*W f64 values, (C, H, W) row-major
void write_fields(const std::filesystem::path& path, const std::vector<NamedField>& fields);
std::vector<NamedField> read_fields(const std::filesystem::path& path);

/// Single-grid convenience wrappers (entry name "field").
void write_field(const std::filesystem::path& path, const FieldGrid& grid);
FieldGrid read_field(const std::filesystem::path& path);

/// Finds an entry by name; throws FileError when missing.
const FieldGrid& find_field(const std::vector<NamedField>& fields, const std::string& name);

/// A pair file stores the "low" and "high" grids; covariates live in their own file.
void write_pair(const std::filesystem::path& path, const SamplePair& pair);
SamplePair read_pair(const std::filesystem::path& path, const FieldGrid& covariates);

}  // namespace windscale
