#pragma once

#include <string>
#include <variant>

#include "voldose/grid.hpp"

namespace voldose {

// NVV1 volume container. Five ASCII header lines
//   NVV1
//   dtype <f32|u16|vec3f32>
//   dims nx ny nz
//   voxel_mm s
//   end
// followed by the raw little-endian payload in x-fastest order; vector
// grids store three consecutive f32 per voxel. write/read round-trips are
// bit-exact for the stored precision.

void write_volume(const ScalarGrid& grid, const std::string& path);
void write_volume(const LabelGrid& grid, const std::string& path);
void write_volume(const VectorGrid& grid, const std::string& path);

using AnyVolume = std::variant<ScalarGrid, LabelGrid, VectorGrid>;

AnyVolume read_volume(const std::string& path);

// typed readers; throw if the file holds a different dtype
ScalarGrid read_scalar_volume(const std::string& path);
LabelGrid read_label_volume(const std::string& path);
VectorGrid read_vector_volume(const std::string& path);

} // namespace voldose
