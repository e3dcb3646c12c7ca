#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace voldose {

// Slicing directions. axial fixes z, sagittal fixes x, coronal fixes y.
enum class Axis { axial, sagittal, coronal };

const char* axis_name(Axis a);
Axis axis_from_name(const std::string& name);

struct GridDims {
    int nx = 0, ny = 0, nz = 0;

    bool operator==(const GridDims&) const = default;
    std::int64_t voxels() const {
        return static_cast<std::int64_t>(nx) * ny * nz;
    }
};

// 3-D voxel volume of reals, x-fastest storage, isotropic voxel edge in mm.
struct ScalarGrid {
    GridDims dims;
    float voxel_mm = 1.0f;
    std::vector<float> data;

    ScalarGrid() = default;
    ScalarGrid(int nx, int ny, int nz, float voxel = 1.0f, float fill = 0.0f);

    std::int64_t index(int i, int j, int k) const {
        return (static_cast<std::int64_t>(k) * dims.ny + j) * dims.nx + i;
    }
    float& at(int i, int j, int k) { return data[index(i, j, k)]; }
    float at(int i, int j, int k) const { return data[index(i, j, k)]; }

    // throws if data length, voxel size, or finiteness is violated
    void validate() const;
};

// 3 real components per voxel, interleaved (x-fastest voxels, xyz per voxel).
struct VectorGrid {
    GridDims dims;
    float voxel_mm = 1.0f;
    std::vector<float> data;

    VectorGrid() = default;
    VectorGrid(int nx, int ny, int nz, float voxel = 1.0f);

    std::int64_t index(int i, int j, int k) const {
        return ((static_cast<std::int64_t>(k) * dims.ny + j) * dims.nx + i) * 3;
    }
    float& at(int i, int j, int k, int comp) { return data[index(i, j, k) + comp]; }
    float at(int i, int j, int k, int comp) const { return data[index(i, j, k) + comp]; }

    void validate() const;
};

// One tissue identifier per voxel; id 0 is air/background.
struct LabelGrid {
    GridDims dims;
    float voxel_mm = 1.0f;
    std::vector<std::uint16_t> data;

    LabelGrid() = default;
    LabelGrid(int nx, int ny, int nz, float voxel = 1.0f);

    std::int64_t index(int i, int j, int k) const {
        return (static_cast<std::int64_t>(k) * dims.ny + j) * dims.nx + i;
    }
    std::uint16_t& at(int i, int j, int k) { return data[index(i, j, k)]; }
    std::uint16_t at(int i, int j, int k) const { return data[index(i, j, k)]; }

    void validate() const;
};

// A single plane of a ScalarGrid. data is p*q reals, first dimension fastest.
struct Slice2D {
    Axis axis = Axis::axial;
    int index = 0;
    int p = 0, q = 0;
    std::vector<float> data;

    float& at(int a, int b) { return data[static_cast<std::size_t>(b) * p + a]; }
    float at(int a, int b) const { return data[static_cast<std::size_t>(b) * p + a]; }
};

// Number of slices a grid has along an axis.
int slice_count(const GridDims& dims, Axis axis);

// In-plane slice dims (p, q) for an axis.
std::pair<int, int> slice_shape(const GridDims& dims, Axis axis);

Slice2D slice_extract(const ScalarGrid& grid, Axis axis, int k);
void slice_insert(ScalarGrid& grid, const Slice2D& slice);

// Per-volume intensity normalization: z-score to zero mean / unit variance,
// then min-max rescale of the z-scored values into [0,1]. Throws on
// constant-valued input.
ScalarGrid normalize_mri(const ScalarGrid& grid);

} // namespace voldose
