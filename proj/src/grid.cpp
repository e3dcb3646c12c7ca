#include "voldose/grid.hpp"

#include <cmath>
#include <stdexcept>

namespace voldose {

const char* axis_name(Axis a) {
    switch (a) {
        case Axis::axial: return "axial";
        case Axis::sagittal: return "sagittal";
        case Axis::coronal: return "coronal";
    }
    return "?";
}

Axis axis_from_name(const std::string& name) {
    if (name == "axial") return Axis::axial;
    if (name == "sagittal") return Axis::sagittal;
    if (name == "coronal") return Axis::coronal;
    throw std::invalid_argument("unknown axis name: " + name);
}

namespace {

void check_dims(const GridDims& d, float voxel_mm) {
    if (d.nx <= 0 || d.ny <= 0 || d.nz <= 0)
        throw std::invalid_argument("grid dims must be positive");
    if (!(voxel_mm > 0.0f))
        throw std::invalid_argument("voxel size must be positive");
}

} // namespace

ScalarGrid::ScalarGrid(int nx, int ny, int nz, float voxel, float fill)
    : dims{nx, ny, nz}, voxel_mm(voxel),
      data(static_cast<std::size_t>(dims.voxels()), fill) {
    check_dims(dims, voxel_mm);
}

void ScalarGrid::validate() const {
    check_dims(dims, voxel_mm);
    if (static_cast<std::int64_t>(data.size()) != dims.voxels())
        throw std::runtime_error("scalar grid data length does not match dims");
    for (float v : data)
        if (!std::isfinite(v)) throw std::runtime_error("scalar grid holds non-finite value");
}

VectorGrid::VectorGrid(int nx, int ny, int nz, float voxel)
    : dims{nx, ny, nz}, voxel_mm(voxel),
      data(static_cast<std::size_t>(dims.voxels()) * 3, 0.0f) {
    check_dims(dims, voxel_mm);
}

void VectorGrid::validate() const {
    check_dims(dims, voxel_mm);
    if (static_cast<std::int64_t>(data.size()) != dims.voxels() * 3)
        throw std::runtime_error("vector grid data length does not match dims");
    for (float v : data)
        if (!std::isfinite(v)) throw std::runtime_error("vector grid holds non-finite value");
}

LabelGrid::LabelGrid(int nx, int ny, int nz, float voxel)
    : dims{nx, ny, nz}, voxel_mm(voxel),
      data(static_cast<std::size_t>(dims.voxels()), 0) {
    check_dims(dims, voxel_mm);
}

void LabelGrid::validate() const {
    check_dims(dims, voxel_mm);
    if (static_cast<std::int64_t>(data.size()) != dims.voxels())
        throw std::runtime_error("label grid data length does not match dims");
}

int slice_count(const GridDims& dims, Axis axis) {
    switch (axis) {
        case Axis::axial: return dims.nz;
        case Axis::sagittal: return dims.nx;
        case Axis::coronal: return dims.ny;
    }
    return 0;
}

std::pair<int, int> slice_shape(const GridDims& dims, Axis axis) {
    switch (axis) {
        case Axis::axial: return {dims.nx, dims.ny};
        case Axis::sagittal: return {dims.ny, dims.nz};
        case Axis::coronal: return {dims.nx, dims.nz};
    }
    return {0, 0};
}

Slice2D slice_extract(const ScalarGrid& grid, Axis axis, int k) {
    if (k < 0 || k >= slice_count(grid.dims, axis))
        throw std::out_of_range("slice index out of range");
    Slice2D s;
    s.axis = axis;
    s.index = k;
    auto [p, q] = slice_shape(grid.dims, axis);
    s.p = p;
    s.q = q;
    s.data.resize(static_cast<std::size_t>(p) * q);
    switch (axis) {
        case Axis::axial:
            for (int j = 0; j < q; ++j)
                for (int i = 0; i < p; ++i) s.at(i, j) = grid.at(i, j, k);
            break;
        case Axis::sagittal:
            for (int j = 0; j < q; ++j)
                for (int i = 0; i < p; ++i) s.at(i, j) = grid.at(k, i, j);
            break;
        case Axis::coronal:
            for (int j = 0; j < q; ++j)
                for (int i = 0; i < p; ++i) s.at(i, j) = grid.at(i, k, j);
            break;
    }
    return s;
}

void slice_insert(ScalarGrid& grid, const Slice2D& slice) {
    if (slice.index < 0 || slice.index >= slice_count(grid.dims, slice.axis))
        throw std::out_of_range("slice index out of range");
    auto [p, q] = slice_shape(grid.dims, slice.axis);
    if (p != slice.p || q != slice.q)
        throw std::invalid_argument("slice shape does not match grid");
    const int k = slice.index;
    switch (slice.axis) {
        case Axis::axial:
            for (int j = 0; j < q; ++j)
                for (int i = 0; i < p; ++i) grid.at(i, j, k) = slice.at(i, j);
            break;
        case Axis::sagittal:
            for (int j = 0; j < q; ++j)
                for (int i = 0; i < p; ++i) grid.at(k, i, j) = slice.at(i, j);
            break;
        case Axis::coronal:
            for (int j = 0; j < q; ++j)
                for (int i = 0; i < p; ++i) grid.at(i, k, j) = slice.at(i, j);
            break;
    }
}

ScalarGrid normalize_mri(const ScalarGrid& grid) {
    const std::int64_t n = grid.dims.voxels();
    if (n == 0) throw std::invalid_argument("empty grid");

    double sum = 0.0;
    for (float v : grid.data) sum += v;
    const double mean = sum / static_cast<double>(n);

    double ss = 0.0;
    for (float v : grid.data) {
        const double d = v - mean;
        ss += d * d;
    }
    const double var = ss / static_cast<double>(n);
    if (var <= 0.0)
        throw std::invalid_argument("normalize_mri: constant-valued grid (zero variance)");
    const double inv_sd = 1.0 / std::sqrt(var);

    // z-scored extrema; the final min-max map sends them to exactly 0 and 1
    double zmin = 0.0, zmax = 0.0;
    bool first = true;
    for (float v : grid.data) {
        const double z = (v - mean) * inv_sd;
        if (first) {
            zmin = zmax = z;
            first = false;
        } else {
            if (z < zmin) zmin = z;
            if (z > zmax) zmax = z;
        }
    }
    const double span = zmax - zmin;

    ScalarGrid out(grid.dims.nx, grid.dims.ny, grid.dims.nz, grid.voxel_mm);
    for (std::int64_t i = 0; i < n; ++i) {
        const double z = (grid.data[static_cast<std::size_t>(i)] - mean) * inv_sd;
        out.data[static_cast<std::size_t>(i)] = static_cast<float>((z - zmin) / span);
    }
    return out;
}

} // namespace voldose
