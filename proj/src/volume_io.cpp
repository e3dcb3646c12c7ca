#include "voldose/volume_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

static_assert(std::endian::native == std::endian::little,
              "NVV1 IO assumes a little-endian host");
static_assert(sizeof(float) == 4);

namespace voldose {

namespace {

std::string format_voxel_mm(float v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    return buf;
}

void write_header(std::ofstream& f, const char* dtype, const GridDims& d, float voxel_mm) {
    f << "NVV1\n"
      << "dtype " << dtype << '\n'
      << "dims " << d.nx << ' ' << d.ny << ' ' << d.nz << '\n'
      << "voxel_mm " << format_voxel_mm(voxel_mm) << '\n'
      << "end\n";
}

std::ofstream open_out(const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    return f;
}

void write_payload(std::ofstream& f, const void* p, std::size_t bytes, const std::string& path) {
    f.write(static_cast<const char*>(p), static_cast<std::streamsize>(bytes));
    if (!f) throw std::runtime_error("write failed: " + path);
}

struct Header {
    std::string dtype;
    GridDims dims;
    float voxel_mm = 1.0f;
};

std::string read_line(std::ifstream& f, const std::string& path) {
    std::string line;
    if (!std::getline(f, line))
        throw std::runtime_error("malformed NVV1 header (truncated): " + path);
    if (!line.empty() && line.back() == '\r')
        throw std::runtime_error("malformed NVV1 header (CR line ending): " + path);
    return line;
}

Header read_header(std::ifstream& f, const std::string& path) {
    if (read_line(f, path) != "NVV1")
        throw std::runtime_error("not an NVV1 file: " + path);

    Header h;
    {
        std::istringstream ls(read_line(f, path));
        std::string key;
        ls >> key >> h.dtype;
        if (key != "dtype" ||
            (h.dtype != "f32" && h.dtype != "u16" && h.dtype != "vec3f32"))
            throw std::runtime_error("unknown dtype code in NVV1 header: " + path);
    }
    {
        std::istringstream ls(read_line(f, path));
        std::string key;
        ls >> key >> h.dims.nx >> h.dims.ny >> h.dims.nz;
        if (key != "dims" || !ls || h.dims.nx <= 0 || h.dims.ny <= 0 || h.dims.nz <= 0)
            throw std::runtime_error("malformed dims line in NVV1 header: " + path);
    }
    {
        std::istringstream ls(read_line(f, path));
        std::string key;
        ls >> key >> h.voxel_mm;
        if (key != "voxel_mm" || !ls || !(h.voxel_mm > 0.0f))
            throw std::runtime_error("malformed voxel_mm line in NVV1 header: " + path);
    }
    if (read_line(f, path) != "end")
        throw std::runtime_error("missing end marker in NVV1 header: " + path);
    return h;
}

void read_payload(std::ifstream& f, void* p, std::size_t bytes, const std::string& path) {
    f.read(static_cast<char*>(p), static_cast<std::streamsize>(bytes));
    if (f.gcount() != static_cast<std::streamsize>(bytes))
        throw std::runtime_error("NVV1 payload shorter than dims declare: " + path);
    // must be exactly consumed
    char extra;
    if (f.read(&extra, 1); f.gcount() != 0)
        throw std::runtime_error("NVV1 payload longer than dims declare: " + path);
}

} // namespace

void write_volume(const ScalarGrid& grid, const std::string& path) {
    grid.validate();
    auto f = open_out(path);
    write_header(f, "f32", grid.dims, grid.voxel_mm);
    write_payload(f, grid.data.data(), grid.data.size() * sizeof(float), path);
}

void write_volume(const LabelGrid& grid, const std::string& path) {
    grid.validate();
    auto f = open_out(path);
    write_header(f, "u16", grid.dims, grid.voxel_mm);
    write_payload(f, grid.data.data(), grid.data.size() * sizeof(std::uint16_t), path);
}

void write_volume(const VectorGrid& grid, const std::string& path) {
    grid.validate();
    auto f = open_out(path);
    write_header(f, "vec3f32", grid.dims, grid.voxel_mm);
    write_payload(f, grid.data.data(), grid.data.size() * sizeof(float), path);
}

AnyVolume read_volume(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open for reading: " + path);
    const Header h = read_header(f, path);
    const std::int64_t n = h.dims.voxels();

    if (h.dtype == "f32") {
        ScalarGrid g(h.dims.nx, h.dims.ny, h.dims.nz, h.voxel_mm);
        read_payload(f, g.data.data(), static_cast<std::size_t>(n) * sizeof(float), path);
        return g;
    }
    if (h.dtype == "u16") {
        LabelGrid g(h.dims.nx, h.dims.ny, h.dims.nz, h.voxel_mm);
        read_payload(f, g.data.data(), static_cast<std::size_t>(n) * sizeof(std::uint16_t), path);
        return g;
    }
    VectorGrid g(h.dims.nx, h.dims.ny, h.dims.nz, h.voxel_mm);
    read_payload(f, g.data.data(), static_cast<std::size_t>(n) * 3 * sizeof(float), path);
    return g;
}

ScalarGrid read_scalar_volume(const std::string& path) {
    auto v = read_volume(path);
    if (auto* g = std::get_if<ScalarGrid>(&v)) return std::move(*g);
    throw std::runtime_error("expected f32 volume: " + path);
}

LabelGrid read_label_volume(const std::string& path) {
    auto v = read_volume(path);
    if (auto* g = std::get_if<LabelGrid>(&v)) return std::move(*g);
    throw std::runtime_error("expected u16 volume: " + path);
}

VectorGrid read_vector_volume(const std::string& path) {
    auto v = read_volume(path);
    if (auto* g = std::get_if<VectorGrid>(&v)) return std::move(*g);
    throw std::runtime_error("expected vec3f32 volume: " + path);
}

} // namespace voldose
