#include "voldose/coil.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "voldose/parallel.hpp"

namespace voldose {

namespace {

constexpr double kMu0Over4Pi = 1e-7; // exactly mu0/(4*pi) with mu0 = 4*pi*1e-7
constexpr double kPi = 3.14159265358979323846;
constexpr double kSingularDistMm = 1e-6; // 1e-9 m

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
    const Vec3 ab = b - a;
    const double len2 = dot(ab, ab);
    if (len2 <= 0.0) return norm(p - a);
    double t = dot(p - a, ab) / len2;
    t = std::clamp(t, 0.0, 1.0);
    return norm(p - (a + t * ab));
}

} // namespace

void WirePath::validate() const {
    if (loops.empty()) throw std::invalid_argument("wire path has no loops");
    for (const auto& loop : loops) {
        if (loop.points_mm.size() < 3)
            throw std::invalid_argument("wire loop needs at least 3 points");
        for (std::size_t t = 0; t < loop.points_mm.size(); ++t) {
            const Vec3& a = loop.points_mm[t];
            const Vec3& b = loop.points_mm[(t + 1) % loop.points_mm.size()];
            const double len = norm(b - a);
            if (!std::isfinite(len) || len <= 0.0)
                throw std::invalid_argument("wire loop has a degenerate segment");
        }
    }
}

WirePath build_figure_eight(const CoilPlacement& placement, double outer_d_mm,
                            double inner_d_mm, int segments_per_loop, double didt) {
    if (segments_per_loop < 8)
        throw std::invalid_argument("figure-eight needs >= 8 segments per loop");
    const double nlen = norm(placement.normal);
    if (!(nlen > 1e-12)) throw std::invalid_argument("degenerate coil placement normal");

    const Vec3 n = placement.normal / nlen;
    const Vec3 seed = std::abs(n.z) < 0.9 ? Vec3{0.0, 0.0, 1.0} : Vec3{1.0, 0.0, 0.0};
    Vec3 u = normalized(cross(seed, n));
    Vec3 v = cross(n, u);
    const double ca = std::cos(placement.angle_rad), sa = std::sin(placement.angle_rad);
    const Vec3 ud = ca * u + sa * v;
    const Vec3 vd = -1.0 * sa * u + ca * v;

    const double radius = (outer_d_mm + inner_d_mm) / 4.0; // mean diameter / 2
    const Vec3 c = placement.center_mm;
    const Vec3 ca_center = c + radius * ud;

    WirePath wire;
    wire.didt = didt;
    WireLoop a, b;
    a.points_mm.reserve(static_cast<std::size_t>(segments_per_loop));
    b.points_mm.reserve(static_cast<std::size_t>(segments_per_loop));
    for (int t = 0; t < segments_per_loop; ++t) {
        const double phi = 2.0 * kPi * t / segments_per_loop;
        const Vec3 p = ca_center + radius * (std::cos(phi) * ud) + radius * (std::sin(phi) * vd);
        a.points_mm.push_back(p);
        // exact mirror across the plane through the center normal to ud;
        // same traversal order, so the circulation is opposite and the
        // currents agree at the tangent point
        const Vec3 rel = p - c;
        b.points_mm.push_back(c + rel - 2.0 * dot(rel, ud) * ud);
    }
    wire.loops.push_back(std::move(a));
    wire.loops.push_back(std::move(b));
    wire.validate();
    return wire;
}

Vec3 vector_potential(const WirePath& wire, const Vec3& point_mm) {
    Vec3 acc{};
    for (const auto& loop : wire.loops) {
        const std::size_t n = loop.points_mm.size();
        for (std::size_t t = 0; t < n; ++t) {
            const Vec3& p1 = loop.points_mm[t];
            const Vec3& p2 = loop.points_mm[(t + 1) % n];
            if (point_segment_distance(point_mm, p1, p2) < kSingularDistMm)
                throw std::runtime_error("vector_potential: evaluation point on the wire");
            const Vec3 seg = p2 - p1;
            const double len = norm(seg);
            const double r1 = norm(point_mm - p1);
            const double r2 = norm(point_mm - p2);
            // uniform line source: integral dl/|r-r'| = ln((r1+r2+L)/(r1+r2-L))
            const double val = std::log((r1 + r2 + len) / (r1 + r2 - len));
            acc += (loop.orientation * val / len) * seg;
        }
    }
    return kMu0Over4Pi * acc;
}

VectorGrid dA_dt_field(const WirePath& wire, const GridDims& dims, float voxel_mm) {
    if (!std::isfinite(wire.didt)) throw std::invalid_argument("dA_dt_field: non-finite dI/dt");
    wire.validate();
    VectorGrid out(dims.nx, dims.ny, dims.nz, voxel_mm);
    if (wire.didt == 0.0) return out;

    const double h = voxel_mm;
    const std::int64_t plane = static_cast<std::int64_t>(dims.nx) * dims.ny;
    parallel_for(dims.nz, [&](std::int64_t k) {
        for (int j = 0; j < dims.ny; ++j)
            for (int i = 0; i < dims.nx; ++i) {
                const Vec3 p{(i + 0.5) * h, (j + 0.5) * h, (static_cast<double>(k) + 0.5) * h};
                const Vec3 a = vector_potential(wire, p);
                const std::int64_t idx = (k * plane + static_cast<std::int64_t>(j) * dims.nx + i) * 3;
                out.data[static_cast<std::size_t>(idx)] = static_cast<float>(wire.didt * a.x);
                out.data[static_cast<std::size_t>(idx) + 1] = static_cast<float>(wire.didt * a.y);
                out.data[static_cast<std::size_t>(idx) + 2] = static_cast<float>(wire.didt * a.z);
            }
    });
    return out;
}

double loop_circulation(const WireLoop& loop, const Vec3& axis_unit) {
    Vec3 centroid{};
    for (const auto& p : loop.points_mm) centroid += p;
    centroid = centroid / static_cast<double>(loop.points_mm.size());
    double s = 0.0;
    const std::size_t n = loop.points_mm.size();
    for (std::size_t t = 0; t < n; ++t) {
        const Vec3& a = loop.points_mm[t];
        const Vec3& b = loop.points_mm[(t + 1) % n];
        s += dot(cross(a - centroid, b - a), axis_unit);
    }
    return 0.5 * s * loop.orientation;
}

// ---------------------------------------------------------------------------
// coil spec text form

namespace {

std::string trim_ws(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

} // namespace

CoilSpec CoilSpec::parse(const std::string& text) {
    CoilSpec spec;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim_ws(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("coil spec: expected `key = value`: " + line);
        const std::string key = trim_ws(line.substr(0, eq));
        std::istringstream val(line.substr(eq + 1));
        if (key == "center") val >> spec.placement.center_mm.x >> spec.placement.center_mm.y >> spec.placement.center_mm.z;
        else if (key == "normal") val >> spec.placement.normal.x >> spec.placement.normal.y >> spec.placement.normal.z;
        else if (key == "angle_deg") {
            double deg;
            val >> deg;
            spec.placement.angle_rad = deg * kPi / 180.0;
        } else if (key == "outer_d_mm") val >> spec.outer_d_mm;
        else if (key == "inner_d_mm") val >> spec.inner_d_mm;
        else if (key == "segments") val >> spec.segments_per_loop;
        else if (key == "didt") val >> spec.didt;
        else throw std::runtime_error("coil spec: unknown key: " + key);
        if (!val) throw std::runtime_error("coil spec: malformed value for " + key);
    }
    return spec;
}

std::string CoilSpec::serialize() const {
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "center = %.9g %.9g %.9g\n"
                  "normal = %.9g %.9g %.9g\n"
                  "angle_deg = %.9g\n"
                  "outer_d_mm = %.9g\n"
                  "inner_d_mm = %.9g\n"
                  "segments = %d\n"
                  "didt = %.9g\n",
                  placement.center_mm.x, placement.center_mm.y, placement.center_mm.z,
                  placement.normal.x, placement.normal.y, placement.normal.z,
                  placement.angle_rad * 180.0 / kPi, outer_d_mm, inner_d_mm,
                  segments_per_loop, didt);
    return buf;
}

CoilSpec CoilSpec::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open coil spec: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

void CoilSpec::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write coil spec: " + path);
    f << serialize();
}

CoilPlacement CoilPlacement::from_keyvals(const std::string& text) {
    return CoilSpec::parse(text).placement;
}

} // namespace voldose
