#pragma once

#include <string>
#include <vector>

#include "voldose/geom.hpp"
#include "voldose/grid.hpp"

namespace voldose {

// One closed polyline loop. Segment t runs points[t] -> points[t+1] with
// wraparound; orientation multiplies the carried current.
struct WireLoop {
    std::vector<Vec3> points_mm;
    double orientation = 1.0;
};

// Thin-wire coil: straight segments carrying a common current derivative.
struct WirePath {
    std::vector<WireLoop> loops;
    double didt = 6.7e7; // A/s, configurable placeholder amplitude

    void validate() const; // >= 3 points per loop, finite segments
};

// Coil pose: center, unit plane normal, in-plane rotation about the normal.
struct CoilPlacement {
    Vec3 center_mm{};
    Vec3 normal{0.0, 0.0, 1.0};
    double angle_rad = 0.0;

    // plain-text `key = value` form plus coil geometry
    static CoilPlacement from_keyvals(const std::string& text);
};

// Figure-eight coil: two coplanar circular polylines of mean diameter
// (outer+inner)/2, tangent at the placement center, opposite circulation.
// The second loop is the exact mirror of the first across the plane through
// the center perpendicular to the in-plane axis.
WirePath build_figure_eight(const CoilPlacement& placement, double outer_d_mm = 97.0,
                            double inner_d_mm = 47.0, int segments_per_loop = 128,
                            double didt = 6.7e7);

// Full coil description file: placement + diameters + segments + didt.
struct CoilSpec {
    CoilPlacement placement;
    double outer_d_mm = 97.0;
    double inner_d_mm = 47.0;
    int segments_per_loop = 128;
    double didt = 6.7e7;

    static CoilSpec load(const std::string& path);
    static CoilSpec parse(const std::string& text);
    std::string serialize() const;
    void save(const std::string& path) const;

    WirePath build() const {
        return build_figure_eight(placement, outer_d_mm, inner_d_mm, segments_per_loop, didt);
    }
};

// Magnetic vector potential per unit current [T*m/A] at a point, summed
// over the closed-form straight-segment kernels. Throws when the point
// lies within 1e-9 m of a segment.
Vec3 vector_potential(const WirePath& wire, const Vec3& point_mm);

// dA/dt sampled at voxel centers: didt * A_unit, in V/m.
VectorGrid dA_dt_field(const WirePath& wire, const GridDims& dims, float voxel_mm);

// signed circulation of a loop about an axis (sum of projected cross
// products); used by orientation tests
double loop_circulation(const WireLoop& loop, const Vec3& axis_unit);

} // namespace voldose
