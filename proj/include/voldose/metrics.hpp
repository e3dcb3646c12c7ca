#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "voldose/geom.hpp"
#include "voldose/grid.hpp"

namespace voldose {

// Boolean voxel region used for field comparison and ROI statistics.
struct RegionMask {
    GridDims dims;
    float voxel_mm = 1.0f;
    std::string name;
    std::vector<std::uint8_t> mask;

    RegionMask() = default;
    RegionMask(const GridDims& d, float voxel, std::string region_name);

    bool at(int i, int j, int k) const {
        return mask[(static_cast<std::size_t>(k) * dims.ny + j) * dims.nx + i] != 0;
    }
    void set(int i, int j, int k, bool v) {
        mask[(static_cast<std::size_t>(k) * dims.ny + j) * dims.nx + i] = v ? 1 : 0;
    }
    std::int64_t voxel_count() const;

    LabelGrid to_labels() const;
    static RegionMask from_labels(const LabelGrid& labels, std::string name);
};

// Voxels whose centers lie within radius_mm of center_mm. Voxel (i,j,k)
// center sits at ((i+0.5), (j+0.5), (k+0.5)) * voxel_mm. Throws if the
// resulting region is empty.
RegionMask sphere_roi(const Vec3& center_mm, double radius_mm,
                      const GridDims& dims, float voxel_mm,
                      std::string name = "sphere");

// Mask of voxels whose label belongs to tissue_ids (empty mask allowed only
// through from_labels; this throws if no voxel matches).
RegionMask tissue_mask(const LabelGrid& labels, const std::vector<int>& tissue_ids,
                       std::string name);

struct GlobalError {
    double ge_percent = 0.0;   // region-normalized mean absolute difference, %
    double mean_percent = 0.0; // same as ge_percent, kept for report symmetry
    double std_percent = 0.0;  // std of the per-voxel normalized differences, %
    double normalizer = 0.0;   // max of both field magnitudes over the region
    std::int64_t voxels = 0;
};

// Region-normalized global error between two field magnitude maps:
//   GE = mean_{i in region} |E_i - Ehat_i| / max_{i in region}(E_i, Ehat_i) * 100%.
// Symmetric in its field arguments and invariant under common positive
// scaling. Throws if the region is empty or both fields vanish on it.
GlobalError global_error(const ScalarGrid& e, const ScalarGrid& ehat,
                         const RegionMask& region);

struct RegionReportRow {
    std::string region;
    GlobalError ge;
};

std::vector<RegionReportRow> region_report(const ScalarGrid& e, const ScalarGrid& ehat,
                                           const std::vector<RegionMask>& regions);

// aligned plain-text table, percent with two decimals
std::string format_region_report(const std::vector<RegionReportRow>& rows);

// machine-readable CSV: region,ge_percent,mean_percent,std_percent
std::string region_report_csv(const std::vector<RegionReportRow>& rows);

} // namespace voldose
