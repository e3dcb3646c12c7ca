#pragma once

#include <map>
#include <string>

#include "voldose/grid.hpp"
#include "voldose/metrics.hpp"

namespace voldose {

struct TissueEntry {
    std::string name;
    double sigma = 0.0; // S/m
};

// Ordered tissue id -> conductivity map. Air (id 0) is implicit with
// sigma = 0 and never appears as an entry.
struct TissueTable {
    std::string tag;
    std::map<int, TissueEntry> entries;

    double sigma_of(int id) const; // throws on unknown id; 0 for air
    bool has(int id) const { return id == 0 || entries.count(id) > 0; }
    double sigma_max() const;      // max over entries

    // plain text, one `id name sigma` per line, '#' comments
    static TissueTable load(const std::string& path);
    void save(const std::string& path) const;

    static TissueTable parse(const std::string& text, std::string tag);
    std::string serialize() const;
};

// Built-in Cole-Cole 10 kHz values (tag "A") and typical computational
// values (tag "B").
TissueTable builtin_table_a();
TissueTable builtin_table_b();
TissueTable builtin_table(const std::string& name); // "A" or "B"

// Conductor normalization parameters: values are scaled into [0, 1-tau]
// by (1-tau)/sigma_max.
struct NormParams {
    double tau = 0.1;
    double sigma_max = 0.0;

    static NormParams from_table(const TissueTable& table, double tau = 0.1);
};

// Uniform conductor: voxel value = sigma of its label, 0 for air.
ScalarGrid assign_uniform(const LabelGrid& labels, const TissueTable& table);

// cond * (1-tau)/sigma_max, mapping [0, sigma_max] onto [0, 1-tau].
ScalarGrid normalize_conductor(const ScalarGrid& cond, const NormParams& p);

// Inverse map: L * sigma_max/(1-tau).
ScalarGrid denormalize(const ScalarGrid& normalized, const NormParams& p);

// Voxelwise mean of the three direction volumes.
ScalarGrid average_directions(const ScalarGrid& axial, const ScalarGrid& sagittal,
                              const ScalarGrid& coronal);

struct CondStats {
    double mean = 0.0, stddev = 0.0;
    double min = 0.0, max = 0.0;
    double q1 = 0.0, median = 0.0, q3 = 0.0;
    std::int64_t voxels = 0;
};

// Order statistics of the conductor over a region. Quartiles use the
// midpoint (Tukey hinge) convention: the median splits the sorted values
// into halves (median excluded for odd counts) and q1/q3 are the medians
// of those halves.
CondStats roi_conductivity_stats(const ScalarGrid& cond, const RegionMask& region);

} // namespace voldose
