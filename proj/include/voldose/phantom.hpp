#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "voldose/conductor.hpp"
#include "voldose/dataset.hpp"
#include "voldose/grid.hpp"

namespace voldose {

// One ellipsoidal tissue shell. Axis-aligned semi-axes and center in mm.
struct Shell {
    int tissue = 0;
    std::array<double, 3> semi_axes_mm{};
    std::array<double, 3> center_mm{};
    double t1_mean = 0.0;
    double t2_mean = 0.0;
    double noise_std = 0.0;
};

// Deterministic synthetic head-like phantom: nested ellipsoids from
// outermost to innermost over an air background.
struct PhantomSpec {
    GridDims dims{64, 64, 64};
    float voxel_mm = 1.0f;
    std::uint64_t seed = 0;
    double air_noise = 0.0;
    std::vector<Shell> shells;

    // throws unless shells are pairwise distinct tissues, strictly nested,
    // and noise is non-negative
    void validate(const TissueTable& table) const;

    // plain-text `key = value` form; shells as indexed groups shell.N.*
    static PhantomSpec load(const std::string& path);
    void save(const std::string& path) const;
    static PhantomSpec parse(const std::string& text);
    std::string serialize() const;
};

struct PhantomVolumes {
    LabelGrid labels;
    ScalarGrid t1;
    ScalarGrid t2;
};

// Voxel label = innermost shell containing the voxel center (0 for air);
// intensities = tissue mean + seeded Gaussian noise. Identical specs give
// bit-identical volumes.
PhantomVolumes generate_phantom(const PhantomSpec& spec, const TissueTable& table);

// True when the point lies inside (or on) the shell ellipsoid. Exposed so
// tests can count membership analytically.
bool inside_shell(const Shell& s, double x_mm, double y_mm, double z_mm);

// Paired samples for condnet training: normalized T1/T2 inputs and one
// normalized uniform-conductor target per tissue table.
TrainingSet phantom_dataset(const std::vector<PhantomSpec>& specs,
                            const std::vector<TissueTable>& tables, double tau);

} // namespace voldose
