#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "voldose/grid.hpp"

namespace voldose {

// Discrete scalar-potential finite-difference system. Potentials live at
// voxel corners (node grid (nx+1)(ny+1)(nz+1)), conductivities at voxel
// centers. Every lattice edge carries conductance h * mean of the up-to-4
// adjacent voxel conductivities (outside counts as air), so edges bordered
// only by air carry zero and nodes surrounded by air become identity rows.
struct SpfdSystem {
    GridDims vox;     // voxel dims
    int nnx = 0, nny = 0, nnz = 0; // node dims
    double h_m = 0.0; // voxel edge [m]

    std::vector<double> sigma; // voxel conductivities, kept for coarsening
    std::vector<double> sx, sy, sz; // edge conductances [S]
    std::vector<double> diag;       // row diagonal per node (1 for air rows)
    std::vector<std::uint8_t> conducting;
    std::vector<double> b; // node sources [A]

    std::int64_t node(int i, int j, int k) const {
        return (static_cast<std::int64_t>(k) * nny + j) * nnx + i;
    }
    std::int64_t nodes() const { return static_cast<std::int64_t>(nnx) * nny * nnz; }
};

// Builds the operator and the source vector b from -div(sigma dA/dt).
// b sums edge conductance * h * (dA/dt along the edge, averaged over the
// in-domain adjacent voxels), signed away from each node.
SpfdSystem assemble(const ScalarGrid& cond, const VectorGrid& dadt);

// operator application y = S x (identity on air rows)
void spfd_apply(const SpfdSystem& sys, const std::vector<double>& x, std::vector<double>& y);

// residual r = b - S psi (zero on air rows)
void spfd_residual(const SpfdSystem& sys, const std::vector<double>& psi,
                   const std::vector<double>& rhs, std::vector<double>& r);

// One red-black SOR sweep (red pass then black pass) on S psi = rhs.
void sor_sweep(const SpfdSystem& sys, std::vector<double>& psi, const std::vector<double>& rhs,
               double omega);

struct SolveConfig {
    double tolerance = 1e-6;   // relative residual ||b - S psi|| / ||b||
    int max_cycles = 50;
    int pre_sweeps = 2;
    int post_sweeps = 2;
    double omega = 1.5;        // SOR relaxation, in (0,2)
    int coarsest_extent = 4;   // stop coarsening at (or below) this many voxels
    int coarsest_sweeps = 200;
};

struct SolveStats {
    int cycles = 0;
    double final_rel_residual = 0.0;
    bool converged = false;
    std::vector<double> residual_history;
    double max_node_residual = 0.0; // conservation check, max |r_n| at the end
    double source_norm = 0.0;       // ||b||_2

    std::string report() const;
};

// Geometric multigrid V-cycles with red-black SOR smoothing; full-weighting
// restriction, trilinear prolongation, conductance-averaged coarse grids.
// The gauge is fixed to zero mean over conducting nodes. b = 0 returns
// psi = 0 immediately; residual growth over three consecutive cycles throws.
ScalarGrid solve(const SpfdSystem& sys, const SolveConfig& cfg, SolveStats* stats = nullptr);

// E = -grad(psi) - dA/dt at voxel centers (gradient averaged over the four
// parallel edges of each voxel); E = 0 in air voxels.
void electric_field(const ScalarGrid& psi_nodes, const VectorGrid& dadt,
                    const ScalarGrid& cond, VectorGrid& e_out, ScalarGrid& mag_out);

} // namespace voldose
