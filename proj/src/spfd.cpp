#include "voldose/spfd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "voldose/parallel.hpp"

namespace voldose {

namespace {

inline std::int64_t ex_index(const SpfdSystem& s, int i, int j, int k) {
    return (static_cast<std::int64_t>(k) * s.nny + j) * s.vox.nx + i;
}
inline std::int64_t ey_index(const SpfdSystem& s, int i, int j, int k) {
    return (static_cast<std::int64_t>(k) * s.vox.ny + j) * s.nnx + i;
}
inline std::int64_t ez_index(const SpfdSystem& s, int i, int j, int k) {
    return (static_cast<std::int64_t>(k) * s.nny + j) * s.nnx + i;
}

double voxel_sigma(const SpfdSystem& s, int i, int j, int k) {
    if (i < 0 || j < 0 || k < 0 || i >= s.vox.nx || j >= s.vox.ny || k >= s.vox.nz) return 0.0;
    return s.sigma[static_cast<std::size_t>((static_cast<std::int64_t>(k) * s.vox.ny + j) *
                                            s.vox.nx + i)];
}

// mean over the 4 voxels around an edge; out-of-domain voxels count as air
double edge_mean_x(const SpfdSystem& s, int i, int j, int k) {
    return 0.25 * (voxel_sigma(s, i, j - 1, k - 1) + voxel_sigma(s, i, j, k - 1) +
                   voxel_sigma(s, i, j - 1, k) + voxel_sigma(s, i, j, k));
}
double edge_mean_y(const SpfdSystem& s, int i, int j, int k) {
    return 0.25 * (voxel_sigma(s, i - 1, j, k - 1) + voxel_sigma(s, i, j, k - 1) +
                   voxel_sigma(s, i - 1, j, k) + voxel_sigma(s, i, j, k));
}
double edge_mean_z(const SpfdSystem& s, int i, int j, int k) {
    return 0.25 * (voxel_sigma(s, i - 1, j - 1, k) + voxel_sigma(s, i, j - 1, k) +
                   voxel_sigma(s, i - 1, j, k) + voxel_sigma(s, i, j, k));
}

// operator structure from the sigma volume already stored in sys
void build_operator(SpfdSystem& s) {
    s.nnx = s.vox.nx + 1;
    s.nny = s.vox.ny + 1;
    s.nnz = s.vox.nz + 1;
    s.sx.assign(static_cast<std::size_t>(s.vox.nx) * s.nny * s.nnz, 0.0);
    s.sy.assign(static_cast<std::size_t>(s.nnx) * s.vox.ny * s.nnz, 0.0);
    s.sz.assign(static_cast<std::size_t>(s.nnx) * s.nny * s.vox.nz, 0.0);

    for (int k = 0; k < s.nnz; ++k)
        for (int j = 0; j < s.nny; ++j)
            for (int i = 0; i < s.vox.nx; ++i)
                s.sx[static_cast<std::size_t>(ex_index(s, i, j, k))] =
                    s.h_m * edge_mean_x(s, i, j, k);
    for (int k = 0; k < s.nnz; ++k)
        for (int j = 0; j < s.vox.ny; ++j)
            for (int i = 0; i < s.nnx; ++i)
                s.sy[static_cast<std::size_t>(ey_index(s, i, j, k))] =
                    s.h_m * edge_mean_y(s, i, j, k);
    for (int k = 0; k < s.vox.nz; ++k)
        for (int j = 0; j < s.nny; ++j)
            for (int i = 0; i < s.nnx; ++i)
                s.sz[static_cast<std::size_t>(ez_index(s, i, j, k))] =
                    s.h_m * edge_mean_z(s, i, j, k);

    s.diag.assign(static_cast<std::size_t>(s.nodes()), 0.0);
    s.conducting.assign(static_cast<std::size_t>(s.nodes()), 0);
    for (int k = 0; k < s.nnz; ++k)
        for (int j = 0; j < s.nny; ++j)
            for (int i = 0; i < s.nnx; ++i) {
                double d = 0.0;
                if (i > 0) d += s.sx[static_cast<std::size_t>(ex_index(s, i - 1, j, k))];
                if (i < s.vox.nx) d += s.sx[static_cast<std::size_t>(ex_index(s, i, j, k))];
                if (j > 0) d += s.sy[static_cast<std::size_t>(ey_index(s, i, j - 1, k))];
                if (j < s.vox.ny) d += s.sy[static_cast<std::size_t>(ey_index(s, i, j, k))];
                if (k > 0) d += s.sz[static_cast<std::size_t>(ez_index(s, i, j, k - 1))];
                if (k < s.vox.nz) d += s.sz[static_cast<std::size_t>(ez_index(s, i, j, k))];
                const auto n = static_cast<std::size_t>(s.node(i, j, k));
                if (d > 0.0) {
                    s.diag[n] = d;
                    s.conducting[n] = 1;
                } else {
                    s.diag[n] = 1.0; // identity row, psi = 0
                }
            }
}

} // namespace

SpfdSystem assemble(const ScalarGrid& cond, const VectorGrid& dadt) {
    if (cond.dims != dadt.dims) throw std::invalid_argument("assemble: dims mismatch");
    SpfdSystem s;
    s.vox = cond.dims;
    s.h_m = static_cast<double>(cond.voxel_mm) * 1e-3;
    s.sigma.resize(cond.data.size());
    for (std::size_t i = 0; i < cond.data.size(); ++i) {
        if (cond.data[i] < 0.0f) throw std::invalid_argument("assemble: negative conductivity");
        s.sigma[i] = static_cast<double>(cond.data[i]);
    }
    build_operator(s);

    // source: per edge, flux = s_e * h * (dA/dt along the edge), signed away
    // from each end node. dA/dt at the edge is the mean over the in-domain
    // adjacent voxels.
    s.b.assign(static_cast<std::size_t>(s.nodes()), 0.0);
    auto dadt_at = [&](int i, int j, int k, int comp) -> double {
        if (i < 0 || j < 0 || k < 0 || i >= s.vox.nx || j >= s.vox.ny || k >= s.vox.nz)
            return 0.0;
        return dadt.at(i, j, k, comp);
    };
    auto in_domain = [&](int i, int j, int k) -> int {
        return (i >= 0 && j >= 0 && k >= 0 && i < s.vox.nx && j < s.vox.ny && k < s.vox.nz) ? 1 : 0;
    };

    for (int k = 0; k < s.nnz; ++k)
        for (int j = 0; j < s.nny; ++j)
            for (int i = 0; i < s.vox.nx; ++i) {
                const double se = s.sx[static_cast<std::size_t>(ex_index(s, i, j, k))];
                if (se == 0.0) continue;
                const int cnt = in_domain(i, j - 1, k - 1) + in_domain(i, j, k - 1) +
                                in_domain(i, j - 1, k) + in_domain(i, j, k);
                const double a = (dadt_at(i, j - 1, k - 1, 0) + dadt_at(i, j, k - 1, 0) +
                                  dadt_at(i, j - 1, k, 0) + dadt_at(i, j, k, 0)) / cnt;
                const double f = se * s.h_m * a;
                s.b[static_cast<std::size_t>(s.node(i, j, k))] += f;
                s.b[static_cast<std::size_t>(s.node(i + 1, j, k))] -= f;
            }
    for (int k = 0; k < s.nnz; ++k)
        for (int j = 0; j < s.vox.ny; ++j)
            for (int i = 0; i < s.nnx; ++i) {
                const double se = s.sy[static_cast<std::size_t>(ey_index(s, i, j, k))];
                if (se == 0.0) continue;
                const int cnt = in_domain(i - 1, j, k - 1) + in_domain(i, j, k - 1) +
                                in_domain(i - 1, j, k) + in_domain(i, j, k);
                const double a = (dadt_at(i - 1, j, k - 1, 1) + dadt_at(i, j, k - 1, 1) +
                                  dadt_at(i - 1, j, k, 1) + dadt_at(i, j, k, 1)) / cnt;
                const double f = se * s.h_m * a;
                s.b[static_cast<std::size_t>(s.node(i, j, k))] += f;
                s.b[static_cast<std::size_t>(s.node(i, j + 1, k))] -= f;
            }
    for (int k = 0; k < s.vox.nz; ++k)
        for (int j = 0; j < s.nny; ++j)
            for (int i = 0; i < s.nnx; ++i) {
                const double se = s.sz[static_cast<std::size_t>(ez_index(s, i, j, k))];
                if (se == 0.0) continue;
                const int cnt = in_domain(i - 1, j - 1, k) + in_domain(i, j - 1, k) +
                                in_domain(i - 1, j, k) + in_domain(i, j, k);
                const double a = (dadt_at(i - 1, j - 1, k, 2) + dadt_at(i, j - 1, k, 2) +
                                  dadt_at(i - 1, j, k, 2) + dadt_at(i, j, k, 2)) / cnt;
                const double f = se * s.h_m * a;
                s.b[static_cast<std::size_t>(s.node(i, j, k))] += f;
                s.b[static_cast<std::size_t>(s.node(i, j, k + 1))] -= f;
            }

    for (std::int64_t n = 0; n < s.nodes(); ++n)
        if (!s.conducting[static_cast<std::size_t>(n)]) s.b[static_cast<std::size_t>(n)] = 0.0;
    return s;
}

void spfd_apply(const SpfdSystem& s, const std::vector<double>& x, std::vector<double>& y) {
    y.assign(static_cast<std::size_t>(s.nodes()), 0.0);
    parallel_for(s.nnz, [&](std::int64_t k64) {
        const int k = static_cast<int>(k64);
        for (int j = 0; j < s.nny; ++j)
            for (int i = 0; i < s.nnx; ++i) {
                const auto n = static_cast<std::size_t>(s.node(i, j, k));
                if (!s.conducting[n]) {
                    y[n] = x[n];
                    continue;
                }
                double acc = s.diag[n] * x[n];
                if (i > 0)
                    acc -= s.sx[static_cast<std::size_t>(ex_index(s, i - 1, j, k))] *
                           x[static_cast<std::size_t>(s.node(i - 1, j, k))];
                if (i < s.vox.nx)
                    acc -= s.sx[static_cast<std::size_t>(ex_index(s, i, j, k))] *
                           x[static_cast<std::size_t>(s.node(i + 1, j, k))];
                if (j > 0)
                    acc -= s.sy[static_cast<std::size_t>(ey_index(s, i, j - 1, k))] *
                           x[static_cast<std::size_t>(s.node(i, j - 1, k))];
                if (j < s.vox.ny)
                    acc -= s.sy[static_cast<std::size_t>(ey_index(s, i, j, k))] *
                           x[static_cast<std::size_t>(s.node(i, j + 1, k))];
                if (k > 0)
                    acc -= s.sz[static_cast<std::size_t>(ez_index(s, i, j, k - 1))] *
                           x[static_cast<std::size_t>(s.node(i, j, k - 1))];
                if (k < s.vox.nz)
                    acc -= s.sz[static_cast<std::size_t>(ez_index(s, i, j, k))] *
                           x[static_cast<std::size_t>(s.node(i, j, k + 1))];
                y[n] = acc;
            }
    });
}

void spfd_residual(const SpfdSystem& s, const std::vector<double>& psi,
                   const std::vector<double>& rhs, std::vector<double>& r) {
    spfd_apply(s, psi, r);
    parallel_for(s.nodes(), [&](std::int64_t n64) {
        const auto n = static_cast<std::size_t>(n64);
        r[n] = s.conducting[n] ? rhs[n] - r[n] : 0.0;
    });
}

namespace {

void sor_color(const SpfdSystem& s, std::vector<double>& psi, const std::vector<double>& rhs,
               double omega, int color) {
    parallel_for(s.nnz, [&](std::int64_t k64) {
        const int k = static_cast<int>(k64);
        for (int j = 0; j < s.nny; ++j) {
            const int start = (color + j + k) % 2;
            for (int i = start; i < s.nnx; i += 2) {
                const auto n = static_cast<std::size_t>(s.node(i, j, k));
                if (!s.conducting[n]) {
                    psi[n] = 0.0;
                    continue;
                }
                double acc = rhs[n];
                if (i > 0)
                    acc += s.sx[static_cast<std::size_t>(ex_index(s, i - 1, j, k))] *
                           psi[static_cast<std::size_t>(s.node(i - 1, j, k))];
                if (i < s.vox.nx)
                    acc += s.sx[static_cast<std::size_t>(ex_index(s, i, j, k))] *
                           psi[static_cast<std::size_t>(s.node(i + 1, j, k))];
                if (j > 0)
                    acc += s.sy[static_cast<std::size_t>(ey_index(s, i, j - 1, k))] *
                           psi[static_cast<std::size_t>(s.node(i, j - 1, k))];
                if (j < s.vox.ny)
                    acc += s.sy[static_cast<std::size_t>(ey_index(s, i, j, k))] *
                           psi[static_cast<std::size_t>(s.node(i, j + 1, k))];
                if (k > 0)
                    acc += s.sz[static_cast<std::size_t>(ez_index(s, i, j, k - 1))] *
                           psi[static_cast<std::size_t>(s.node(i, j, k - 1))];
                if (k < s.vox.nz)
                    acc += s.sz[static_cast<std::size_t>(ez_index(s, i, j, k))] *
                           psi[static_cast<std::size_t>(s.node(i, j, k + 1))];
                psi[n] += omega * (acc / s.diag[n] - psi[n]);
            }
        }
    });
}

} // namespace

void sor_sweep(const SpfdSystem& s, std::vector<double>& psi, const std::vector<double>& rhs,
               double omega) {
    if (!(omega > 0.0 && omega < 2.0))
        throw std::invalid_argument("sor_sweep: omega must be in (0,2)");
    sor_color(s, psi, rhs, omega, 0);
    sor_color(s, psi, rhs, omega, 1);
}

// ---------------------------------------------------------------------------
// multigrid

namespace {

struct Level {
    SpfdSystem sys;
    std::vector<double> psi, rhs, res;
};

SpfdSystem coarsen(const SpfdSystem& fine) {
    SpfdSystem c;
    c.vox = {fine.vox.nx / 2, fine.vox.ny / 2, fine.vox.nz / 2};
    c.h_m = fine.h_m * 2.0;
    c.sigma.assign(static_cast<std::size_t>(c.vox.voxels()), 0.0);
    for (int k = 0; k < c.vox.nz; ++k)
        for (int j = 0; j < c.vox.ny; ++j)
            for (int i = 0; i < c.vox.nx; ++i) {
                double sum = 0.0;
                for (int dk = 0; dk < 2; ++dk)
                    for (int dj = 0; dj < 2; ++dj)
                        for (int di = 0; di < 2; ++di)
                            sum += voxel_sigma(fine, 2 * i + di, 2 * j + dj, 2 * k + dk);
                // conductance averaging: child edge conductances sum and
                // renormalize to sigma_c * (2h) = mean(sigma_f) * 2h
                c.sigma[static_cast<std::size_t>(
                    (static_cast<std::int64_t>(k) * c.vox.ny + j) * c.vox.nx + i)] = sum / 8.0;
            }
    build_operator(c);
    c.b.assign(static_cast<std::size_t>(c.nodes()), 0.0);
    return c;
}

// full-weighting restriction of node residuals; out-of-range fine nodes
// contribute zero
void restrict_fw(const SpfdSystem& fine, const std::vector<double>& r, const SpfdSystem& coarse,
                 std::vector<double>& out) {
    out.assign(static_cast<std::size_t>(coarse.nodes()), 0.0);
    parallel_for(coarse.nnz, [&](std::int64_t K64) {
        const int K = static_cast<int>(K64);
        for (int J = 0; J < coarse.nny; ++J)
            for (int I = 0; I < coarse.nnx; ++I) {
                double acc = 0.0;
                for (int dk = -1; dk <= 1; ++dk) {
                    const int k = 2 * K + dk;
                    if (k < 0 || k >= fine.nnz) continue;
                    const double wk = dk == 0 ? 1.0 : 0.5;
                    for (int dj = -1; dj <= 1; ++dj) {
                        const int j = 2 * J + dj;
                        if (j < 0 || j >= fine.nny) continue;
                        const double wj = dj == 0 ? 1.0 : 0.5;
                        for (int di = -1; di <= 1; ++di) {
                            const int i = 2 * I + di;
                            if (i < 0 || i >= fine.nnx) continue;
                            const double wi = di == 0 ? 1.0 : 0.5;
                            acc += wk * wj * wi *
                                   r[static_cast<std::size_t>(fine.node(i, j, k))];
                        }
                    }
                }
                const auto n = static_cast<std::size_t>(coarse.node(I, J, K));
                out[n] = coarse.conducting[n] ? acc / 8.0 : 0.0;
            }
    });
}

// trilinear prolongation; the correction is applied to conducting fine
// nodes only so air rows keep psi = 0
void prolong_add(const SpfdSystem& coarse, const std::vector<double>& e, const SpfdSystem& fine,
                 std::vector<double>& psi) {
    parallel_for(fine.nnz, [&](std::int64_t k64) {
        const int k = static_cast<int>(k64);
        const int K0 = k / 2, kk = k % 2;
        for (int j = 0; j < fine.nny; ++j) {
            const int J0 = j / 2, jj = j % 2;
            for (int i = 0; i < fine.nnx; ++i) {
                const auto n = static_cast<std::size_t>(fine.node(i, j, k));
                if (!fine.conducting[n]) continue;
                const int I0 = i / 2, ii = i % 2;
                double val = 0.0;
                for (int dk = 0; dk <= kk; ++dk) {
                    const double wk = kk ? 0.5 : 1.0;
                    for (int dj = 0; dj <= jj; ++dj) {
                        const double wj = jj ? 0.5 : 1.0;
                        for (int di = 0; di <= ii; ++di) {
                            const double wi = ii ? 0.5 : 1.0;
                            const int I = std::min(I0 + di, coarse.nnx - 1);
                            const int J = std::min(J0 + dj, coarse.nny - 1);
                            const int K = std::min(K0 + dk, coarse.nnz - 1);
                            val += wk * wj * wi *
                                   e[static_cast<std::size_t>(coarse.node(I, J, K))];
                        }
                    }
                }
                psi[n] += val;
            }
        }
    });
}

double norm2(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

void vcycle(std::vector<Level>& levels, std::size_t l, const SolveConfig& cfg) {
    Level& lev = levels[l];
    if (l + 1 == levels.size()) {
        for (int s = 0; s < cfg.coarsest_sweeps; ++s)
            sor_sweep(lev.sys, lev.psi, lev.rhs, cfg.omega);
        return;
    }
    for (int s = 0; s < cfg.pre_sweeps; ++s) sor_sweep(lev.sys, lev.psi, lev.rhs, cfg.omega);
    spfd_residual(lev.sys, lev.psi, lev.rhs, lev.res);

    Level& next = levels[l + 1];
    restrict_fw(lev.sys, lev.res, next.sys, next.rhs);
    next.psi.assign(next.psi.size(), 0.0);
    vcycle(levels, l + 1, cfg);
    prolong_add(next.sys, next.psi, lev.sys, lev.psi);

    for (int s = 0; s < cfg.post_sweeps; ++s) sor_sweep(lev.sys, lev.psi, lev.rhs, cfg.omega);
}

void subtract_conducting_mean(const SpfdSystem& sys, std::vector<double>& psi) {
    double sum = 0.0;
    std::int64_t count = 0;
    for (std::size_t n = 0; n < psi.size(); ++n)
        if (sys.conducting[n]) {
            sum += psi[n];
            ++count;
        }
    if (count == 0) return;
    const double mean = sum / static_cast<double>(count);
    for (std::size_t n = 0; n < psi.size(); ++n)
        if (sys.conducting[n]) psi[n] -= mean;
}

} // namespace

std::string SolveStats::report() const {
    std::ostringstream out;
    char buf[128];
    out << "spfd solve: " << (converged ? "converged" : "NOT converged") << " after " << cycles
        << " V-cycle(s)\n";
    std::snprintf(buf, sizeof(buf), "final relative residual: %.6e\n", final_rel_residual);
    out << buf;
    std::snprintf(buf, sizeof(buf), "source norm: %.6e A\n", source_norm);
    out << buf;
    std::snprintf(buf, sizeof(buf), "max node residual: %.6e A\n", max_node_residual);
    out << buf;
    out << "residual history:\n";
    for (std::size_t i = 0; i < residual_history.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "  cycle %2zu: %.6e\n", i + 1, residual_history[i]);
        out << buf;
    }
    return out.str();
}

ScalarGrid solve(const SpfdSystem& sys, const SolveConfig& cfg, SolveStats* stats) {
    if (!(cfg.omega > 0.0 && cfg.omega < 2.0))
        throw std::invalid_argument("solve: omega must be in (0,2)");
    if (!(cfg.tolerance > 0.0)) throw std::invalid_argument("solve: tolerance must be positive");

    SolveStats local;
    SolveStats& st = stats ? *stats : local;
    const double bnorm = norm2(sys.b);
    st.source_norm = bnorm;

    ScalarGrid out(sys.nnx, sys.nny, sys.nnz, static_cast<float>(sys.h_m * 1e3));
    if (bnorm == 0.0) {
        st.converged = true;
        return out;
    }

    std::vector<Level> levels;
    levels.push_back({sys, std::vector<double>(static_cast<std::size_t>(sys.nodes()), 0.0),
                      sys.b, {}});
    while (true) {
        const SpfdSystem& f = levels.back().sys;
        const int m = std::min({f.vox.nx, f.vox.ny, f.vox.nz});
        if (m <= cfg.coarsest_extent || f.vox.nx % 2 || f.vox.ny % 2 || f.vox.nz % 2) break;
        SpfdSystem c = coarsen(f);
        const auto n = static_cast<std::size_t>(c.nodes());
        levels.push_back({std::move(c), std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), {}});
    }

    auto& top = levels.front();
    std::vector<double> r;
    int grows = 0;
    double prev = std::numeric_limits<double>::infinity();
    for (int cycle = 1; cycle <= cfg.max_cycles; ++cycle) {
        vcycle(levels, 0, cfg);
        subtract_conducting_mean(top.sys, top.psi);
        spfd_residual(top.sys, top.psi, top.rhs, r);
        const double rel = norm2(r) / bnorm;
        st.residual_history.push_back(rel);
        st.cycles = cycle;
        st.final_rel_residual = rel;
        if (rel <= cfg.tolerance) {
            st.converged = true;
            break;
        }
        if (rel > prev) {
            if (++grows >= 3) throw std::runtime_error("spfd solve diverged: residual grew over "
                                                       "3 consecutive V-cycles");
        } else {
            grows = 0;
        }
        prev = rel;
    }

    spfd_residual(top.sys, top.psi, top.rhs, r);
    double mx = 0.0;
    for (double x : r) mx = std::max(mx, std::abs(x));
    st.max_node_residual = mx;

    for (std::size_t n = 0; n < top.psi.size(); ++n)
        out.data[n] = static_cast<float>(top.psi[n]);
    return out;
}

void electric_field(const ScalarGrid& psi_nodes, const VectorGrid& dadt,
                    const ScalarGrid& cond, VectorGrid& e_out, ScalarGrid& mag_out) {
    const auto& vd = cond.dims;
    if (dadt.dims != vd) throw std::invalid_argument("electric_field: dims mismatch");
    if (psi_nodes.dims.nx != vd.nx + 1 || psi_nodes.dims.ny != vd.ny + 1 ||
        psi_nodes.dims.nz != vd.nz + 1)
        throw std::invalid_argument("electric_field: psi must live on the node grid");

    e_out = VectorGrid(vd.nx, vd.ny, vd.nz, cond.voxel_mm);
    mag_out = ScalarGrid(vd.nx, vd.ny, vd.nz, cond.voxel_mm);
    const double h_m = static_cast<double>(cond.voxel_mm) * 1e-3;

    parallel_for(vd.nz, [&](std::int64_t k64) {
        const int k = static_cast<int>(k64);
        for (int j = 0; j < vd.ny; ++j)
            for (int i = 0; i < vd.nx; ++i) {
                if (cond.at(i, j, k) <= 0.0f) continue; // air: E = 0
                double gx = 0.0, gy = 0.0, gz = 0.0;
                for (int b = 0; b < 2; ++b)
                    for (int c = 0; c < 2; ++c) {
                        gx += psi_nodes.at(i + 1, j + b, k + c) - psi_nodes.at(i, j + b, k + c);
                        gy += psi_nodes.at(i + b, j + 1, k + c) - psi_nodes.at(i + b, j, k + c);
                        gz += psi_nodes.at(i + b, j + c, k + 1) - psi_nodes.at(i + b, j + c, k);
                    }
                const double ex = -gx / (4.0 * h_m) - dadt.at(i, j, k, 0);
                const double ey = -gy / (4.0 * h_m) - dadt.at(i, j, k, 1);
                const double ez = -gz / (4.0 * h_m) - dadt.at(i, j, k, 2);
                e_out.at(i, j, k, 0) = static_cast<float>(ex);
                e_out.at(i, j, k, 1) = static_cast<float>(ey);
                e_out.at(i, j, k, 2) = static_cast<float>(ez);
                mag_out.at(i, j, k) = static_cast<float>(std::sqrt(ex * ex + ey * ey + ez * ez));
            }
    });
}

} // namespace voldose
