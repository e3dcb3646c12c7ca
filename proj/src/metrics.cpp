#include "voldose/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace voldose {

RegionMask::RegionMask(const GridDims& d, float voxel, std::string region_name)
    : dims(d), voxel_mm(voxel), name(std::move(region_name)),
      mask(static_cast<std::size_t>(d.voxels()), 0) {}

std::int64_t RegionMask::voxel_count() const {
    std::int64_t n = 0;
    for (auto v : mask) n += (v != 0);
    return n;
}

LabelGrid RegionMask::to_labels() const {
    LabelGrid g(dims.nx, dims.ny, dims.nz, voxel_mm);
    for (std::size_t i = 0; i < mask.size(); ++i) g.data[i] = mask[i] ? 1 : 0;
    return g;
}

RegionMask RegionMask::from_labels(const LabelGrid& labels, std::string name) {
    RegionMask m(labels.dims, labels.voxel_mm, std::move(name));
    for (std::size_t i = 0; i < labels.data.size(); ++i) m.mask[i] = labels.data[i] != 0;
    return m;
}

RegionMask sphere_roi(const Vec3& center_mm, double radius_mm,
                      const GridDims& dims, float voxel_mm, std::string name) {
    if (radius_mm < 0.0) throw std::invalid_argument("sphere_roi: negative radius");
    RegionMask m(dims, voxel_mm, std::move(name));
    const double r2 = radius_mm * radius_mm;
    const double h = voxel_mm;
    std::int64_t count = 0;
    for (int k = 0; k < dims.nz; ++k)
        for (int j = 0; j < dims.ny; ++j)
            for (int i = 0; i < dims.nx; ++i) {
                const double dx = (i + 0.5) * h - center_mm.x;
                const double dy = (j + 0.5) * h - center_mm.y;
                const double dz = (k + 0.5) * h - center_mm.z;
                if (dx * dx + dy * dy + dz * dz <= r2) {
                    m.set(i, j, k, true);
                    ++count;
                }
            }
    if (count == 0) throw std::runtime_error("sphere_roi: region lies outside the grid");
    return m;
}

RegionMask tissue_mask(const LabelGrid& labels, const std::vector<int>& tissue_ids,
                       std::string name) {
    RegionMask m(labels.dims, labels.voxel_mm, std::move(name));
    std::int64_t count = 0;
    for (std::size_t i = 0; i < labels.data.size(); ++i) {
        const int id = labels.data[i];
        if (std::find(tissue_ids.begin(), tissue_ids.end(), id) != tissue_ids.end()) {
            m.mask[i] = 1;
            ++count;
        }
    }
    if (count == 0) throw std::runtime_error("tissue_mask: no voxel carries the requested ids");
    return m;
}

GlobalError global_error(const ScalarGrid& e, const ScalarGrid& ehat,
                         const RegionMask& region) {
    if (e.dims != ehat.dims || e.dims != region.dims)
        throw std::invalid_argument("global_error: dims mismatch");

    double maxval = 0.0;
    std::int64_t n = 0;
    const std::size_t total = e.data.size();
    for (std::size_t i = 0; i < total; ++i) {
        if (!region.mask[i]) continue;
        ++n;
        maxval = std::max({maxval, static_cast<double>(e.data[i]),
                           static_cast<double>(ehat.data[i])});
    }
    if (n == 0) throw std::invalid_argument("global_error: empty region");
    if (maxval <= 0.0)
        throw std::runtime_error("global_error: both fields vanish on the region");

    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < total; ++i) {
        if (!region.mask[i]) continue;
        const double d = std::abs(static_cast<double>(e.data[i]) -
                                  static_cast<double>(ehat.data[i])) / maxval * 100.0;
        sum += d;
        sumsq += d * d;
    }
    GlobalError ge;
    ge.voxels = n;
    ge.normalizer = maxval;
    ge.ge_percent = sum / static_cast<double>(n);
    ge.mean_percent = ge.ge_percent;
    const double var = std::max(0.0, sumsq / static_cast<double>(n) -
                                         ge.ge_percent * ge.ge_percent);
    ge.std_percent = std::sqrt(var);
    return ge;
}

std::vector<RegionReportRow> region_report(const ScalarGrid& e, const ScalarGrid& ehat,
                                           const std::vector<RegionMask>& regions) {
    std::vector<RegionReportRow> rows;
    rows.reserve(regions.size());
    for (const auto& r : regions) rows.push_back({r.name, global_error(e, ehat, r)});
    return rows;
}

std::string format_region_report(const std::vector<RegionReportRow>& rows) {
    std::size_t w = 6;
    for (const auto& r : rows) w = std::max(w, r.region.size());
    std::ostringstream out;
    out << "Region";
    out << std::string(w - 6, ' ') << "  GE [%] (mean+-std)\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-*s  %.2f+-%.2f\n", static_cast<int>(w),
                      r.region.c_str(), r.ge.ge_percent, r.ge.std_percent);
        out << buf;
    }
    return out.str();
}

std::string region_report_csv(const std::vector<RegionReportRow>& rows) {
    std::ostringstream out;
    out << "region,ge_percent,mean_percent,std_percent\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.6f,%.6f,%.6f\n", r.region.c_str(),
                      r.ge.ge_percent, r.ge.mean_percent, r.ge.std_percent);
        out << buf;
    }
    return out.str();
}

} // namespace voldose
