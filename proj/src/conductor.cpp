#include "voldose/conductor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace voldose {

double TissueTable::sigma_of(int id) const {
    if (id == 0) return 0.0;
    auto it = entries.find(id);
    if (it == entries.end())
        throw std::out_of_range("tissue id " + std::to_string(id) + " not in table " + tag);
    return it->second.sigma;
}

double TissueTable::sigma_max() const {
    if (entries.empty()) throw std::runtime_error("tissue table " + tag + " is empty");
    double m = 0.0;
    for (const auto& [id, e] : entries) m = std::max(m, e.sigma);
    return m;
}

TissueTable TissueTable::parse(const std::string& text, std::string tag) {
    TissueTable t;
    t.tag = std::move(tag);
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        int id;
        std::string name;
        double sigma;
        if (!(ls >> id)) continue; // blank/comment line
        if (!(ls >> name >> sigma))
            throw std::runtime_error("tissue table line " + std::to_string(lineno) +
                                     ": expected `id name sigma`");
        if (id <= 0) throw std::runtime_error("tissue id must be positive (0 is air)");
        if (!(sigma > 0.0)) throw std::runtime_error("tissue sigma must be positive");
        if (!t.entries.emplace(id, TissueEntry{name, sigma}).second)
            throw std::runtime_error("duplicate tissue id " + std::to_string(id));
    }
    if (t.entries.empty()) throw std::runtime_error("tissue table has no entries");
    return t;
}

std::string TissueTable::serialize() const {
    std::ostringstream out;
    out << "# tissue table " << tag << "  (id name sigma[S/m])\n";
    char buf[96];
    for (const auto& [id, e] : entries) {
        std::snprintf(buf, sizeof(buf), "%d %s %.6g\n", id, e.name.c_str(), e.sigma);
        out << buf;
    }
    return out.str();
}

TissueTable TissueTable::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open tissue table: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path);
}

void TissueTable::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write tissue table: " + path);
    f << serialize();
}

TissueTable builtin_table_a() {
    // Cole-Cole model evaluated at 10 kHz
    return TissueTable::parse(
        "1 blood 0.700\n"
        "2 bone_cancellous 0.080\n"
        "3 bone_cortical 0.020\n"
        "4 cerebellum 0.130\n"
        "5 csf 2.000\n"
        "6 dura 0.500\n"
        "7 fat 0.040\n"
        "8 gray_matter 0.100\n"
        "9 mucous_tissue 0.070\n"
        "10 muscle 0.340\n"
        "11 skin 0.100\n"
        "12 vitreous_humor 1.500\n"
        "13 white_matter 0.070\n",
        "A");
}

TissueTable builtin_table_b() {
    // typical values used in computational studies
    return TissueTable::parse(
        "1 blood 0.700\n"
        "2 bone_cancellous 0.025\n"
        "3 bone_cortical 0.007\n"
        "4 cerebellum 0.276\n"
        "5 csf 1.654\n"
        "6 dura 0.500\n"
        "7 fat 0.040\n"
        "8 gray_matter 0.276\n"
        "9 mucous_tissue 0.070\n"
        "10 muscle 0.400\n"
        "11 skin 0.456\n"
        "12 vitreous_humor 1.500\n"
        "13 white_matter 0.126\n",
        "B");
}

TissueTable builtin_table(const std::string& name) {
    if (name == "A" || name == "a") return builtin_table_a();
    if (name == "B" || name == "b") return builtin_table_b();
    throw std::invalid_argument("unknown builtin tissue table: " + name);
}

NormParams NormParams::from_table(const TissueTable& table, double tau) {
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("tau must be in (0,1)");
    return NormParams{tau, table.sigma_max()};
}

ScalarGrid assign_uniform(const LabelGrid& labels, const TissueTable& table) {
    ScalarGrid out(labels.dims.nx, labels.dims.ny, labels.dims.nz, labels.voxel_mm);
    for (std::size_t i = 0; i < labels.data.size(); ++i)
        out.data[i] = static_cast<float>(table.sigma_of(labels.data[i]));
    return out;
}

ScalarGrid normalize_conductor(const ScalarGrid& cond, const NormParams& p) {
    if (!(p.sigma_max > 0.0)) throw std::invalid_argument("sigma_max must be positive");
    const double scale = (1.0 - p.tau) / p.sigma_max;
    ScalarGrid out(cond.dims.nx, cond.dims.ny, cond.dims.nz, cond.voxel_mm);
    const double limit = p.sigma_max * (1.0 + 1e-9);
    for (std::size_t i = 0; i < cond.data.size(); ++i) {
        const double v = cond.data[i];
        if (v < 0.0 || v > limit)
            throw std::out_of_range("conductivity outside [0, sigma_max]");
        out.data[i] = static_cast<float>(v * scale);
    }
    return out;
}

ScalarGrid denormalize(const ScalarGrid& normalized, const NormParams& p) {
    if (!(p.sigma_max > 0.0)) throw std::invalid_argument("sigma_max must be positive");
    const double scale = p.sigma_max / (1.0 - p.tau);
    ScalarGrid out(normalized.dims.nx, normalized.dims.ny, normalized.dims.nz,
                   normalized.voxel_mm);
    for (std::size_t i = 0; i < normalized.data.size(); ++i) {
        const double v = normalized.data[i];
        if (v < 0.0) throw std::out_of_range("normalized conductor holds negative value");
        out.data[i] = static_cast<float>(v * scale);
    }
    return out;
}

ScalarGrid average_directions(const ScalarGrid& axial, const ScalarGrid& sagittal,
                              const ScalarGrid& coronal) {
    if (axial.dims != sagittal.dims || axial.dims != coronal.dims)
        throw std::invalid_argument("average_directions: dims mismatch");
    ScalarGrid out(axial.dims.nx, axial.dims.ny, axial.dims.nz, axial.voxel_mm);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        // summed in value order so permuting the inputs is bit-exact
        double a = axial.data[i], b = sagittal.data[i], c = coronal.data[i];
        if (a > b) std::swap(a, b);
        if (b > c) std::swap(b, c);
        if (a > b) std::swap(a, b);
        out.data[i] = static_cast<float>((a + b + c) / 3.0);
    }
    return out;
}

namespace {

// median of sorted[lo, hi)
double median_of(const std::vector<double>& sorted, std::size_t lo, std::size_t hi) {
    const std::size_t n = hi - lo;
    const std::size_t mid = lo + n / 2;
    if (n % 2 == 1) return sorted[mid];
    return 0.5 * (sorted[mid - 1] + sorted[mid]);
}

} // namespace

CondStats roi_conductivity_stats(const ScalarGrid& cond, const RegionMask& region) {
    if (cond.dims != region.dims)
        throw std::invalid_argument("roi_conductivity_stats: dims mismatch");
    std::vector<double> vals;
    for (std::size_t i = 0; i < cond.data.size(); ++i)
        if (region.mask[i]) vals.push_back(cond.data[i]);
    if (vals.empty()) throw std::invalid_argument("roi_conductivity_stats: empty region");

    std::sort(vals.begin(), vals.end());
    CondStats s;
    s.voxels = static_cast<std::int64_t>(vals.size());
    s.min = vals.front();
    s.max = vals.back();
    double sum = 0.0;
    for (double v : vals) sum += v;
    s.mean = sum / static_cast<double>(vals.size());
    double ss = 0.0;
    for (double v : vals) ss += (v - s.mean) * (v - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(vals.size()));

    const std::size_t n = vals.size();
    s.median = median_of(vals, 0, n);
    if (n == 1) {
        s.q1 = s.q3 = vals[0];
    } else {
        // Tukey hinges: halves exclude the median element when n is odd
        s.q1 = median_of(vals, 0, n / 2);
        s.q3 = median_of(vals, (n + 1) / 2, n);
    }
    return s;
}

} // namespace voldose
