#include "voldose/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "voldose/rng.hpp"

namespace voldose {

bool inside_shell(const Shell& s, double x_mm, double y_mm, double z_mm) {
    const double dx = (x_mm - s.center_mm[0]) / s.semi_axes_mm[0];
    const double dy = (y_mm - s.center_mm[1]) / s.semi_axes_mm[1];
    const double dz = (z_mm - s.center_mm[2]) / s.semi_axes_mm[2];
    return dx * dx + dy * dy + dz * dz <= 1.0;
}

namespace {

// Sufficient nesting test: map the outer ellipsoid to the unit ball and
// bound the inner one by |center'| + max(semi_axes'). Conservative for
// strongly offset shells, exact for concentric ones.
bool nested_within(const Shell& inner, const Shell& outer) {
    double c2 = 0.0, amax = 0.0;
    for (int d = 0; d < 3; ++d) {
        const double c = (inner.center_mm[d] - outer.center_mm[d]) / outer.semi_axes_mm[d];
        c2 += c * c;
        amax = std::max(amax, inner.semi_axes_mm[d] / outer.semi_axes_mm[d]);
    }
    return std::sqrt(c2) + amax < 1.0;
}

} // namespace

void PhantomSpec::validate(const TissueTable& table) const {
    if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0)
        throw std::invalid_argument("phantom dims must be positive");
    if (!(voxel_mm > 0.0f)) throw std::invalid_argument("voxel size must be positive");
    if (shells.empty()) throw std::invalid_argument("phantom needs at least one shell");
    if (air_noise < 0.0) throw std::invalid_argument("noise std must be >= 0");

    std::set<int> ids;
    for (const auto& s : shells) {
        if (s.tissue <= 0)
            throw std::invalid_argument("shell tissue id must be positive");
        if (!table.has(s.tissue))
            throw std::invalid_argument("shell tissue id " + std::to_string(s.tissue) +
                                        " missing from table " + table.tag);
        if (!ids.insert(s.tissue).second)
            throw std::invalid_argument("duplicate shell tissue id");
        for (double a : s.semi_axes_mm)
            if (!(a > 0.0)) throw std::invalid_argument("shell semi-axes must be positive");
        if (s.noise_std < 0.0) throw std::invalid_argument("noise std must be >= 0");
    }
    for (std::size_t i = 1; i < shells.size(); ++i)
        if (!nested_within(shells[i], shells[i - 1]))
            throw std::invalid_argument("shells are not strictly nested (shell " +
                                        std::to_string(i) + ")");
}

PhantomVolumes generate_phantom(const PhantomSpec& spec, const TissueTable& table) {
    spec.validate(table);
    const auto& d = spec.dims;
    PhantomVolumes out{LabelGrid(d.nx, d.ny, d.nz, spec.voxel_mm),
                       ScalarGrid(d.nx, d.ny, d.nz, spec.voxel_mm),
                       ScalarGrid(d.nx, d.ny, d.nz, spec.voxel_mm)};

    const double h = spec.voxel_mm;
    for (int k = 0; k < d.nz; ++k)
        for (int j = 0; j < d.ny; ++j)
            for (int i = 0; i < d.nx; ++i) {
                const double x = (i + 0.5) * h, y = (j + 0.5) * h, z = (k + 0.5) * h;
                std::uint16_t label = 0;
                // shells are outermost-first; the innermost hit wins
                for (std::size_t s = 0; s < spec.shells.size(); ++s)
                    if (inside_shell(spec.shells[s], x, y, z))
                        label = static_cast<std::uint16_t>(spec.shells[s].tissue);
                out.labels.at(i, j, k) = label;
            }

    std::map<int, const Shell*> by_tissue;
    for (const auto& s : spec.shells) by_tissue[s.tissue] = &s;

    Rng rng(spec.seed);
    auto fill = [&](ScalarGrid& g, bool t1) {
        for (std::size_t v = 0; v < g.data.size(); ++v) {
            const int label = out.labels.data[v];
            double mean = 0.0, std_dev = spec.air_noise;
            if (label != 0) {
                const Shell* s = by_tissue.at(label);
                mean = t1 ? s->t1_mean : s->t2_mean;
                std_dev = s->noise_std;
            }
            g.data[v] = static_cast<float>(std_dev > 0.0 ? rng.normal(mean, std_dev) : mean);
        }
    };
    fill(out.t1, true);
    fill(out.t2, false);
    return out;
}

TrainingSet phantom_dataset(const std::vector<PhantomSpec>& specs,
                            const std::vector<TissueTable>& tables, double tau) {
    if (specs.empty()) throw std::invalid_argument("phantom_dataset: no specs");
    if (tables.empty()) throw std::invalid_argument("phantom_dataset: no tissue tables");

    TrainingSet set;
    set.samples.reserve(specs.size());
    for (const auto& spec : specs) {
        auto vols = generate_phantom(spec, tables.front());
        TrainingSample sample;
        sample.inputs.push_back(normalize_mri(vols.t1));
        sample.inputs.push_back(normalize_mri(vols.t2));
        for (const auto& table : tables) {
            const auto p = NormParams::from_table(table, tau);
            sample.targets.push_back(normalize_conductor(assign_uniform(vols.labels, table), p));
        }
        sample.labels = std::move(vols.labels);
        set.samples.push_back(std::move(sample));
    }
    return set;
}

// ---------------------------------------------------------------------------
// text form

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::vector<double> parse_numbers(const std::string& v, std::size_t expect,
                                  const std::string& key) {
    std::istringstream in(v);
    std::vector<double> out;
    double x;
    while (in >> x) out.push_back(x);
    if (out.size() != expect)
        throw std::runtime_error("phantom spec key `" + key + "` expects " +
                                 std::to_string(expect) + " number(s)");
    return out;
}

} // namespace

PhantomSpec PhantomSpec::parse(const std::string& text) {
    PhantomSpec spec;
    spec.shells.clear();
    std::map<int, Shell> shells;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("phantom spec: expected `key = value`: " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));

        if (key == "dims") {
            auto v = parse_numbers(val, 3, key);
            spec.dims = {static_cast<int>(v[0]), static_cast<int>(v[1]),
                         static_cast<int>(v[2])};
        } else if (key == "voxel_mm") {
            spec.voxel_mm = static_cast<float>(parse_numbers(val, 1, key)[0]);
        } else if (key == "seed") {
            spec.seed = static_cast<std::uint64_t>(parse_numbers(val, 1, key)[0]);
        } else if (key == "air_noise") {
            spec.air_noise = parse_numbers(val, 1, key)[0];
        } else if (key.rfind("shell.", 0) == 0) {
            const auto dot = key.find('.', 6);
            if (dot == std::string::npos)
                throw std::runtime_error("phantom spec: malformed shell key: " + key);
            const int idx = std::stoi(key.substr(6, dot - 6));
            const std::string field = key.substr(dot + 1);
            Shell& s = shells[idx];
            if (field == "tissue") s.tissue = static_cast<int>(parse_numbers(val, 1, key)[0]);
            else if (field == "axes") {
                auto v = parse_numbers(val, 3, key);
                s.semi_axes_mm = {v[0], v[1], v[2]};
            } else if (field == "center") {
                auto v = parse_numbers(val, 3, key);
                s.center_mm = {v[0], v[1], v[2]};
            } else if (field == "t1") s.t1_mean = parse_numbers(val, 1, key)[0];
            else if (field == "t2") s.t2_mean = parse_numbers(val, 1, key)[0];
            else if (field == "noise") s.noise_std = parse_numbers(val, 1, key)[0];
            else throw std::runtime_error("phantom spec: unknown shell field: " + key);
        } else {
            throw std::runtime_error("phantom spec: unknown key: " + key);
        }
    }
    int next = 0;
    for (const auto& [idx, s] : shells) {
        if (idx != next++)
            throw std::runtime_error("phantom spec: shell indices must be 0..N-1");
        spec.shells.push_back(s);
    }
    return spec;
}

std::string PhantomSpec::serialize() const {
    std::ostringstream out;
    out << "dims = " << dims.nx << ' ' << dims.ny << ' ' << dims.nz << '\n';
    char buf[160];
    std::snprintf(buf, sizeof(buf), "voxel_mm = %.9g\n", static_cast<double>(voxel_mm));
    out << buf;
    out << "seed = " << seed << '\n';
    std::snprintf(buf, sizeof(buf), "air_noise = %.9g\n", air_noise);
    out << buf;
    for (std::size_t i = 0; i < shells.size(); ++i) {
        const Shell& s = shells[i];
        out << "shell." << i << ".tissue = " << s.tissue << '\n';
        std::snprintf(buf, sizeof(buf), "shell.%zu.axes = %.9g %.9g %.9g\n", i,
                      s.semi_axes_mm[0], s.semi_axes_mm[1], s.semi_axes_mm[2]);
        out << buf;
        std::snprintf(buf, sizeof(buf), "shell.%zu.center = %.9g %.9g %.9g\n", i,
                      s.center_mm[0], s.center_mm[1], s.center_mm[2]);
        out << buf;
        std::snprintf(buf, sizeof(buf), "shell.%zu.t1 = %.9g\n", i, s.t1_mean);
        out << buf;
        std::snprintf(buf, sizeof(buf), "shell.%zu.t2 = %.9g\n", i, s.t2_mean);
        out << buf;
        std::snprintf(buf, sizeof(buf), "shell.%zu.noise = %.9g\n", i, s.noise_std);
        out << buf;
    }
    return out.str();
}

PhantomSpec PhantomSpec::load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open phantom spec: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
}

void PhantomSpec::save(const std::string& path) const {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write phantom spec: " + path);
    f << serialize();
}

} // namespace voldose
