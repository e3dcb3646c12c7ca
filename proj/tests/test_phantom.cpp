#include <doctest.h>

#include <set>
#include <stdexcept>

#include "voldose/phantom.hpp"

using namespace voldose;

namespace {

// two skin-over-bone shells, zero noise
PhantomSpec two_shell_spec() {
    PhantomSpec spec;
    spec.dims = {24, 24, 24};
    spec.voxel_mm = 1.0f;
    spec.seed = 42;
    spec.shells = {
        {11, {10.0, 9.0, 8.0}, {12.0, 12.0, 12.0}, 170.0, 60.0, 0.0},
        {3, {7.0, 6.0, 5.0}, {12.0, 12.0, 12.0}, 60.0, 20.0, 0.0},
    };
    return spec;
}

PhantomSpec three_shell_spec() {
    auto spec = two_shell_spec();
    spec.shells.push_back({8, {4.0, 3.5, 3.0}, {12.0, 12.0, 12.0}, 110.0, 140.0, 0.0});
    return spec;
}

} // namespace

TEST_SUITE_BEGIN("phantom");

TEST_CASE("zero-noise two-shell phantom: T1 takes exactly three values") {
    const auto vols = generate_phantom(two_shell_spec(), builtin_table_a());
    std::set<float> values(vols.t1.data.begin(), vols.t1.data.end());
    CHECK(values == std::set<float>{0.0f, 60.0f, 170.0f});
}

TEST_CASE("same spec and seed give bit-identical volumes") {
    auto spec = two_shell_spec();
    spec.shells[0].noise_std = 3.0;
    spec.shells[1].noise_std = 2.0;
    const auto a = generate_phantom(spec, builtin_table_a());
    const auto b = generate_phantom(spec, builtin_table_a());
    CHECK(a.t1.data == b.t1.data);
    CHECK(a.t2.data == b.t2.data);
    CHECK(a.labels.data == b.labels.data);

    spec.seed = 43;
    const auto c = generate_phantom(spec, builtin_table_a());
    CHECK(a.t1.data != c.t1.data);
}

TEST_CASE("label histogram matches analytic ellipsoid membership") {
    const auto spec = three_shell_spec();
    const auto vols = generate_phantom(spec, builtin_table_a());

    // analytic oracle: count voxel centers inside each ellipsoid
    std::vector<std::int64_t> inside(spec.shells.size(), 0);
    std::vector<std::int64_t> labelled(spec.shells.size(), 0);
    std::set<int> support;
    for (int k = 0; k < spec.dims.nz; ++k)
        for (int j = 0; j < spec.dims.ny; ++j)
            for (int i = 0; i < spec.dims.nx; ++i) {
                const double x = i + 0.5, y = j + 0.5, z = k + 0.5;
                for (std::size_t s = 0; s < spec.shells.size(); ++s)
                    if (inside_shell(spec.shells[s], x, y, z)) ++inside[s];
                const int lab = vols.labels.at(i, j, k);
                support.insert(lab);
                for (std::size_t s = 0; s < spec.shells.size(); ++s)
                    if (lab == spec.shells[s].tissue) ++labelled[s];
            }

    CHECK(support == std::set<int>{0, 11, 3, 8});
    // outer > middle > inner
    CHECK(inside[0] > inside[1]);
    CHECK(inside[1] > inside[2]);
    // innermost-wins labelling: voxels labelled with shell s = inside(s) - inside(s+1)
    for (std::size_t s = 0; s < spec.shells.size(); ++s) {
        const std::int64_t expect =
            inside[s] - (s + 1 < spec.shells.size() ? inside[s + 1] : 0);
        CHECK(labelled[s] == expect);
    }

    // containment: every labelled voxel lies inside its shell
    for (int k = 0; k < spec.dims.nz; ++k)
        for (int j = 0; j < spec.dims.ny; ++j)
            for (int i = 0; i < spec.dims.nx; ++i) {
                const int lab = vols.labels.at(i, j, k);
                if (lab == 0) continue;
                for (const auto& sh : spec.shells)
                    if (sh.tissue == lab)
                        CHECK(inside_shell(sh, i + 0.5, j + 0.5, k + 0.5));
            }
}

TEST_CASE("non-nested shells and unknown tissues are rejected") {
    auto spec = two_shell_spec();
    spec.shells[1].semi_axes_mm = {11.0, 6.0, 5.0}; // pokes out of the outer shell
    CHECK_THROWS_AS(generate_phantom(spec, builtin_table_a()), std::invalid_argument);

    spec = two_shell_spec();
    spec.shells[1].tissue = 77;
    CHECK_THROWS_AS(generate_phantom(spec, builtin_table_a()), std::invalid_argument);
}

TEST_CASE("phantom_dataset pairs volumes and keeps dims") {
    const std::vector<PhantomSpec> specs{two_shell_spec(), three_shell_spec()};
    const auto set = phantom_dataset(specs, {builtin_table_a()}, 0.1);
    REQUIRE(set.samples.size() == 2);
    for (const auto& s : set.samples) {
        REQUIRE(s.inputs.size() == 2);
        REQUIRE(s.targets.size() == 1);
        CHECK(s.inputs[0].dims == specs[0].dims);
        CHECK(s.targets[0].dims == specs[0].dims);
    }
    CHECK_THROWS_AS(phantom_dataset({}, {builtin_table_a()}, 0.1), std::invalid_argument);
}

TEST_CASE("dataset target values come from the normalized table") {
    const auto table = builtin_table_a();
    const auto p = NormParams::from_table(table, 0.1);
    const auto set = phantom_dataset({three_shell_spec()}, {table}, 0.1);
    std::set<float> allowed{0.0f};
    ScalarGrid one(1, 1, 1);
    for (const auto& [id, e] : table.entries) {
        one.data[0] = static_cast<float>(e.sigma);
        allowed.insert(normalize_conductor(one, p).data[0]);
    }
    for (float v : set.samples[0].targets[0].data) CHECK(allowed.count(v) == 1);
}

TEST_CASE("phantom spec text round-trip") {
    auto spec = three_shell_spec();
    spec.shells[0].noise_std = 2.5;
    spec.air_noise = 0.25;
    const auto text = spec.serialize();
    const auto back = PhantomSpec::parse(text);
    CHECK(back.dims == spec.dims);
    CHECK(back.seed == spec.seed);
    CHECK(back.air_noise == doctest::Approx(spec.air_noise));
    REQUIRE(back.shells.size() == spec.shells.size());
    for (std::size_t i = 0; i < spec.shells.size(); ++i) {
        CHECK(back.shells[i].tissue == spec.shells[i].tissue);
        CHECK(back.shells[i].semi_axes_mm == spec.shells[i].semi_axes_mm);
        CHECK(back.shells[i].t1_mean == doctest::Approx(spec.shells[i].t1_mean));
        CHECK(back.shells[i].noise_std == doctest::Approx(spec.shells[i].noise_std));
    }
    // identical phantom from the round-tripped spec
    const auto a = generate_phantom(spec, builtin_table_a());
    const auto b = generate_phantom(back, builtin_table_a());
    CHECK(a.t1.data == b.t1.data);
}

TEST_SUITE_END();
