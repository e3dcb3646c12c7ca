#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "voldose/metrics.hpp"
#include "voldose/rng.hpp"

using namespace voldose;

namespace {

// scalar reference loop, independent of the implementation
double ge_reference(const ScalarGrid& e, const ScalarGrid& ehat, const RegionMask& m) {
    double mx = 0.0;
    std::int64_t n = 0;
    for (std::size_t i = 0; i < e.data.size(); ++i) {
        if (!m.mask[i]) continue;
        ++n;
        if (e.data[i] > mx) mx = e.data[i];
        if (ehat.data[i] > mx) mx = ehat.data[i];
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < e.data.size(); ++i)
        if (m.mask[i]) sum += std::abs(static_cast<double>(e.data[i]) - ehat.data[i]);
    return sum / static_cast<double>(n) / mx * 100.0;
}

RegionMask full_mask(const GridDims& d) {
    RegionMask m(d, 1.0f, "all");
    std::fill(m.mask.begin(), m.mask.end(), 1);
    return m;
}

} // namespace

TEST_SUITE_BEGIN("metrics");

TEST_CASE("sphere_roi: zero radius at a voxel center selects one voxel") {
    const auto m = sphere_roi({2.5, 2.5, 2.5}, 0.0, {5, 5, 5}, 1.0f);
    CHECK(m.voxel_count() == 1);
    CHECK(m.at(2, 2, 2));
}

TEST_CASE("sphere_roi: radius 2 on the unit lattice selects 33 voxels") {
    // lattice points with x^2+y^2+z^2 <= 4: 1 + 6 + 12 + 6 + 8 = 33
    const auto m = sphere_roi({5.5, 5.5, 5.5}, 2.0, {11, 11, 11}, 1.0f);
    CHECK(m.voxel_count() == 33);
}

TEST_CASE("sphere_roi: radius 5 count matches brute-force enumeration") {
    std::int64_t expect = 0;
    for (int z = -5; z <= 5; ++z)
        for (int y = -5; y <= 5; ++y)
            for (int x = -5; x <= 5; ++x)
                if (x * x + y * y + z * z <= 25) ++expect;
    const auto m = sphere_roi({8.5, 8.5, 8.5}, 5.0, {17, 17, 17}, 1.0f);
    CHECK(m.voxel_count() == expect);
}

TEST_CASE("sphere_roi outside the grid throws") {
    CHECK_THROWS_AS(sphere_roi({100.0, 100.0, 100.0}, 1.0, {4, 4, 4}, 1.0f),
                    std::runtime_error);
}

TEST_CASE("global_error: identical fields give GE 0") {
    ScalarGrid e(3, 3, 3, 1.0f, 1.5f);
    const auto ge = global_error(e, e, full_mask(e.dims));
    CHECK(ge.ge_percent == doctest::Approx(0.0));
    CHECK(ge.std_percent == doctest::Approx(0.0));
}

TEST_CASE("global_error: two-voxel hand example gives 50%") {
    ScalarGrid e(2, 1, 1), ehat(2, 1, 1);
    e.data = {2.0f, 0.0f};
    ehat.data = {0.0f, 0.0f};
    const auto ge = global_error(e, ehat, full_mask(e.dims));
    CHECK(ge.ge_percent == doctest::Approx(50.0));
    CHECK(ge.normalizer == doctest::Approx(2.0));
}

TEST_CASE("global_error: symmetric in its arguments and scale invariant") {
    ScalarGrid e(6, 5, 4), ehat(6, 5, 4);
    Rng rng(33);
    for (auto& v : e.data) v = static_cast<float>(rng.uniform01() * 3.0);
    for (auto& v : ehat.data) v = static_cast<float>(rng.uniform01() * 3.0);
    const auto m = full_mask(e.dims);

    const auto ab = global_error(e, ehat, m);
    const auto ba = global_error(ehat, e, m);
    CHECK(ab.ge_percent == doctest::Approx(ba.ge_percent).epsilon(1e-12));

    auto e2 = e, h2 = ehat;
    for (auto& v : e2.data) v *= 7.5f;
    for (auto& v : h2.data) v *= 7.5f;
    const auto scaled = global_error(e2, h2, m);
    CHECK(scaled.ge_percent == doctest::Approx(ab.ge_percent).epsilon(1e-5));
}

TEST_CASE("global_error matches the scalar reference loop to 1e-12") {
    ScalarGrid e(8, 7, 6), ehat(8, 7, 6);
    Rng rng(44);
    for (auto& v : e.data) v = static_cast<float>(rng.uniform01());
    for (auto& v : ehat.data) v = static_cast<float>(rng.uniform01());
    RegionMask m(e.dims, 1.0f, "half");
    for (std::size_t i = 0; i < m.mask.size(); ++i) m.mask[i] = rng.below(2) ? 1 : 0;

    const auto ge = global_error(e, ehat, m);
    const double ref = ge_reference(e, ehat, m);
    CHECK(std::abs(ge.ge_percent - ref) <= 1e-12 * std::max(1.0, std::abs(ref)));
}

TEST_CASE("global_error error cases: empty region, all-zero fields") {
    ScalarGrid z(2, 2, 2);
    RegionMask empty(z.dims, 1.0f, "empty");
    CHECK_THROWS_AS(global_error(z, z, empty), std::invalid_argument);
    CHECK_THROWS_AS(global_error(z, z, full_mask(z.dims)), std::runtime_error);
}

TEST_CASE("region_report: identical fields row prints 0.00+-0.00") {
    ScalarGrid e(3, 3, 3, 1.0f, 2.0f);
    const auto rows = region_report(e, e, {full_mask(e.dims)});
    REQUIRE(rows.size() == 1);
    const auto text = format_region_report(rows);
    CHECK(text.find("0.00+-0.00") != std::string::npos);
    const auto csv = region_report_csv(rows);
    CHECK(csv.find("all,") != std::string::npos);
}

TEST_CASE("region_report: each row uses its own region normalizer") {
    // region A holds the big values, region B small ones; per-region
    // normalizers make the two rows match independent hand computations
    ScalarGrid e(4, 1, 1), ehat(4, 1, 1);
    e.data = {10.0f, 8.0f, 1.0f, 0.5f};
    ehat.data = {9.0f, 8.0f, 0.5f, 0.5f};
    RegionMask a(e.dims, 1.0f, "a"), b(e.dims, 1.0f, "b");
    a.mask = {1, 1, 0, 0};
    b.mask = {0, 0, 1, 1};
    const auto rows = region_report(e, ehat, {a, b});
    CHECK(rows[0].ge.ge_percent == doctest::Approx(0.5 / 10.0 * 100.0)); // (1+0)/2 /10
    CHECK(rows[1].ge.ge_percent == doctest::Approx(0.25 / 1.0 * 100.0)); // (0.5+0)/2 /1
}

TEST_SUITE_END();
