#include <doctest.h>

#include <filesystem>
#include <stdexcept>

#include "voldose/conductor.hpp"
#include "voldose/rng.hpp"

using namespace voldose;

namespace {
constexpr int kGm = 8, kWm = 13, kCsf = 5;
}

TEST_SUITE_BEGIN("conductor");

TEST_CASE("table A holds the Cole-Cole 10 kHz values") {
    const auto t = builtin_table_a();
    CHECK(t.sigma_of(kGm) == doctest::Approx(0.100));
    CHECK(t.sigma_of(kCsf) == doctest::Approx(2.000));
    CHECK(t.sigma_of(kWm) == doctest::Approx(0.070));
    CHECK(t.sigma_max() == doctest::Approx(2.000));
    CHECK(t.sigma_of(0) == 0.0); // air
}

TEST_CASE("table B holds the typical computational values") {
    const auto t = builtin_table_b();
    CHECK(t.sigma_of(kGm) == doctest::Approx(0.276));
    CHECK(t.sigma_of(kCsf) == doctest::Approx(1.654));
    CHECK(t.sigma_of(11) == doctest::Approx(0.456)); // skin
    CHECK(t.sigma_max() == doctest::Approx(1.654));
}

TEST_CASE("assign_uniform maps labels to table values and rejects unknown ids") {
    LabelGrid labels(2, 1, 1);
    labels.data = {static_cast<std::uint16_t>(kGm), static_cast<std::uint16_t>(kCsf)};
    const auto table = builtin_table_a();
    const auto cond = assign_uniform(labels, table);
    CHECK(cond.data[0] == doctest::Approx(0.100));
    CHECK(cond.data[1] == doctest::Approx(2.000));

    labels.data[1] = 99;
    CHECK_THROWS_AS(assign_uniform(labels, table), std::out_of_range);
}

TEST_CASE("normalize_conductor: table A arithmetic with tau = 0.1") {
    const auto p = NormParams::from_table(builtin_table_a(), 0.1);
    ScalarGrid cond(3, 1, 1);
    cond.data = {2.000f, 0.100f, 0.0f};
    const auto n = normalize_conductor(cond, p);
    CHECK(n.data[0] == doctest::Approx(0.900)); // CSF: 2.0 * 0.9/2.0
    CHECK(n.data[1] == doctest::Approx(0.045)); // GM: 0.1 * 0.9/2.0
    CHECK(n.data[2] == doctest::Approx(0.0));   // air stays at the zero fixed point
}

TEST_CASE("normalize_conductor rejects values above sigma_max") {
    const auto p = NormParams::from_table(builtin_table_a(), 0.1);
    ScalarGrid cond(1, 1, 1, 1.0f, 2.5f);
    CHECK_THROWS_AS(normalize_conductor(cond, p), std::out_of_range);
}

TEST_CASE("denormalize: 0.9 maps back to 2.0 S/m for table A") {
    const auto p = NormParams::from_table(builtin_table_a(), 0.1);
    ScalarGrid l(2, 1, 1);
    l.data = {0.9f, 0.0f};
    const auto c = denormalize(l, p);
    CHECK(c.data[0] == doctest::Approx(2.000));
    CHECK(c.data[1] == doctest::Approx(0.0));

    l.data[0] = -0.1f;
    CHECK_THROWS_AS(denormalize(l, p), std::out_of_range);
}

TEST_CASE("normalize/denormalize round-trip within 1e-6 relative for both tables") {
    for (const auto& table : {builtin_table_a(), builtin_table_b()}) {
        const auto p = NormParams::from_table(table, 0.1);
        ScalarGrid cond(4, 4, 4);
        Rng rng(21);
        for (auto& v : cond.data)
            v = static_cast<float>(rng.uniform01() * table.sigma_max());
        const auto round = denormalize(normalize_conductor(cond, p), p);
        for (std::size_t i = 0; i < cond.data.size(); ++i) {
            const double ref = cond.data[i];
            CHECK(std::abs(round.data[i] - ref) <= 1e-6 * std::max(1.0, std::abs(ref)));
        }
    }
}

TEST_CASE("normalize_conductor preserves the order of table values") {
    const auto table = builtin_table_a();
    const auto p = NormParams::from_table(table, 0.1);
    double prev = -1.0;
    ScalarGrid one(1, 1, 1);
    // std::map iterates ids in order; collect normalized values sorted by sigma
    std::vector<double> sigmas;
    for (const auto& [id, e] : table.entries) sigmas.push_back(e.sigma);
    std::sort(sigmas.begin(), sigmas.end());
    for (double s : sigmas) {
        one.data[0] = static_cast<float>(s);
        const double n = normalize_conductor(one, p).data[0];
        CHECK(n >= prev);
        CHECK(n <= 1.0 - 0.1 + 1e-9);
        prev = n;
    }
}

TEST_CASE("average_directions: mean, idempotence, permutation invariance") {
    ScalarGrid a(1, 1, 1, 1.0f, 0.3f), s(1, 1, 1, 1.0f, 0.6f), c(1, 1, 1, 1.0f, 0.9f);
    CHECK(average_directions(a, s, c).data[0] == doctest::Approx(0.6));
    CHECK(average_directions(c, a, s).data[0] ==
          doctest::Approx(average_directions(a, s, c).data[0]));
    CHECK(average_directions(a, a, a).data[0] == doctest::Approx(0.3));

    ScalarGrid wrong(2, 1, 1);
    CHECK_THROWS_AS(average_directions(a, s, wrong), std::invalid_argument);
}

TEST_CASE("roi stats: quartile midpoint convention on {1,2,3,4}") {
    ScalarGrid cond(4, 1, 1);
    cond.data = {1.0f, 2.0f, 3.0f, 4.0f};
    RegionMask all(cond.dims, 1.0f, "all");
    std::fill(all.mask.begin(), all.mask.end(), 1);
    const auto st = roi_conductivity_stats(cond, all);
    CHECK(st.median == doctest::Approx(2.5));
    CHECK(st.q1 == doctest::Approx(1.5));
    CHECK(st.q3 == doctest::Approx(3.5));
    CHECK(st.min == doctest::Approx(1.0));
    CHECK(st.max == doctest::Approx(4.0));
}

TEST_CASE("roi stats: uniform WM region has zero spread and the table mean") {
    LabelGrid labels(3, 3, 3);
    for (auto& v : labels.data) v = 13; // WM
    const auto cond = assign_uniform(labels, builtin_table_a());
    RegionMask all(cond.dims, 1.0f, "wm");
    std::fill(all.mask.begin(), all.mask.end(), 1);
    const auto st = roi_conductivity_stats(cond, all);
    CHECK(st.mean == doctest::Approx(0.070));
    CHECK(st.stddev == doctest::Approx(0.0));
}

TEST_CASE("roi stats: empty region throws") {
    ScalarGrid cond(2, 2, 2);
    RegionMask none(cond.dims, 1.0f, "empty");
    CHECK_THROWS_AS(roi_conductivity_stats(cond, none), std::invalid_argument);
}

TEST_CASE("tissue table text round-trip") {
    const auto path = (std::filesystem::temp_directory_path() / "voldose_table.txt").string();
    const auto t = builtin_table_a();
    t.save(path);
    const auto r = TissueTable::load(path);
    REQUIRE(r.entries.size() == t.entries.size());
    for (const auto& [id, e] : t.entries) {
        CHECK(r.entries.at(id).name == e.name);
        CHECK(r.entries.at(id).sigma == doctest::Approx(e.sigma));
    }
    std::filesystem::remove(path);
}

TEST_SUITE_END();
