#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <stdexcept>

#include "voldose/condnet.hpp"
#include "voldose/phantom.hpp"
#include "voldose/rng.hpp"

using namespace voldose;

namespace {

Tensor4f random_slices(int n, int side, std::uint64_t seed) {
    Tensor4f t(n, 1, side, side);
    Rng rng(seed);
    for (auto& v : t.v) v = static_cast<float>(rng.uniform01());
    return t;
}

void zero_weights(Network& net) {
    for (auto& p : net.params())
        if (p.trainable) std::fill_n(p.values, p.count, 0.0f);
}

PhantomSpec small_spec(std::uint64_t seed) {
    PhantomSpec spec;
    spec.dims = {32, 32, 32};
    spec.voxel_mm = 1.0f;
    spec.seed = seed;
    spec.shells = {
        {11, {13.0, 12.0, 11.0}, {16.0, 16.0, 16.0}, 170.0, 60.0, 0.0},
        {3, {10.0, 9.5, 8.5}, {16.0, 16.0, 16.0}, 60.0, 20.0, 0.0},
        {8, {7.0, 6.5, 6.0}, {16.0, 16.0, 16.0}, 110.0, 140.0, 0.0},
    };
    return spec;
}

} // namespace

TEST_SUITE_BEGIN("condnet");

TEST_CASE("shape ledger at the published scale: U=2 V=1 I=6 p=8") {
    const auto cfg = NetConfig::make(2, 1, 6, 8);
    auto net = build_network(cfg, 1);
    const auto ledger = net.shape_ledger();

    // hub: U * 2^I channels at [2^(p+1-I)]^2
    CHECK(ledger.at("hub") == std::pair<int, int>{2 * 64, 8});
    CHECK(ledger.at("out0") == std::pair<int, int>{1, 256});
    // first encoder level after pooling: 4 x 128^2
    CHECK(ledger.at("enc0.l1.pooled") == std::pair<int, int>{4, 128});
    CHECK(ledger.at("enc0.l1.act") == std::pair<int, int>{4, 256});

    // forward checks the ledger at every stage
    const auto out = forward_infer(net, {random_slices(1, 256, 2), random_slices(1, 256, 3)});
    REQUIRE(out.size() == 1);
    CHECK(out[0].h == 256);
    CHECK(out[0].w == 256);
}

TEST_CASE("shape ledger at desk scale: parameterized formulas hold") {
    const auto cfg = NetConfig::make(2, 1, 4, 6);
    auto net = build_network(cfg, 1);
    const auto ledger = net.shape_ledger();
    for (int i = 1; i <= cfg.levels(); ++i) {
        for (int u = 0; u < 2; ++u) {
            const auto act = ledger.at("enc" + std::to_string(u) + ".l" + std::to_string(i) + ".act");
            CHECK(act.first == (1 << (i + 1)));
            CHECK(act.second == (1 << (6 + 1 - i)));
            const auto pool =
                ledger.at("enc" + std::to_string(u) + ".l" + std::to_string(i) + ".pooled");
            CHECK(pool.first == (1 << (i + 1)));
            CHECK(pool.second == (1 << (6 - i)));
        }
        const auto cnv = ledger.at("dec0.l" + std::to_string(i) + ".cnv");
        CHECK(cnv.first == (1 << (i + 2)));
        CHECK(cnv.second == (1 << (6 - i)));
        const auto up = ledger.at("dec0.l" + std::to_string(i) + ".up");
        CHECK(up.first == (1 << (i + 1)));
        CHECK(up.second == (1 << (6 + 1 - i)));
    }
    CHECK(ledger.at("hub") == std::pair<int, int>{2 * 16, 8});

    const auto out = forward_infer(net, {random_slices(2, 64, 4), random_slices(2, 64, 5)});
    CHECK(out[0].n == 2);
    CHECK(out[0].h == 64);
}

TEST_CASE("invalid depth/size combinations are rejected") {
    CHECK_THROWS_AS(NetConfig::make(2, 1, 1, 6), std::invalid_argument);
    CHECK_THROWS_AS(NetConfig::make(2, 1, 6, 6), std::invalid_argument); // p-I < 1
    CHECK_THROWS_AS(NetConfig::make(2, 1, 4, 6, 4), std::invalid_argument); // even kernel
}

TEST_CASE("same seed builds identical parameter bytes") {
    const auto cfg = NetConfig::make(2, 1, 3, 5);
    auto a = build_network(cfg, 7);
    auto b = build_network(cfg, 7);
    auto c = build_network(cfg, 8);
    auto pa = a.params(), pb = b.params(), pc = c.params();
    bool all_same = true, any_diff_seed = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        if (std::memcmp(pa[i].values, pb[i].values, pa[i].count * sizeof(float)) != 0)
            all_same = false;
        if (std::memcmp(pa[i].values, pc[i].values, pa[i].count * sizeof(float)) != 0)
            any_diff_seed = true;
    }
    CHECK(all_same);
    CHECK(any_diff_seed);
}

TEST_CASE("zero-weight network outputs exactly 0.5 everywhere") {
    const auto cfg = NetConfig::make(2, 1, 3, 5);
    auto net = build_network(cfg, 1);
    zero_weights(net);
    const auto out = forward_infer(net, {random_slices(1, 32, 9), random_slices(1, 32, 10)});
    for (float v : out[0].v) CHECK(v == doctest::Approx(0.5));
}

TEST_CASE("batched forward equals stacked per-slice forwards in inference mode") {
    const auto cfg = NetConfig::make(2, 1, 3, 5);
    const auto net = build_network(cfg, 11);
    const auto x0 = random_slices(3, 32, 12);
    const auto x1 = random_slices(3, 32, 13);
    const auto batched = forward_infer(net, {x0, x1});
    for (int n = 0; n < 3; ++n) {
        Tensor4f a(1, 1, 32, 32), b(1, 1, 32, 32);
        std::copy_n(x0.plane_ptr(n, 0), x0.plane(), a.plane_ptr(0, 0));
        std::copy_n(x1.plane_ptr(n, 0), x1.plane(), b.plane_ptr(0, 0));
        const auto single = forward_infer(net, {a, b});
        for (std::size_t i = 0; i < single[0].size(); ++i)
            CHECK(single[0].v[i] == batched[0].v[batched[0].index(n, 0, 0, 0) + i]);
    }
}

TEST_CASE("forward rejects wrong slice sizes and non-finite input") {
    const auto cfg = NetConfig::make(2, 1, 3, 5);
    const auto net = build_network(cfg, 1);
    CHECK_THROWS_AS(forward_infer(net, {random_slices(1, 16, 1), random_slices(1, 16, 2)}),
                    std::invalid_argument);
    auto bad = random_slices(1, 32, 3);
    bad.v[5] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(forward_infer(net, {bad, random_slices(1, 32, 4)}), std::invalid_argument);
}

TEST_CASE("adam: zero gradient is a fixed point") {
    const auto cfg = NetConfig::make(1, 1, 3, 5);
    auto net = build_network(cfg, 5);
    auto params = net.params();
    std::vector<float> before;
    for (auto& p : params) before.insert(before.end(), p.values, p.values + p.count);
    net.zero_grads();
    auto state = make_adam_state(params);
    adam_step(params, state, {});
    std::vector<float> after;
    for (auto& p : params) after.insert(after.end(), p.values, p.values + p.count);
    CHECK(before == after);
    for (const auto& m : state.m)
        for (float v : m) CHECK(v == 0.0f);
}

TEST_CASE("adam: first step with constant gradient moves by ~ -step*sign(g)") {
    const auto cfg = NetConfig::make(1, 1, 3, 5);
    auto net = build_network(cfg, 5);
    auto params = net.params();
    for (auto& p : params)
        if (p.grads) std::fill_n(p.grads, p.count, 0.37f);
    std::vector<float> before;
    for (auto& p : params) before.insert(before.end(), p.values, p.values + p.count);
    auto state = make_adam_state(params);
    const AdamConfig hyper{};
    adam_step(params, state, hyper);
    std::size_t off = 0;
    for (auto& p : params) {
        if (p.trainable)
            for (std::size_t i = 0; i < p.count; ++i)
                CHECK(p.values[i] - before[off + i] ==
                      doctest::Approx(-hyper.step).epsilon(1e-4));
        off += p.count;
    }
}

TEST_CASE("adam: identical calls with identical state produce identical outputs") {
    const auto cfg = NetConfig::make(1, 1, 3, 5);
    auto a = build_network(cfg, 6);
    auto b = build_network(cfg, 6);
    auto pa = a.params(), pb = b.params();
    Rng rng(77);
    for (std::size_t i = 0; i < pa.size(); ++i)
        if (pa[i].grads)
            for (std::size_t j = 0; j < pa[i].count; ++j)
                pa[i].grads[j] = pb[i].grads[j] = static_cast<float>(rng.uniform(-1, 1));
    auto sa = make_adam_state(pa), sb = make_adam_state(pb);
    adam_step(pa, sa, {});
    adam_step(pb, sb, {});
    for (std::size_t i = 0; i < pa.size(); ++i)
        CHECK(std::memcmp(pa[i].values, pb[i].values, pa[i].count * sizeof(float)) == 0);

    if (pa[0].grads) pa[0].grads[0] = std::numeric_limits<float>::infinity();
    CHECK_THROWS_AS(adam_step(pa, sa, {}), std::runtime_error);
}

TEST_CASE("weight file round-trip preserves parameters and behaviour") {
    const auto path = (std::filesystem::temp_directory_path() / "voldose_net.cnw").string();
    const auto cfg = NetConfig::make(2, 2, 3, 5);
    auto net = build_network(cfg, 21);
    save_network(net, path);
    auto back = load_network(path);

    auto pa = net.params(), pb = back.params();
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
        CHECK(pa[i].name == pb[i].name);
        CHECK(std::memcmp(pa[i].values, pb[i].values, pa[i].count * sizeof(float)) == 0);
    }
    const auto x0 = random_slices(1, 32, 1), x1 = random_slices(1, 32, 2);
    const auto ya = forward_infer(net, {x0, x1});
    const auto yb = forward_infer(back, {x0, x1});
    CHECK(ya[0].v == yb[0].v);
    CHECK(ya[1].v == yb[1].v);
    std::filesystem::remove(path);
}

TEST_CASE("train: validation split is round(total/10) and curves are deterministic") {
    const auto set = phantom_dataset({small_spec(1), small_spec(2)}, {builtin_table_a()}, 0.1);
    const auto cfg = NetConfig::make(2, 1, 3, 5);
    TrainConfig tcfg;
    tcfg.epochs = 2;
    tcfg.seed = 9;

    TrainStats sa, sb;
    train(cfg, tcfg, set, Axis::axial, &sa);
    train(cfg, tcfg, set, Axis::axial, &sb);
    CHECK(sa.val_slices == 6); // round(64/10)
    CHECK(sa.train_slices == 58);
    CHECK(sa.train_loss == sb.train_loss);
    CHECK(sa.val_loss == sb.val_loss);
    CHECK(sa.initial_loss == sb.initial_loss);
}

TEST_CASE("train: 5 epochs reduce the training loss on a 2-phantom set") {
    auto s1 = small_spec(3), s2 = small_spec(4);
    for (auto& sh : s1.shells) sh.noise_std = 2.0;
    for (auto& sh : s2.shells) sh.noise_std = 2.0;
    s2.shells[0].semi_axes_mm = {12.0, 11.0, 11.5};
    const auto set = phantom_dataset({s1, s2}, {builtin_table_a()}, 0.1);
    const auto cfg = NetConfig::make(2, 1, 3, 5);
    TrainConfig tcfg;
    tcfg.epochs = 5;
    tcfg.seed = 10;
    TrainStats st;
    train(cfg, tcfg, set, Axis::sagittal, &st);
    CHECK(st.train_loss.back() < st.train_loss.front());
}

TEST_CASE("train: single-phantom noise-free run reaches < 0.1x the initial BCE") {
    const auto set = phantom_dataset({small_spec(5)}, {builtin_table_a()}, 0.1);
    const auto cfg = NetConfig::make(2, 1, 3, 5);
    TrainConfig tcfg;
    tcfg.epochs = 50;
    tcfg.seed = 11;
    TrainStats st;
    train(cfg, tcfg, set, Axis::axial, &st);
    double best = 1e30;
    for (double l : st.train_loss) best = std::min(best, l);
    CHECK(best < 0.1 * st.initial_loss);
}

TEST_CASE("train rejects datasets that cannot be split or do not match the config") {
    const auto cfg = NetConfig::make(2, 1, 3, 5);
    TrainingSet tiny;
    TrainingSample s;
    s.inputs = {ScalarGrid(32, 32, 4), ScalarGrid(32, 32, 4)};
    s.targets = {ScalarGrid(32, 32, 4)};
    tiny.samples.push_back(s);
    // 4 axial slices -> round(0.4) = 0 validation slices
    CHECK_THROWS_AS(train(cfg, {}, tiny, Axis::axial), std::invalid_argument);
    // non-square slices along the other axes
    CHECK_THROWS_AS(train(cfg, {}, tiny, Axis::sagittal), std::invalid_argument);
}

TEST_CASE("infer chain: identity slice mapping recovers the uniform conductor") {
    // the composition (average, denormalize) applied to the exact normalized
    // target must reproduce assign_uniform
    const auto table = builtin_table_a();
    const auto vols = generate_phantom(small_spec(6), table);
    const auto p = NormParams::from_table(table, 0.1);
    const auto uniform = assign_uniform(vols.labels, table);
    const auto target = normalize_conductor(uniform, p);

    const auto merged = average_directions(target, target, target);
    const auto recovered = denormalize(merged, p);
    for (std::size_t i = 0; i < uniform.data.size(); ++i)
        CHECK(std::abs(recovered.data[i] - uniform.data[i]) <=
              1e-6 * std::max(1.0f, uniform.data[i]));
}

TEST_CASE("infer_volume: zero-weight networks give 0.5 * sigma_max/(1-tau)") {
    const auto cfg = NetConfig::make(2, 1, 3, 5);
    DirectionNets nets{build_network(cfg, 1), build_network(cfg, 2), build_network(cfg, 3)};
    zero_weights(nets.axial);
    zero_weights(nets.sagittal);
    zero_weights(nets.coronal);

    ScalarGrid t1(32, 32, 32), t2(32, 32, 32);
    Rng rng(55);
    for (auto& v : t1.data) v = static_cast<float>(rng.uniform01());
    for (auto& v : t2.data) v = static_cast<float>(rng.uniform01());

    const auto table = builtin_table_a();
    const auto out = infer_volume(nets, {t1, t2}, {table}, 0.1);
    REQUIRE(out.size() == 1);
    const double expect = 0.5 * table.sigma_max() / 0.9;
    for (float v : out[0].data) CHECK(v == doctest::Approx(expect).epsilon(1e-5));
}

TEST_CASE("infer_volume: V=2 emits one conductor per tissue table") {
    const auto cfg = NetConfig::make(2, 2, 3, 5);
    DirectionNets nets{build_network(cfg, 1), build_network(cfg, 2), build_network(cfg, 3)};
    ScalarGrid t1(32, 32, 32), t2(32, 32, 32);
    Rng rng(56);
    for (auto& v : t1.data) v = static_cast<float>(rng.uniform01());
    for (auto& v : t2.data) v = static_cast<float>(rng.uniform01());
    const auto out = infer_volume(nets, {t1, t2}, {builtin_table_a(), builtin_table_b()}, 0.1);
    REQUIRE(out.size() == 2);
    CHECK(out[0].dims == t1.dims);
    CHECK(out[1].dims == t1.dims);

    CHECK_THROWS_AS(infer_volume(nets, {t1, t2}, {builtin_table_a()}, 0.1),
                    std::invalid_argument);
}

TEST_SUITE_END();
