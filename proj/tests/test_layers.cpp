#include <doctest.h>

#include <cmath>
#include <functional>

#include "voldose/layers.hpp"
#include "voldose/rng.hpp"

using namespace voldose;
using DT = Tensor4<double>;

namespace {

DT random_tensor(int n, int c, int h, int w, std::uint64_t seed, double lo = -1.0,
                 double hi = 1.0) {
    DT t(n, c, h, w);
    Rng rng(seed);
    for (auto& v : t.v) v = rng.uniform(lo, hi);
    return t;
}

std::vector<double> random_vec(int n, std::uint64_t seed) {
    std::vector<double> v(static_cast<std::size_t>(n));
    Rng rng(seed);
    for (auto& x : v) x = rng.uniform(-1.0, 1.0);
    return v;
}

double weighted_sum(const DT& y, const DT& r) {
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y.v[i] * r.v[i];
    return s;
}

// central finite differences, step 1e-3, against the analytic gradient
void check_fd(std::vector<double>& values, const std::vector<double>& analytic,
              const std::function<double()>& loss, double tol = 1e-4) {
    REQUIRE(values.size() == analytic.size());
    const double step = 1e-3;
    double max_diff = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double orig = values[i];
        values[i] = orig + step;
        const double lp = loss();
        values[i] = orig - step;
        const double lm = loss();
        values[i] = orig;
        const double fd = (lp - lm) / (2.0 * step);
        max_diff = std::max(max_diff, std::abs(fd - analytic[i]));
    }
    CHECK(max_diff < tol);
}

} // namespace

TEST_SUITE_BEGIN("layers");

TEST_CASE("conv2d_same: delta kernel reproduces the input") {
    const auto x = random_tensor(1, 1, 6, 6, 1);
    DT w(1, 1, 3, 3);
    w.at(0, 0, 1, 1) = 1.0;
    const auto y = conv2d_same(x, w, std::vector<double>{0.0});
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(y.v[i] == doctest::Approx(x.v[i]));
}

TEST_CASE("conv2d_same matches a direct nested-loop reference on random 8x8") {
    const auto x = random_tensor(2, 3, 8, 8, 2);
    const auto w = random_tensor(4, 3, 5, 5, 3);
    const auto b = random_vec(4, 4);
    const auto y = conv2d_same(x, w, b);

    // brute-force oracle
    const int pad = 2;
    for (int n = 0; n < 2; ++n)
        for (int oc = 0; oc < 4; ++oc)
            for (int yy = 0; yy < 8; ++yy)
                for (int xx = 0; xx < 8; ++xx) {
                    double acc = b[static_cast<std::size_t>(oc)];
                    for (int ic = 0; ic < 3; ++ic)
                        for (int ky = 0; ky < 5; ++ky)
                            for (int kx = 0; kx < 5; ++kx) {
                                const int sy = yy + ky - pad, sx = xx + kx - pad;
                                if (sy < 0 || sy >= 8 || sx < 0 || sx >= 8) continue;
                                acc += x.at(n, ic, sy, sx) * w.at(oc, ic, ky, kx);
                            }
                    CHECK(std::abs(y.at(n, oc, yy, xx) - acc) < 1e-6);
                }
}

TEST_CASE("conv2d_same gradients match finite differences") {
    auto x = random_tensor(2, 2, 8, 8, 5);
    auto w = random_tensor(3, 2, 3, 3, 6);
    auto b = random_vec(3, 7);
    const auto r = random_tensor(2, 3, 8, 8, 8);

    DT dx, dw;
    std::vector<double> db;
    conv2d_same_backward(x, w, r, dx, dw, db);
    const auto loss = [&]() { return weighted_sum(conv2d_same(x, w, b), r); };
    check_fd(x.v, dx.v, loss);
    check_fd(w.v, dw.v, loss);
    check_fd(b, db, loss);
}

TEST_CASE("maxpool2: constant image pools to the constant at half size") {
    DT x(1, 2, 6, 6, 3.25);
    const auto y = maxpool2(x);
    CHECK(y.h == 3);
    CHECK(y.w == 3);
    for (double v : y.v) CHECK(v == doctest::Approx(3.25));
}

TEST_CASE("maxpool2 gradient matches finite differences") {
    // distinct values so the argmax is stable under the FD step
    auto x = random_tensor(1, 2, 6, 6, 9);
    for (std::size_t i = 0; i < x.size(); ++i) x.v[i] += static_cast<double>(i) * 0.01;
    const auto r = random_tensor(1, 2, 3, 3, 10);
    std::vector<std::int64_t> argmax;
    maxpool2(x, &argmax);
    const auto dx = maxpool2_backward(r, argmax, 6, 6);
    const auto loss = [&]() {
        const auto y = maxpool2(x);
        return weighted_sum(y, r);
    };
    check_fd(x.v, dx.v, loss);
}

TEST_CASE("deconv2_stride2: doubles the spatial size; gradients match FD") {
    auto x = random_tensor(2, 3, 4, 4, 11);
    auto w = random_tensor(3, 2, 2, 2, 12); // (ic, oc, 2, 2)
    auto b = random_vec(2, 13);
    const auto y = deconv2_stride2(x, w, b);
    CHECK(y.c == 2);
    CHECK(y.h == 8);
    CHECK(y.w == 8);

    const auto r = random_tensor(2, 2, 8, 8, 14);
    DT dx, dw;
    std::vector<double> db;
    deconv2_stride2_backward(x, w, r, dx, dw, db);
    const auto loss = [&]() { return weighted_sum(deconv2_stride2(x, w, b), r); };
    check_fd(x.v, dx.v, loss);
    check_fd(w.v, dw.v, loss);
    check_fd(b, db, loss);
}

TEST_CASE("batchnorm: training-mode gradients match finite differences") {
    auto x = random_tensor(3, 2, 4, 4, 15);
    auto gamma = random_vec(2, 16);
    auto beta = random_vec(2, 17);
    const auto r = random_tensor(3, 2, 4, 4, 18);

    const auto loss = [&]() {
        std::vector<double> rm(2, 0.0), rv(2, 1.0);
        BnCache<double> cache;
        const auto y = batchnorm_train(x, gamma, beta, rm, rv, 1e-5, 0.9, cache);
        return weighted_sum(y, r);
    };

    std::vector<double> rm(2, 0.0), rv(2, 1.0);
    BnCache<double> cache;
    batchnorm_train(x, gamma, beta, rm, rv, 1e-5, 0.9, cache);
    std::vector<double> dgamma, dbeta;
    const auto dx = batchnorm_backward(r, cache, gamma, dgamma, dbeta);

    check_fd(x.v, dx.v, loss);
    check_fd(gamma, dgamma, loss);
    check_fd(beta, dbeta, loss);
}

TEST_CASE("batchnorm: inference mode uses running stats") {
    const auto x = random_tensor(2, 1, 2, 2, 19);
    std::vector<double> gamma{2.0}, beta{0.5}, rm{1.0}, rv{4.0};
    const auto y = batchnorm_infer(x, gamma, beta, rm, rv, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i)
        CHECK(y.v[i] == doctest::Approx(2.0 * (x.v[i] - 1.0) / 2.0 + 0.5));
}

TEST_CASE("relu and sigmoid") {
    DT x(1, 1, 2, 2);
    x.v = {-1.0, 0.0, 2.0, -0.5};
    const auto y = relu(x);
    CHECK(y.v == std::vector<double>{0.0, 0.0, 2.0, 0.0});

    DT z(1, 1, 1, 1, 0.0);
    CHECK(sigmoid(z).v[0] == doctest::Approx(0.5));

    // gradient of sigmoid via FD
    auto s = random_tensor(1, 1, 4, 4, 20);
    const auto r = random_tensor(1, 1, 4, 4, 21);
    const auto sy = sigmoid(s);
    const auto ds = sigmoid_backward(sy, r);
    check_fd(s.v, ds.v, [&]() { return weighted_sum(sigmoid(s), r); });
}

TEST_CASE("bce: pred = target = 0.5 gives ln 2") {
    DT p(1, 1, 2, 2, 0.5), t(1, 1, 2, 2, 0.5);
    CHECK(bce_loss(p, t) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("bce: loss vanishes as pred matches a zero target") {
    DT p(1, 1, 1, 1, 1e-9), t(1, 1, 1, 1, 0.0);
    CHECK(bce_loss(p, t) < 1e-6);
}

TEST_CASE("bce logit gradient matches finite differences on a 4x4 slice") {
    auto z = random_tensor(1, 1, 4, 4, 22);
    DT t(1, 1, 4, 4);
    Rng rng(23);
    for (auto& v : t.v) v = rng.uniform(0.0, 0.9);

    const auto grad = bce_logit_grad(sigmoid(z), t);
    check_fd(z.v, grad.v, [&]() { return bce_loss(sigmoid(z), t); });
}

TEST_CASE("concat splits back into its parts") {
    const auto a = random_tensor(2, 2, 4, 4, 24);
    const auto b = random_tensor(2, 3, 4, 4, 25);
    const auto y = concat_channels<double>({&a, &b});
    CHECK(y.c == 5);
    const auto parts = concat_channels_backward(y, {2, 3});
    CHECK(parts[0].v == a.v);
    CHECK(parts[1].v == b.v);
}

TEST_SUITE_END();
