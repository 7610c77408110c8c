#include <cmath>
#include <numbers>

#include "doctest.h"
#include "sg/philox.hpp"
#include "sg/schedule.hpp"
#include "sg/torus.hpp"

using namespace sg;

TEST_CASE("philox4x32-10 known answers") {
    auto z = Philox::eval({0, 0, 0, 0}, {0, 0});
    CHECK(z[0] == 0x6627e8d5u);
    CHECK(z[1] == 0xe169c58du);
    CHECK(z[2] == 0xbc57ac4cu);
    CHECK(z[3] == 0x9b00dbd8u);
    auto o = Philox::eval({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u});
    CHECK(o[0] == 0x408f276du);
    CHECK(o[1] == 0x41c83b0eu);
    CHECK(o[2] == 0xa20bc7c6u);
    CHECK(o[3] == 0x6d5451fdu);
}

TEST_CASE("normal draws are stateless and roughly standard") {
    auto key = philox_key(42);
    CHECK(normal_pair(3, 5, 7, key) == normal_pair(3, 5, 7, key));
    CHECK(normal_pair(3, 5, 7, key) != normal_pair(3, 5, 8, key));
    double s = 0, s2 = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        auto [a, b] = normal_pair(i, 0, 0, key);
        s += a + b;
        s2 += a * a + b * b;
    }
    CHECK(std::abs(s / (2 * n)) < 0.03);
    CHECK(std::abs(s2 / (2 * n) - 1) < 0.03);
}

TEST_CASE("grid validation") {
    CHECK_THROWS(build_grid(12, 4, 1));
    CHECK_THROWS(build_grid(4, 4, 1));
    CHECK_THROWS(build_grid(16, -1, 1));
    CHECK_THROWS(build_grid(16, 4, 0));
    auto g = build_grid(16, 4, 1);
    CHECK(g.a == doctest::Approx(0.25));
    CHECK(g.modes() == 16 * 9);
}

TEST_CASE("unitary transform: Parseval and roundtrip") {
    auto g = build_grid(32, 8, 1);
    for (int i = 0; i < 5; ++i) {
        Field f = white_noise(g, 9, i);
        Field r = spectral_roundtrip(g, f);
        double e = 0;
        for (int x = 0; x < g.sites(); ++x) e = std::max(e, std::abs(r[x] - f[x]));
        CHECK(e < 1e-12);
        double n2 = l2_sq_position(f);
        CHECK(std::abs(l2_sq_spectral(g, forward(g, f)) - n2) / n2 < 1e-12);
    }
}

TEST_CASE("constant field lives in the zero mode") {
    auto g = build_grid(16, 4, 1);
    Field f(g.sites(), 2.0);
    Spectrum s = forward(g, f);
    CHECK(std::abs(s[0] - cplx(2.0 * g.n, 0)) < 1e-12);
    for (int k = 1; k < g.modes(); ++k) CHECK(std::abs(s[k]) < 1e-12);
}

TEST_CASE("symbols at hand-computed values") {
    CHECK(symbol_J(2.0, 1.0) == doctest::Approx(std::exp(-1.0)));
    CHECK(symbol_C(2.0, 1.0) == doctest::Approx(std::exp(-2.0) / 2));
    CHECK(symbol_C(2.0, INFINITY) == doctest::Approx(0.5));
    CHECK(symbol_C(2.0, 0.0) == 0.0);
    // d/dt C_t = J_t^2
    double t = 3, h = 1e-5;
    double dC = (symbol_C(5.0, t + h) - symbol_C(5.0, t - h)) / (2 * h);
    CHECK(dC == doctest::Approx(std::pow(symbol_J(5.0, t), 2)).epsilon(1e-8));
}

TEST_CASE("multiplier composition: L times C_inf is the identity") {
    auto g = build_grid(16, 4, 1);
    Field f = white_noise(g, 1, 0);
    auto L = make_multiplier(g, Symbol::L), C = make_multiplier(g, Symbol::C_infinity);
    Field r = apply_multiplier(g, L, apply_multiplier(g, C, f));
    for (int x = 0; x < g.sites(); ++x) CHECK(r[x] == doctest::Approx(f[x]).epsilon(1e-10));
}

TEST_CASE("constant mode of K_t and kernel value at the origin") {
    auto g = build_grid(16, 4, 1);
    CHECK(k_zero_variance(g, 0) == 0.0);
    double prev = 0;
    for (double t : {0.1, 1.0, 10.0, 100.0}) {
        double k = k_zero_variance(g, t);
        CHECK(k > prev);
        prev = k;
    }
    std::vector<double> cinf(g.modes());
    for (int k = 0; k < g.modes(); ++k) cinf[k] = 1 / g.lam[k];
    CHECK(kernel_value(g, cinf, 0, 0) == doctest::Approx(k_zero_variance(g, INFINITY)));
}

TEST_CASE("weights and norms") {
    auto g = build_grid(16, 4, 1);
    Field one(g.sites(), 1.0);
    WeightSpec w;
    w.kind = WeightSpec::Polynomial;
    w.sigma = 0;
    CHECK(weighted_norm(g, one, w, 2) == doctest::Approx(std::sqrt(g.area())));
    CHECK(weighted_norm(g, one, w, INFINITY) == doctest::Approx(1.0));
    CHECK(inner(g, one, one) == doctest::Approx(g.area()));
    CHECK(torus_dist(g, 0, 0, 0, 0) == 0.0);
    CHECK(torus_dist(g, g.n - 1, 0, 0, 0) == doctest::Approx(g.a));
}

TEST_CASE("cell multipliers reproduce covariance increments") {
    auto g = build_grid(16, 4, 1);
    auto s = make_schedule(g, {16, 0.05, 0});
    const int M = s.cells();
    for (int k = 0; k < g.modes(); ++k) {
        double acc = s.C0[k];
        for (int j = 0; j < M; ++j) acc += s.J[j][k] * s.J[j][k] * s.dt[j];
        acc += s.Ctail[k];
        CHECK(acc == doctest::Approx(s.Cinf[k]).epsilon(1e-12));
    }
    for (int j = 1; j <= M; ++j) CHECK(s.K[j] >= s.K[j - 1]);
}

TEST_CASE("schedule rejects bad ranges") {
    auto g = build_grid(16, 4, 1);
    CHECK_THROWS(make_schedule(g, {1, 0.05, 0}));
    CHECK_THROWS(make_schedule(g, {16, 0.0, 0}));
    CHECK_THROWS(make_schedule(g, {16, 1.0, 0.5}));
}

TEST_CASE("paths are reproducible and sum to their increments") {
    auto g = build_grid(16, 4, 1);
    auto s = make_schedule(g, {16, 0.05, 0});
    auto a = sample_path(g, s, 5, 11), b = sample_path(g, s, 5, 11);
    CHECK(a.W.back() == b.W.back());
    Spectrum acc(g.modes(), cplx(0, 0));
    for (auto& d : a.dW)
        for (int k = 0; k < g.modes(); ++k) acc[k] += d[k];
    for (int k = 0; k < g.modes(); ++k) CHECK(std::abs(acc[k] - a.W.back()[k]) < 1e-12);
}

TEST_CASE("zero-gain closed loop matches the open path") {
    auto g = build_grid(16, 4, 1);
    auto s = make_schedule(g, {16, 0.05, 0});
    GainFn none = [](int, const Field&, Field&) { return false; };
    auto r = closed_loop_simulate(g, s, none, 5, 3);
    Field w = sample_path(g, s, 5, 3).infinity(g);
    for (int x = 0; x < g.sites(); ++x) CHECK(r.Y[x] == doctest::Approx(w[x]).epsilon(1e-12));
    CHECK(r.energy == 0.0);
}

TEST_CASE("energy inequality holds exactly for random drifts") {
    auto g = build_grid(16, 4, 1);
    auto s = make_schedule(g, {16, 0.05, 0});
    const int M = s.cells();
    for (int i = 0; i < 10; ++i) {
        DriftSignal u(M);
        for (int j = 0; j < M; ++j) u[j] = white_noise(g, 77, i * M + j);
        Field I = integrate_drift(g, s, u, 0, M), LI(g.sites());
        apply_symbol(g, g.lam.data(), I.data(), LI.data());
        CHECK(inner(g, I, LI) <= 2 * drift_energy(g, s, u));
    }
    CHECK_THROWS(integrate_drift(g, s, DriftSignal(M, Field(g.sites())), 0, M + 1));
}
