#include <cmath>
#include <numbers>

#include "doctest.h"
#include "sg/besov.hpp"
#include "sg/wick.hpp"

using namespace sg;

TEST_CASE("beta range is enforced") {
    SGParams p;
    CHECK_NOTHROW(validate(p));
    p.beta = std::sqrt(4 * std::numbers::pi) * (1 + 1e-12);
    CHECK_THROWS(validate(p));
    p.beta = 0;
    CHECK_THROWS(validate(p));
}

TEST_CASE("alpha at t = 0 is 1 and grows with t") {
    auto g = build_grid(16, 4, 1);
    double b = std::sqrt(2 * std::numbers::pi);
    CHECK(alpha(g, b, 0) == 1.0);
    CHECK(alpha(g, b, 1) > 1.0);
    CHECK(alpha(g, b, 10) > alpha(g, b, 1));
    CHECK(alpha_from_K(2.0, 0.5) == doctest::Approx(std::exp(1.0)));
}

TEST_CASE("Wick pair: circle identity, bound and shift by angle addition") {
    auto g = build_grid(16, 4, 1);
    Field W = white_noise(g, 3, 0), sh = white_noise(g, 3, 1);
    const double b = 1.7, al = 2.3;
    auto w = wick_trig(W, al, b, sh);
    for (int x = 0; x < g.sites(); ++x) {
        CHECK(w.c[x] * w.c[x] + w.s[x] * w.s[x] == doctest::Approx(al * al));
        CHECK(std::abs(w.c[x]) <= al);
        CHECK(w.c[x] == doctest::Approx(al * std::cos(b * (W[x] + sh[x]))));
        CHECK(w.s[x] == doctest::Approx(al * std::sin(b * (W[x] + sh[x]))));
    }
}

TEST_CASE("cutoff: plateau, support and gradient bound") {
    auto g = build_grid(32, 16, 1);
    auto r = make_cutoff(g, 4);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            double d = torus_dist(g, i, j, 0, 0), v = r.rho[i * g.n + j];
            if (d <= 2) CHECK(v == 1.0);
            if (d >= 4) CHECK(v == 0.0);
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    CHECK(smoothstep5(0) == 0.0);
    CHECK(smoothstep5(1) == 1.0);
    CHECK(smoothstep5(0.5) == doctest::Approx(0.5));
    CHECK_THROWS(make_cutoff(g, 0));
}

TEST_CASE("interaction of the zero field and its gradient") {
    auto g = build_grid(16, 4, 1);
    auto r = make_cutoff(g, 1);
    SGParams p;
    Field z(g.sites(), 0.0);
    CHECK(interaction(g, z, 1.5, r, p) == doctest::Approx(p.lambda * g.a * g.a * r.mass() * 1.5));
    Field gr = interaction_gradient(g, z, 1.5, r, p);
    for (double v : gr) CHECK(v == 0.0);
    // finite difference of the gradient along a random direction
    Field Y = white_noise(g, 4, 0), h = white_noise(g, 4, 1);
    Field G = interaction_gradient(g, Y, 1.5, r, p), yp = Y, ym = Y;
    const double e = 1e-6;
    for (int x = 0; x < g.sites(); ++x) {
        yp[x] += e * h[x];
        ym[x] -= e * h[x];
    }
    double fd = (interaction(g, yp, 1.5, r, p) - interaction(g, ym, 1.5, r, p)) / (2 * e);
    CHECK(fd == doctest::Approx(inner(g, G, h)).epsilon(1e-6));
}

TEST_CASE("Littlewood-Paley partition of unity and block reconstruction") {
    auto g = build_grid(32, 8, 1);
    auto P = make_partition(g);
    for (int m = 0; m < g.modes(); ++m) {
        double s = 0;
        for (auto& w : P.w) s += w[m];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-14));
    }
    Field f = white_noise(g, 8, 0);
    auto blocks = lp_blocks(g, P, f);
    CHECK(int(blocks.size()) == P.count());
    for (int x = 0; x < g.sites(); ++x) {
        double s = 0;
        for (auto& b : blocks) s += b[x];
        CHECK(s == doctest::Approx(f[x]).epsilon(1e-10));
    }
    CHECK(lp_profile(0.5) == 1.0);
    CHECK(lp_profile(1.5) == 0.0);
}

TEST_CASE("Besov norm: constants sit in the low block, p and q are validated") {
    auto g = build_grid(32, 8, 1);
    auto P = make_partition(g);
    Field one(g.sites(), 1.0);
    BesovParams b;
    b.s = -0.5;
    // the constant sits in block j = -1, weighted by 2^{-s}
    CHECK(besov_norm(g, P, one, b) == doctest::Approx(std::sqrt(2.0) * std::sqrt(g.area())));
    Field f = white_noise(g, 8, 1);
    double lo = besov_norm(g, P, f, b);
    b.s = 0.5;
    CHECK(besov_norm(g, P, f, b) > lo);
    b.p = 0.5;
    CHECK_THROWS(besov_norm(g, P, f, b));
}

TEST_CASE("white noise block-variance profile has log2 slope 2") {
    // per-block energy of white noise scales with the annulus area 4^j, so log2 slope ~ 2
    auto g = build_grid(128, 32, 1);
    auto P = make_partition(g);
    std::vector<std::vector<double>> E;
    for (int i = 0; i < 40; ++i) E.push_back(block_energies(g, P, white_noise(g, 21, i)));
    auto prof = block_variance_profile(g, P, E, 3);
    CHECK(prof.shells >= 3);
    CHECK(prof.fit.slope == doctest::Approx(2.0).epsilon(0.1));
}
