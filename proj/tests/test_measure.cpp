#include <cmath>

#include "doctest.h"
#include "sg/measure.hpp"
#include "sg/semiclassical.hpp"

using namespace sg;

namespace {

Model small(double lambda) {
    SGParams p;
    p.lambda = lambda;
    return make_model(16, 8, 1, {16, 0.05, 0}, p, 2);
}

}  // namespace

TEST_CASE("reflection is an involution fixing the line x1 = 0") {
    auto g = build_grid(16, 4, 1);
    Field f = white_noise(g, 1, 0);
    CHECK(reflect(g, reflect(g, f)) == f);
    Field r = reflect(g, f);
    for (int j = 0; j < g.n; ++j) CHECK(r[j] == f[j]);
    CHECK(r[1 * g.n] == f[(g.n - 1) * g.n]);
}

TEST_CASE("reflection positivity of the free covariance on half-space bumps") {
    auto g = build_grid(32, 8, 1);
    auto basis = rp_bump_basis(g, 0.5, {0.75, 1.5, 2.5}, {-1, 0, 1});
    auto r = rp_covariance_check(g, basis);
    CHECK(r.basis == 9);
    CHECK(r.min_eig >= -1e-10);
    for (double d : r.diag) CHECK(d > 0);
    // a function touching the reflection plane is rejected
    CHECK_THROWS(rp_covariance_check(g, {bump_field(g, 0.5, 1, 0, 0)}));
}

TEST_CASE("free propagator at distance 0 is the pointwise variance") {
    auto g = build_grid(16, 4, 1);
    CHECK(free_propagator(g, 0) == doctest::Approx(k_zero_variance(g, INFINITY)));
    CHECK(free_propagator(g, 2) < free_propagator(g, 1));
}

TEST_CASE("mass fit recovers a synthetic decay exactly") {
    std::vector<double> r, G;
    for (int i = 1; i <= 20; ++i) {
        r.push_back(0.25 * i);
        G.push_back(3 * std::pow(0.25 * i, -0.5) * std::exp(-1.3 * 0.25 * i));
    }
    CHECK(fit_mass(r, G, 1, 4) == doctest::Approx(1.3));
}

TEST_CASE("coupling refuses a tilt") {
    auto m = small(0.1);
    MeasureSpec s;
    s.tilt.kind = PerturbationSpec::Linear;
    s.tilt.psi = bump_field(m.g, 1, 1);
    s.n_traj = 40;
    ObsFn obs = [](const Field& phi) { return std::vector<double>{phi[0]}; };
    CHECK_THROWS(sample_sg(m, s, obs));
}

TEST_CASE("free measure: reweighting is uniform and cumulants are Gaussian") {
    auto m = small(0);
    Field psi = bump_field(m.g, 1, 1);
    ObsFn obs = [&](const Field& phi) {
        double X = inner(m.g, psi, phi);
        return std::vector<double>{X, X * X, X * X * X, X * X * X * X};
    };
    MeasureSpec rw;
    rw.method = MeasureSpec::Reweight;
    rw.n_traj = 2000;
    rw.seed = 5;
    auto S = sample_sg(m, rw, obs);
    CHECK(S.ess == doctest::Approx(1.0));
    Field c(m.g.sites());
    apply_symbol(m.g, m.s.Cinf.data(), psi.data(), c.data());
    double var = inner(m.g, psi, c);
    auto K = cumulants(S, 0);
    CHECK(std::abs(K.k2.value - var) <= 4 * K.k2.se);
    CHECK(std::abs(K.k4.value) <= 4 * K.k4.se);
    // the same draws through the coupling path give identical samples at lambda = 0
    MeasureSpec cp = rw;
    cp.method = MeasureSpec::Coupling;
    auto C = sample_sg(m, cp, obs);
    CHECK(C.obs == S.obs);
}

TEST_CASE("cumulants of a known two-point distribution") {
    // X = +-1 with equal weight: k2 = 1, k4 = 1 - 3 = -2
    SampleSet s;
    for (int i = 0; i < 40; ++i) {
        double X = i % 2 ? 1 : -1;
        s.obs.push_back({X, X * X, X * X * X, X * X * X * X});
        s.w.push_back(1.0 / 40);
    }
    auto K = cumulants(s, 0);
    CHECK(K.k2.value == doctest::Approx(1));
    CHECK(K.k4.value == doctest::Approx(-2));
}

TEST_CASE("correlator observables reject distances beyond ell/4") {
    auto m = small(0);
    CHECK_NOTHROW(correlator_obs(m, {1, 4}));
    CHECK_THROWS(correlator_obs(m, {9}));
}

TEST_CASE("rate functional: zero, constant field and gradient") {
    auto g = build_grid(16, 4, 1);
    auto rho = make_cutoff(g, 1);
    SGParams p;
    Field z(g.sites(), 0.0), c(g.sites(), 0.2);
    CHECK(rate_functional(g, z, p, rho) == 0.0);
    double want = p.lambda * g.a * g.a * rho.mass() * (std::cos(p.beta * 0.2) - 1) + 0.5 * 0.04 * g.area();
    CHECK(rate_functional(g, c, p, rho) == doctest::Approx(want));
    Field phi = white_noise(g, 3, 0), h = white_noise(g, 3, 1), pp = phi, pm = phi;
    const double e = 1e-6;
    for (int x = 0; x < g.sites(); ++x) {
        pp[x] += e * h[x];
        pm[x] -= e * h[x];
    }
    double fd = (rate_functional(g, pp, p, rho) - rate_functional(g, pm, p, rho)) / (2 * e);
    CHECK(fd == doctest::Approx(inner(g, rate_gradient(g, phi, p, rho), h)).epsilon(1e-6));
}

TEST_CASE("classical EL: Gaussian minimizer is -C psi, f = 0 converges to 0") {
    auto g = build_grid(16, 4, 1);
    auto rho = make_cutoff(g, 1);
    SGParams p0;
    p0.lambda = 0;
    PerturbationSpec lin;
    lin.kind = PerturbationSpec::Linear;
    lin.psi = bump_field(g, 0.75, 0.5);
    auto st = solve_classical_el(g, lin, p0, rho, 1e-10);
    CHECK(st.converged);
    auto C = make_multiplier(g, Symbol::C_infinity);
    Field want = apply_multiplier(g, C, lin.psi);
    for (int x = 0; x < g.sites(); ++x) CHECK(st.phi[x] == doctest::Approx(-want[x]).epsilon(1e-8).scale(1));
    CHECK(st.value == doctest::Approx(-0.5 * inner(g, lin.psi, want)));
    SGParams p;
    auto s0 = solve_classical_el(g, PerturbationSpec{}, p, rho, 1e-9, 2000, white_noise(g, 1, 1));
    CHECK(s0.converged);
    for (double v : s0.phi) CHECK(std::abs(v) < 1e-6);
    CHECK_THROWS(solve_classical_el(g, lin, p0, rho, 0));
}

TEST_CASE("terminal sample variance and sweep argument checks") {
    auto g = build_grid(16, 4, 1);
    double s2 = 0;
    const int n = 400;
    for (int i = 0; i < n; ++i) {
        Field W = sample_terminal(g, 2, i);
        s2 += W[0] * W[0];
    }
    double K = k_zero_variance(g, INFINITY);
    CHECK(std::abs(s2 / n - K) < 4 * K * std::sqrt(2.0 / n));
    auto rho = make_cutoff(g, 1);
    SGParams p;
    CHECK_THROWS(hbar_sweep(g, PerturbationSpec{}, p, rho, {0.4, 0.2}, 100, 1));
    CHECK_THROWS(hbar_sweep(g, PerturbationSpec{}, p, rho, {0.2, 0.4, 0.1}, 100, 1));
}

TEST_CASE("Gaussian hbar sweep reproduces the closed form at every hbar") {
    auto g = build_grid(16, 4, 1);
    auto rho = make_cutoff(g, 1);
    SGParams p0;
    p0.lambda = 0;
    PerturbationSpec lin;
    lin.kind = PerturbationSpec::Linear;
    lin.psi = bump_field(g, 0.75, 0.5);
    auto C = make_multiplier(g, Symbol::C_infinity);
    double g0 = -0.5 * inner(g, lin.psi, apply_multiplier(g, C, lin.psi));
    auto r = hbar_sweep(g, lin, p0, rho, {0.4, 0.2, 0.1}, 4000, 3);
    CHECK(r.infimum == doctest::Approx(g0));
    for (auto& pt : r.points) CHECK(std::abs(pt.value.value - g0) <= 4 * pt.value.se);
}
