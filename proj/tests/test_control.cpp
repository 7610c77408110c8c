#include <cmath>

#include "doctest.h"
#include "sg/control.hpp"

using namespace sg;

namespace {

Model small(double lambda) {
    SGParams p;
    p.lambda = lambda;
    return make_model(16, 8, 1, {16, 0.05, 0}, p, 2);
}

double g0_of(const Model& m, const Field& psi) {
    Field c(m.g.sites());
    apply_symbol(m.g, m.s.Cinf.data(), psi.data(), c.data());
    return -0.5 * inner(m.g, psi, c);
}

}  // namespace

TEST_CASE("stats helpers") {
    auto e = mean_se({1, 2, 3, 4});
    CHECK(e.value == 2.5);
    CHECK(e.se == doctest::Approx(std::sqrt(5.0 / 3 / 4)));
    CHECK(combined_se(3, 4) == 5.0);
    auto f = linear_fit({0, 1, 2, 3}, {1, 3, 5, 7});
    CHECK(f.slope == doctest::Approx(2));
    CHECK(f.intercept == doctest::Approx(1));
    CHECK(f.slope_se == doctest::Approx(0).epsilon(1e-12));
    std::vector<double> x(100);
    for (int i = 0; i < 100; ++i) x[i] = std::sin(i * 1.3);
    auto jk = jackknife(100, 20, [&](const std::vector<char>& keep) {
        double s = 0, n = 0;
        for (int i = 0; i < 100; ++i)
            if (keep[i]) { s += x[i]; n += 1; }
        return s / n;
    });
    CHECK(jk.value == doctest::Approx(mean(x)));
    CHECK(jk.se > 0);
}

TEST_CASE("Gaussian closed form matches a direct quadratic form") {
    auto m = small(0);
    Field psi = bump_field(m.g, 1, 0.5);
    CHECK(gaussian_value(m.g, psi, m.s.Cinf) == doctest::Approx(g0_of(m, psi)));
}

TEST_CASE("perturbation gradients match finite differences") {
    auto m = small(0.1);
    Field psi = bump_field(m.g, 1, 0.5), phi = white_noise(m.g, 2, 0), h = white_noise(m.g, 2, 1);
    for (auto kind : {PerturbationSpec::Linear, PerturbationSpec::SmearedBounded, PerturbationSpec::Quadratic}) {
        PerturbationSpec f;
        f.kind = kind;
        f.psi = psi;
        f.kappa = 0.4;
        Field gr = f.gradient(m.g, phi), pp = phi, pm = phi;
        const double e = 1e-6;
        for (int x = 0; x < m.g.sites(); ++x) {
            pp[x] += e * h[x];
            pm[x] -= e * h[x];
        }
        double fd = (f.value(m.g, pp) - f.value(m.g, pm)) / (2 * e);
        CHECK(fd == doctest::Approx(inner(m.g, gr, h)).epsilon(1e-6));
    }
}

TEST_CASE("policy parameter roundtrip") {
    auto m = small(0.1);
    auto u = DriftPolicy::first_order_sine(m);
    CHECK(u.n_params() == m.s.cells());
    auto th = u.params();
    th[0] = 3;
    u.set_params(th);
    CHECK(u.c[0] == 3);
    CHECK_THROWS(u.set_params({1, 2}));
    // the initialized gain has the calculus sign c = -lambda beta alpha
    CHECK(DriftPolicy::first_order_sine(m).c[2] == doctest::Approx(-m.p.lambda * m.p.beta * m.alpha[2]));
}

TEST_CASE("lambda = 0 linear case: direct and closed-form policy hit the Gaussian value") {
    auto m = small(0);
    Field psi = bump_field(m.g, 1, 0.5);
    PerturbationSpec lin;
    lin.kind = PerturbationSpec::Linear;
    lin.psi = psi;
    double g0 = g0_of(m, psi);
    auto d = direct_log_laplace(m, lin, 2000, 3);
    CHECK(std::abs(d.value.value - g0) <= 4 * d.value.se);
    auto e = evaluate_functional(m, DriftPolicy::closed_form_linear(m, psi), lin, 2000, 3);
    CHECK(std::abs(e.F.value - g0) <= 4 * e.F.se);
    CHECK(e.n_nan == 0);
}

TEST_CASE("zero policy has no energy and F = lambda a^2 sum rho in mean") {
    auto m = small(0.1);
    auto e = evaluate_functional(m, DriftPolicy::zero(), PerturbationSpec{}, 2000, 4);
    CHECK(e.energy_term.value == 0.0);
    double target = m.p.lambda * m.g.a * m.g.a * m.rho.mass();
    CHECK(std::abs(e.F.value - target) <= 4 * e.F.se);
}

TEST_CASE("serial and parallel ensembles are bitwise identical") {
#ifdef _OPENMP
    omp_set_num_threads(4);
#endif
    auto m = small(0.1);
    auto u = DriftPolicy::first_order_sine(m);
    auto a = evaluate_functional(m, u, PerturbationSpec{}, 64, 9, false);
    auto b = evaluate_functional(m, u, PerturbationSpec{}, 64, 9, true);
    CHECK(a.per_traj == b.per_traj);
    CHECK(a.F.value == b.F.value);
    CHECK(a.F.se == b.F.se);
    auto ga = objective_gradient(m, u, PerturbationSpec{}, 32, 9, false);
    auto gb = objective_gradient(m, u, PerturbationSpec{}, 32, 9, true);
    CHECK(ga.grad == gb.grad);
}

TEST_CASE("adjoint gradient agrees with central differences under common random numbers") {
    auto m = small(0.1);
    Field psi = bump_field(m.g, 1, 0.5);
    PerturbationSpec sb;
    sb.kind = PerturbationSpec::SmearedBounded;
    sb.psi = psi;
    sb.kappa = 0.5;
    auto u = DriftPolicy::first_order_sine(m);
    const int n = 64;
    auto gr = objective_gradient(m, u, sb, n, 5);
    CHECK(gr.F == doctest::Approx(evaluate_functional(m, u, sb, n, 5).F.value).epsilon(1e-12));
    auto th = u.params();
    for (int i : {1, 7, 14}) {
        const double h = 1e-4;
        auto up = u, um = u;
        auto tp = th, tm = th;
        tp[i] += h;
        tm[i] -= h;
        up.set_params(tp);
        um.set_params(tm);
        double fd = (evaluate_functional(m, up, sb, n, 5).F.value - evaluate_functional(m, um, sb, n, 5).F.value) / (2 * h);
        CHECK(gr.grad[i] == doctest::Approx(fd).epsilon(1e-5).scale(1e-6));
    }
    CHECK(gr.curvature.size() == th.size());
    for (double c : gr.curvature) CHECK(c >= 0);
}

TEST_CASE("optimizer does not increase the CRN objective") {
    auto m = small(0.1);
    OptimizerConfig oc;
    oc.n_traj = 64;
    oc.max_iter = 4;
    auto r = optimize_drift(m, DriftPolicy::first_order_sine(m), PerturbationSpec{}, oc);
    REQUIRE(r.trace.size() >= 2);
    for (size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k] <= r.trace[k - 1]);
    for (double c : r.policy.c) CHECK(std::abs(c) <= oc.gain_bound);
}

TEST_CASE("paired difference and dp argument checks") {
    auto d = paired_difference({1, 2, 3}, {0.5, 1.5, 2.5});
    CHECK(d.value == doctest::Approx(0.5));
    CHECK(d.se == doctest::Approx(0));
    CHECK_THROWS(paired_difference({1}, {1, 2}));
    auto m = small(0.1);
    CHECK_THROWS(dp_consistency(m, 4, PerturbationSpec{}, OptimizerConfig{}, 10, 1));
}

TEST_CASE("zero policy EL residual agrees with its independent oracle") {
    auto m = small(0.1);
    std::vector<DriftSignal> dirs = {cell_bump_direction(m, 4, 1.0), cell_bump_direction(m, 8, 1.0)};
    auto r = el_residual(m, DriftPolicy::zero(), PerturbationSpec{}, 800, 6, dirs, {});
    REQUIRE(r.size() == 2);
    for (auto& e : r) CHECK(std::abs(e.value.value - e.oracle.value) <= 3 * combined_se(e.value.se, e.oracle.se));
}
