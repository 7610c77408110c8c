#include "sg/semiclassical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sg {

namespace {

// terminal draws use a knot id no schedule reaches
constexpr std::uint32_t kTerminalKnot = 0xFFFFFFF0u;

Field apply_L(const TorusGrid& g, const Field& phi) {
    Field out(g.sites());
    apply_symbol(g, g.lam.data(), phi.data(), out.data());
    return out;
}

double total_value(const TorusGrid& g, const PerturbationSpec& f, const SGParams& p,
                   const CutoffSpec& rho, const Field& phi, double* rate) {
    double I = rate_functional(g, phi, p, rho);
    if (rate) *rate = I;
    return f.value(g, phi) + I;
}

Field total_gradient(const TorusGrid& g, const PerturbationSpec& f, const SGParams& p,
                     const CutoffSpec& rho, const Field& phi) {
    Field gr = rate_gradient(g, phi, p, rho);
    if (f.kind != PerturbationSpec::None) {
        Field gf = f.gradient(g, phi);
        for (int x = 0; x < g.sites(); ++x) gr[x] += gf[x];
    }
    return gr;
}

}  // namespace

double rate_functional(const TorusGrid& g, const Field& phi, const SGParams& p,
                       const CutoffSpec& rho) {
    const double a2 = g.a * g.a;
    double pot = 0;
    for (int x : rho.support) pot += rho.rho[x] * (std::cos(p.beta * phi[x]) - 1);
    Field Lphi = apply_L(g, phi);
    double kin = 0;
    for (int x = 0; x < g.sites(); ++x) kin += phi[x] * Lphi[x];
    return p.lambda * a2 * pot + 0.5 * a2 * kin;
}

Field rate_gradient(const TorusGrid& g, const Field& phi, const SGParams& p, const CutoffSpec& rho) {
    Field gr = apply_L(g, phi);
    for (int x : rho.support) gr[x] -= p.lambda * p.beta * rho.rho[x] * std::sin(p.beta * phi[x]);
    return gr;
}

ClassicalState solve_classical_el(const TorusGrid& g, const PerturbationSpec& f, const SGParams& p,
                                  const CutoffSpec& rho, double tol, int max_iter,
                                  const Field& start) {
    if (!(tol > 0)) throw std::invalid_argument("tol must be positive");
    const int NS = g.sites();
    std::vector<double> cinf(g.modes());
    for (int k = 0; k < g.modes(); ++k) cinf[k] = 1 / g.lam[k];

    ClassicalState st;
    st.phi = start.empty() ? Field(NS, 0.0) : start;
    double val = total_value(g, f, p, rho, st.phi, &st.rate);
    Field gr = total_gradient(g, f, p, rho, st.phi);
    auto norm = [&](const Field& v) { return std::sqrt(inner(g, v, v)); };
    st.residual = norm(gr);
    double step = 1;
    for (; st.iterations < max_iter && st.residual > tol; ++st.iterations) {
        Field d(NS);
        apply_symbol(g, cinf.data(), gr.data(), d.data());
        double slope = inner(g, gr, d);   // > 0, descent along -d
        bool moved = false;
        for (int bt = 0; bt < 40; ++bt) {
            Field trial(NS);
            for (int x = 0; x < NS; ++x) trial[x] = st.phi[x] - step * d[x];
            double rate = 0;
            double tv = total_value(g, f, p, rho, trial, &rate);
            Field tg = total_gradient(g, f, p, rho, trial);
            double tr = norm(tg);
            // near the minimizer value differences drown in rounding, so a residual decrease
            // with a value change at rounding level is also accepted
            double noise = 1e-13 * (std::abs(val) + 1e-300) + 1e-15;
            bool armijo = tv <= val - 1e-4 * step * slope;
            bool flat = tv <= val + noise && tr < st.residual;
            if (std::isfinite(tv) && (armijo || flat)) {
                st.phi = std::move(trial);
                val = tv;
                st.rate = rate;
                gr = std::move(tg);
                st.residual = tr;
                moved = true;
                step = std::min(1.0, 2 * step);
                break;
            }
            step *= 0.5;
        }
        if (!moved) break;
    }
    st.value = val;
    st.converged = st.residual <= tol;
    return st;
}

Field sample_terminal(const TorusGrid& g, std::uint64_t seed, std::uint64_t traj) {
    std::vector<double> var(g.modes());
    for (int k = 0; k < g.modes(); ++k) var[k] = 1 / (g.lam[k] * g.a * g.a);
    Spectrum s(g.modes(), cplx(0, 0));
    add_gaussian_spectrum(g, var.data(), seed, traj, kTerminalKnot, s.data());
    return inverse(g, s);
}

HbarSweepReport hbar_sweep(const TorusGrid& g, const PerturbationSpec& f, const SGParams& p,
                           const CutoffSpec& rho, const std::vector<double>& hbars, int n_traj,
                           std::uint64_t seed, bool parallel) {
    if (hbars.size() < 3) throw std::invalid_argument("hbar sweep needs at least 3 values");
    for (size_t i = 0; i < hbars.size(); ++i) {
        if (!(hbars[i] > 0)) throw std::invalid_argument("hbar must be positive");
        if (i && !(hbars[i] < hbars[i - 1])) throw std::invalid_argument("hbar list must decrease");
    }
    validate(p);
    HbarSweepReport rep;
    rep.n_traj = n_traj;
    rep.seed = seed;
    rep.minimizer = solve_classical_el(g, f, p, rho, 1e-10);
    rep.vacuum = solve_classical_el(g, PerturbationSpec{}, p, rho, 1e-10);
    rep.infimum = rep.minimizer.value - rep.vacuum.value;

    const double a2 = g.a * g.a;
    const double Kinf = k_zero_variance(g, INFINITY);
    const int H = int(hbars.size());
    // per trajectory and hbar: (f, V) at phi = hbar^{1/2} W
    struct Row { std::vector<double> f, V; };
    auto rows = ensemble<Row>(size_t(n_traj), [&](size_t i) {
        Field W = sample_terminal(g, seed, i);
        Row r;
        Field phi(g.sites());
        for (double hb : hbars) {
            double sq = std::sqrt(hb), al = std::exp(0.5 * p.beta * p.beta * hb * Kinf);
            for (int x = 0; x < g.sites(); ++x) phi[x] = sq * W[x];
            double V = 0;
            for (int x : rho.support) V += rho.rho[x] * std::cos(p.beta * phi[x]);
            r.V.push_back(p.lambda * a2 * al * V);
            r.f.push_back(f.value(g, phi));
        }
        return r;
    }, parallel);

    for (int h = 0; h < H; ++h) {
        const double hb = hbars[h];
        std::vector<double> e1(n_traj), e2(n_traj);
        double m1 = -INFINITY, m2 = -INFINITY;
        for (int i = 0; i < n_traj; ++i) {
            e1[i] = -(rows[i].f[h] + rows[i].V[h]) / hb;
            e2[i] = -rows[i].V[h] / hb;
            m1 = std::max(m1, e1[i]);
            m2 = std::max(m2, e2[i]);
        }
        std::vector<double> w1(n_traj), w2(n_traj);
        double s1 = 0, s1sq = 0;
        for (int i = 0; i < n_traj; ++i) {
            w1[i] = std::exp(e1[i] - m1);
            w2[i] = std::exp(e2[i] - m2);
            s1 += w1[i];
            s1sq += w1[i] * w1[i];
        }
        HbarPoint pt;
        pt.hbar = hb;
        pt.ess = s1 * s1 / s1sq / n_traj;
        if (pt.ess < 0.05)
            throw std::runtime_error("reweighting effective sample size below 5% in hbar sweep");
        pt.value = jackknife(size_t(n_traj), 20, [&](const std::vector<char>& keep) {
            double a = 0, b = 0, c = 0;
            for (int i = 0; i < n_traj; ++i)
                if (keep[i]) { a += w1[i]; b += w2[i]; c += 1; }
            return -hb * (std::log(a / c) + m1) + hb * (std::log(b / c) + m2);
        });
        pt.gap = std::abs(pt.value.value - rep.infimum);
        rep.points.push_back(pt);
    }
    return rep;
}

}  // namespace sg
