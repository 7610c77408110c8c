#include "sg/measure.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace sg {

SampleSet sample_sg(const Model& m, const MeasureSpec& spec, const ObsFn& obs) {
    struct Row { std::vector<double> o; double logw = 0; bool finite = true; };
    const bool coupling = spec.method == MeasureSpec::Coupling;
    if (coupling && spec.tilt.kind != PerturbationSpec::None)
        throw std::invalid_argument("coupling realizes a tilt only through its policy; use reweighting");
    auto rows = ensemble<Row>(size_t(spec.n_traj), [&](size_t i) {
        Row r;
        LoopResult lr;
        if (coupling) {
            run_policy(m, spec.policy, {}, spec.seed, i, {}, &lr);
        } else {
            lr = closed_loop_simulate(m.g, m.s, {}, spec.seed, i);
            r.logw = -interaction(m.g, lr.Y, m.alpha_inf, m.rho, m.p);
        }
        if (spec.tilt.kind != PerturbationSpec::None) r.logw -= spec.tilt.value(m.g, lr.Y);
        r.finite = lr.finite && std::isfinite(r.logw);
        if (r.finite) r.o = obs(lr.Y);
        return r;
    }, spec.parallel);
    SampleSet s;
    double hi = -INFINITY;
    for (auto& r : rows)
        if (r.finite) hi = std::max(hi, r.logw);
    double sw = 0, sw2 = 0;
    for (auto& r : rows) {
        if (!r.finite) { ++s.n_nan; continue; }
        double w = std::exp(r.logw - hi);
        s.obs.push_back(std::move(r.o));
        s.w.push_back(w);
        sw += w;
        sw2 += w * w;
    }
    if (s.w.empty()) throw std::runtime_error("no finite samples");
    for (auto& w : s.w) w /= sw;
    s.ess = sw * sw / sw2 / double(s.w.size());
    if (!coupling && s.ess < 0.05)
        throw std::runtime_error("reweighting effective sample size below 5%; increase n_traj or shrink lambda*area");
    return s;
}

Estimate sample_stat(const SampleSet& s,
                     const std::function<double(const std::function<double(int)>&)>& stat) {
    const size_t n = s.w.size();
    return jackknife(n, 20, [&](const std::vector<char>& keep) {
        double W = 0;
        for (size_t i = 0; i < n; ++i)
            if (keep[i]) W += s.w[i];
        auto mean_k = [&](int k) {
            double acc = 0;
            for (size_t i = 0; i < n; ++i)
                if (keep[i]) acc += s.w[i] * s.obs[i][k];
            return acc / W;
        };
        return stat(mean_k);
    });
}

Estimate sample_mean(const SampleSet& s, int k) {
    return sample_stat(s, [k](const std::function<double(int)>& mean) { return mean(k); });
}

CumulantReport cumulants(const SampleSet& s, int k) {
    // raw moments of X are appended per sample by the caller as k, k+1 (X^2), k+2 (X^3), k+3 (X^4)
    CumulantReport c;
    c.k2 = sample_stat(s, [k](const std::function<double(int)>& E) {
        double m1 = E(k), m2 = E(k + 1);
        return m2 - m1 * m1;
    });
    c.k4 = sample_stat(s, [k](const std::function<double(int)>& E) {
        double m1 = E(k), m2 = E(k + 1), m3 = E(k + 2), m4 = E(k + 3);
        return m4 - 4 * m3 * m1 - 3 * m2 * m2 + 12 * m2 * m1 * m1 - 6 * m1 * m1 * m1 * m1;
    });
    return c;
}

CumulantReport fourth_cumulant(const Model& m, const MeasureSpec& spec, const Field& psi) {
    auto s = sample_sg(m, spec, [&](const Field& phi) {
        double X = inner(m.g, psi, phi);
        return std::vector<double>{X, X * X, X * X * X, X * X * X * X};
    });
    return cumulants(s, 0);
}

std::vector<int> plateau_sites(const Model& m) {
    std::vector<int> p;
    for (int x : m.rho.support)
        if (m.rho.rho[x] >= 1.0) p.push_back(x);
    return p;
}

double free_propagator(const TorusGrid& g, int d) {
    std::vector<double> sym(g.modes());
    for (int k = 0; k < g.modes(); ++k) sym[k] = 1 / g.lam[k];
    return kernel_value(g, sym, d, 0);
}

double fit_mass(const std::vector<double>& r, const std::vector<double>& G, double lo, double hi) {
    std::vector<double> x, y;
    for (size_t i = 0; i < r.size(); ++i)
        if (r[i] >= lo - 1e-12 && r[i] <= hi + 1e-12 && G[i] > 0) {
            x.push_back(r[i]);
            y.push_back(std::log(G[i]) + 0.5 * std::log(r[i]));
        }
    if (x.size() < 2) return NAN;
    return -linear_fit(x, y).slope;
}

ObsFn correlator_obs(const Model& m, const std::vector<int>& offsets) {
    auto P = plateau_sites(m);
    if (P.empty()) throw std::runtime_error("cutoff has no plateau");
    for (int d : offsets)
        if (d * m.g.a > m.g.ell / 4 + 1e-12) throw std::invalid_argument("distance beyond ell/4");
    const int n = m.g.n, D = int(offsets.size());
    return [P, offsets, n, D](const Field& phi) {
        std::vector<double> o(1 + D, 0.0);
        for (int x : P) o[0] += phi[x];
        o[0] /= double(P.size());
        for (int k = 0; k < D; ++k) {
            int d = offsets[k];
            double acc = 0;
            for (int x : P) {
                int i = x / n, j = x % n;
                acc += phi[x] * (phi[((i + d) % n) * n + j] + phi[((i - d + n) % n) * n + j] +
                                 phi[i * n + (j + d) % n] + phi[i * n + (j - d + n) % n]);
            }
            o[1 + k] = acc / (4.0 * double(P.size()));
        }
        return o;
    };
}

CorrelatorReport correlator_from(const Model& m, const SampleSet& s, int first,
                                 const std::vector<int>& offsets, double lo, double hi) {
    const int D = int(offsets.size());
    CorrelatorReport rep;
    rep.fit_lo = lo;
    rep.fit_hi = hi;
    for (int k = 0; k < D; ++k) {
        rep.r.push_back(offsets[k] * m.g.a);
        rep.G.push_back(sample_stat(s, [first, k](const std::function<double(int)>& E) {
            return E(first + 1 + k) - E(first) * E(first);
        }));
    }
    for (int k = 0; k < D; ++k)
        if (rep.r[k] >= lo && rep.r[k] <= hi && !(rep.G[k].value > 0)) ++rep.excluded;
    auto mass = sample_stat(s, [&](const std::function<double(int)>& E) {
        std::vector<double> G(D);
        for (int k = 0; k < D; ++k) G[k] = E(first + 1 + k) - E(first) * E(first);
        return fit_mass(rep.r, G, lo, hi);
    });
    rep.m_fit = mass.value;
    rep.m_lo = mass.value - 1.96 * mass.se;
    rep.m_hi = mass.value + 1.96 * mass.se;
    return rep;
}

CorrelatorReport connected_two_point(const Model& m, const MeasureSpec& spec,
                                     const std::vector<int>& offsets, double lo, double hi) {
    auto s = sample_sg(m, spec, correlator_obs(m, offsets));
    return correlator_from(m, s, 0, offsets, lo, hi);
}

Field reflect(const TorusGrid& g, const Field& f) {
    Field r(f.size());
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) r[((g.n - i) % g.n) * g.n + j] = f[i * g.n + j];
    return r;
}

RPReport rp_covariance_check(const TorusGrid& g, const std::vector<Field>& basis) {
    const int B = int(basis.size());
    for (auto& f : basis)
        for (int i = 0; i < g.n; ++i) {
            double x1 = site_coord(g, i);
            if (x1 > 0 && x1 < g.ell / 2) continue;
            for (int j = 0; j < g.n; ++j)
                if (f[i * g.n + j] != 0) throw std::invalid_argument("basis function crosses the reflection plane");
        }
    std::vector<double> cinf(g.modes());
    for (int k = 0; k < g.modes(); ++k) cinf[k] = 1 / g.lam[k];
    std::vector<Field> TCf;
    for (auto& f : basis) {
        Field c(g.sites());
        apply_symbol(g, cinf.data(), f.data(), c.data());
        TCf.push_back(reflect(g, c));
    }
    Eigen::MatrixXd G(B, B);
    for (int a = 0; a < B; ++a)
        for (int b = 0; b < B; ++b) G(a, b) = inner(g, basis[a], TCf[b]);
    G = 0.5 * (G + G.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    RPReport r;
    r.basis = B;
    r.min_eig = es.eigenvalues().minCoeff();
    for (int a = 0; a < B; ++a) r.diag.push_back(G(a, a));
    return r;
}

std::vector<Field> rp_bump_basis(const TorusGrid& g, double radius, const std::vector<double>& cx,
                                 const std::vector<double>& cy) {
    std::vector<Field> out;
    for (double x : cx)
        for (double y : cy) out.push_back(bump_field(g, radius, 1.0, x, y));
    return out;
}

std::vector<Field> rp_site_basis(const TorusGrid& g, int depth, int width) {
    std::vector<Field> out;
    for (int i = 1; i <= depth; ++i)
        for (int j = -width; j <= width; ++j) {
            Field f(g.sites(), 0.0);
            f[i * g.n + (j + g.n) % g.n] = 1 / (g.a * g.a);
            out.push_back(std::move(f));
        }
    return out;
}

DecayReport cutoff_drift_decay(int n_side, double ell, double mass, const ScheduleSpec& sched,
                               const SGParams& p, const std::vector<double>& radii, double gamma,
                               int n_traj, std::uint64_t seed, bool parallel) {
    Model A = make_model(n_side, ell, mass, sched, p, radii.front() + 2);
    const int M = A.s.cells(), NS = A.g.sites();
    WeightSpec w;
    w.kind = WeightSpec::Exponential;
    w.gamma = -gamma;
    Field wt = weight_field(A.g, w);
    DriftPolicy u = DriftPolicy::first_order_sine(A);
    DecayReport rep;
    std::vector<double> x, y, sd;
    for (double N : radii) {
        if (N + 4 > ell / 4 + 1e-12) throw std::invalid_argument("cutoff radius beyond ell/4");
        Model B = A;
        A.rho = make_cutoff(A.g, N + 2);
        B.rho = make_cutoff(B.g, N + 4);
        auto d = ensemble<double>(size_t(n_traj), [&](size_t i) {
            LoopOptions opt;
            opt.record_drift = true;
            LoopResult ra, rb;
            run_policy(A, u, {}, seed, i, opt, &ra);
            run_policy(B, u, {}, seed, i, opt, &rb);
            double acc = 0;
            for (int j = 0; j < M; ++j) {
                double s = 0;
                for (int xx = 0; xx < NS; ++xx) {
                    double v = wt[xx] * (ra.u[j][xx] - rb.u[j][xx]);
                    s += v * v;
                }
                acc += A.g.a * A.g.a * s * A.s.dt[j];
            }
            return std::sqrt(acc);
        }, parallel);
        auto e = mean_se(d);
        rep.N.push_back(N);
        rep.diff.push_back(e);
        if (e.value > 0) {
            x.push_back(N);
            y.push_back(std::log(e.value));
            sd.push_back(std::max(e.se / e.value, 1e-12));
        }
    }
    if (x.size() >= 2) rep.fit = linear_fit(x, y, sd);
    return rep;
}

}  // namespace sg
