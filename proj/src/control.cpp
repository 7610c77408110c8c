#include "sg/control.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace sg {

Model make_model(int n_side, double ell, double mass, const ScheduleSpec& sched,
                 const SGParams& p, double R) {
    validate(p);
    Model m;
    m.g = build_grid(n_side, ell, mass);
    m.s = make_schedule(m.g, sched);
    m.p = p;
    m.rho = make_cutoff(m.g, R);
    for (double K : m.s.K) m.alpha.push_back(alpha_from_K(p.beta, K));
    m.alpha_inf = alpha_from_K(p.beta, m.s.Kinf);
    return m;
}

double PerturbationSpec::value(const TorusGrid& g, const Field& phi) const {
    switch (kind) {
        case None: return 0;
        case Linear: return inner(g, psi, phi);
        case SmearedBounded: return kappa * std::tanh(inner(g, psi, phi) / kappa);
        case Quadratic: { double s = inner(g, psi, phi); return 0.5 * s * s; }
    }
    return 0;
}

Field PerturbationSpec::gradient(const TorusGrid& g, const Field& phi) const {
    Field out(g.sites(), 0.0);
    double w = 0;
    switch (kind) {
        case None: return out;
        case Linear: w = 1; break;
        case SmearedBounded: { double th = std::tanh(inner(g, psi, phi) / kappa); w = 1 - th * th; break; }
        case Quadratic: w = inner(g, psi, phi); break;
    }
    for (int x = 0; x < g.sites(); ++x) out[x] = w * psi[x];
    return out;
}

Field bump_field(const TorusGrid& g, double r, double amp, double cx, double cy) {
    Field f(g.sites(), 0.0);
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            double d = torus_dist(g, i, j, cx, cy) / r;
            if (d < 1) f[i * g.n + j] = amp * std::exp(1 - 1 / (1 - d * d));
        }
    return f;
}

DriftPolicy DriftPolicy::closed_form_linear(const Model& m, const Field& psi) {
    DriftPolicy u;
    u.kind = ClosedFormLinear;
    u.psi = psi;
    u.d.assign(m.s.cells(), 1.0);
    return u;
}

DriftPolicy DriftPolicy::first_order_sine(const Model& m, double scale) {
    DriftPolicy u;
    u.kind = FirstOrderSine;
    // gradient of lambda rho alpha cos(beta phi) is -lambda beta alpha rho sin(beta phi)
    for (int j = 0; j < m.s.cells(); ++j)
        u.c.push_back(-scale * m.p.lambda * m.p.beta * m.alpha[j]);
    return u;
}

DriftPolicy DriftPolicy::perturbed(const DriftPolicy& base, const DriftSignal& h) {
    DriftPolicy u = base;
    u.kind = PerturbedOpenLoop;
    u.h = h;
    return u;
}

std::vector<double> DriftPolicy::params() const {
    std::vector<double> th(c);
    th.insert(th.end(), d.begin(), d.end());
    return th;
}

void DriftPolicy::set_params(const std::vector<double>& th) {
    if (int(th.size()) != n_params()) throw std::invalid_argument("parameter count mismatch");
    std::copy(th.begin(), th.begin() + c.size(), c.begin());
    std::copy(th.begin() + c.size(), th.end(), d.begin());
}

std::string policy_name(const DriftPolicy& u) {
    switch (u.kind) {
        case DriftPolicy::Zero: return "zero";
        case DriftPolicy::ClosedFormLinear: return "closed_form_linear";
        case DriftPolicy::FirstOrderSine: return "first_order_sine";
        case DriftPolicy::PerturbedOpenLoop: return "perturbed_open_loop";
    }
    return "?";
}

namespace {

// per-trajectory record of sin/cos of beta Y_j on the cutoff support
struct Tape {
    std::vector<std::vector<double>> sn, cs;
};

struct Prepared {
    std::vector<Spectrum> h_hat;
    std::vector<char> mask;
};

Prepared prepare(const Model& m, const DriftPolicy& u) {
    Prepared P;
    int M = m.s.cells();
    P.mask.assign(M, 0);
    for (int j = 0; j < M; ++j)
        P.mask[j] = (!u.c.empty() && u.c[j] != 0) || (!u.d.empty() && u.d[j] != 0);
    if (!u.h.empty()) {
        if (int(u.h.size()) != M) throw std::invalid_argument("open-loop drift needs one field per cell");
        for (auto& h : u.h) P.h_hat.push_back(forward(m.g, h));
    }
    return P;
}

GainFn make_gain(const Model& m, const DriftPolicy& u, Tape* tape) {
    if (u.c.empty() && u.d.empty()) return {};
    return [&m, &u, tape](int j, const Field& Y, Field& g) {
        double c = u.c.empty() ? 0 : u.c[j];
        double d = u.d.empty() ? 0 : u.d[j];
        const auto& sup = m.rho.support;
        const double b = m.p.beta;
        if (tape) {
            auto& sn = tape->sn[j];
            auto& cs = tape->cs[j];
            sn.resize(sup.size());
            cs.resize(sup.size());
            for (size_t i = 0; i < sup.size(); ++i) {
                sn[i] = std::sin(b * Y[sup[i]]);
                cs[i] = std::cos(b * Y[sup[i]]);
            }
        }
        if (c == 0 && d == 0) return false;
        if (d != 0) for (size_t x = 0; x < g.size(); ++x) g[x] = d * u.psi[x];
        else std::fill(g.begin(), g.end(), 0.0);
        if (c != 0) {
            if (tape) {
                const auto& sn = tape->sn[j];
                for (size_t i = 0; i < sup.size(); ++i) g[sup[i]] += c * m.rho.rho[sup[i]] * sn[i];
            } else {
                for (int x : sup) g[x] += c * m.rho.rho[x] * std::sin(b * Y[x]);
            }
        }
        return true;
    };
}

TrajSample finish(const Model& m, const PerturbationSpec& f, const LoopResult& r) {
    TrajSample t;
    t.finite = r.finite;
    t.energy = r.energy;
    t.f = f.value(m.g, r.Y);
    t.inter = interaction(m.g, r.Y, m.alpha_inf, m.rho, m.p);
    t.finite = t.finite && std::isfinite(t.total());
    return t;
}

Field phi_gradient(const Model& m, const PerturbationSpec& f, const Field& Y) {
    Field gr = f.gradient(m.g, Y);
    Field gi = interaction_gradient(m.g, Y, m.alpha_inf, m.rho, m.p);
    for (size_t x = 0; x < gr.size(); ++x) gr[x] += gi[x];
    return gr;
}

}  // namespace

TrajSample run_policy(const Model& m, const DriftPolicy& u, const PerturbationSpec& f,
                      std::uint64_t seed, std::uint64_t idx, LoopOptions opt, LoopResult* out) {
    Prepared P = prepare(m, u);
    if (!P.h_hat.empty()) opt.open_loop = &P.h_hat;
    opt.gain_mask = &P.mask;
    LoopResult r = closed_loop_simulate(m.g, m.s, make_gain(m, u, nullptr), seed, idx, opt);
    TrajSample t = finish(m, f, r);
    if (out) *out = std::move(r);
    return t;
}

BDReport evaluate_functional(const Model& m, const DriftPolicy& u, const PerturbationSpec& f,
                             int n_traj, std::uint64_t seed, bool parallel) {
    if (n_traj < 2) throw std::invalid_argument("n_traj too small");
    Prepared P = prepare(m, u);
    GainFn gain = make_gain(m, u, nullptr);
    auto samples = ensemble<TrajSample>(size_t(n_traj), [&](size_t i) {
        LoopOptions opt;
        opt.gain_mask = &P.mask;
        if (!P.h_hat.empty()) opt.open_loop = &P.h_hat;
        return finish(m, f, closed_loop_simulate(m.g, m.s, gain, seed, i, opt));
    }, parallel);
    BDReport rep;
    rep.seed = seed;
    rep.checksum = m.s.checksum;
    std::vector<double> tf, ti, te;
    for (auto& s : samples) {
        if (!s.finite) { ++rep.n_nan; continue; }
        tf.push_back(s.f);
        ti.push_back(s.inter);
        te.push_back(s.energy);
        rep.per_traj.push_back(s.total());
    }
    rep.n_traj = int(rep.per_traj.size());
    rep.F = mean_se(rep.per_traj);
    rep.f_term = mean_se(tf);
    rep.inter_term = mean_se(ti);
    rep.energy_term = mean_se(te);
    return rep;
}

DirectReport direct_log_laplace(const Model& m, const PerturbationSpec& f, int n_traj,
                                std::uint64_t seed, bool parallel) {
    if (n_traj < 2) throw std::invalid_argument("n_traj too small");
    auto X = ensemble<double>(size_t(n_traj), [&](size_t i) {
        auto r = closed_loop_simulate(m.g, m.s, {}, seed, i);
        return f.value(m.g, r.Y) + interaction(m.g, r.Y, m.alpha_inf, m.rho, m.p);
    }, parallel);
    DirectReport d;
    d.n_traj = n_traj;
    d.exponent = X;
    double lo = *std::min_element(X.begin(), X.end());
    std::vector<double> w(X.size());
    for (size_t i = 0; i < X.size(); ++i) w[i] = std::exp(-(X[i] - lo));
    auto log_mean = [&](const std::vector<char>& keep) {
        double s = 0;
        size_t n = 0;
        for (size_t i = 0; i < w.size(); ++i)
            if (keep[i]) { s += w[i]; ++n; }
        if (!(s > 0)) throw std::runtime_error("all importance weights vanished");
        return -std::log(s / double(n)) + lo;
    };
    auto ws = mean_se(w);
    d.value.value = log_mean(std::vector<char>(w.size(), 1));
    d.value.se = ws.se / ws.value;
    // jackknife bias of the log-of-mean: (B-1)(mean of leave-one-block-out - full)
    {
        std::vector<char> keep(w.size());
        double acc = 0;
        for (int b = 0; b < 20; ++b) {
            for (size_t i = 0; i < w.size(); ++i) keep[i] = (i * 20 / w.size()) != size_t(b);
            acc += log_mean(keep);
        }
        d.bias = 19 * (acc / 20 - d.value.value);
    }
    double s1 = 0, s2 = 0;
    for (double v : w) { s1 += v; s2 += v * v; }
    d.ess = s1 * s1 / s2 / double(w.size());
    return d;
}

Estimate paired_difference(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw std::invalid_argument("paired samples differ in length");
    std::vector<double> d(a.size());
    for (size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
    return mean_se(d);
}

namespace {

struct TrajGrad {
    double F = 0;
    std::vector<double> grad, curv;
    bool finite = true;
};

TrajGrad traj_gradient(const Model& m, const DriftPolicy& u, const PerturbationSpec& f,
                       std::uint64_t seed, std::uint64_t idx, bool want_curv) {
    const int M = m.s.cells(), NS = m.g.sites();
    const double a2 = m.g.a * m.g.a;
    const auto& sup = m.rho.support;
    Tape tape;
    tape.sn.resize(M);
    tape.cs.resize(M);
    LoopOptions opt;
    auto r = closed_loop_simulate(m.g, m.s, make_gain(m, u, &tape), seed, idx, opt);
    TrajGrad out;
    TrajSample ts = finish(m, f, r);
    out.F = ts.total();
    out.finite = ts.finite;
    int nc = int(u.c.size()), nd = int(u.d.size());
    out.grad.assign(nc + nd, 0.0);
    out.curv.assign(nc + nd, 0.0);
    if (!out.finite) return out;

    Field p = phi_gradient(m, f, r.Y);
    thread_local Field gj, q, s;
    gj.resize(NS);
    q.resize(NS);
    s.resize(NS);
    for (int j = M - 1; j >= 0; --j) {
        double c = nc ? u.c[j] : 0, d = nd ? u.d[j] : 0;
        const bool has_sn = !tape.sn[j].empty();
        for (int x = 0; x < NS; ++x) gj[x] = (d != 0 ? d * u.psi[x] : 0.0) - p[x];
        if (has_sn && c != 0)
            for (size_t i = 0; i < sup.size(); ++i) gj[sup[i]] += c * m.rho.rho[sup[i]] * tape.sn[j][i];
        apply_symbol(m.g, m.s.dC[j].data(), gj.data(), q.data());
        if (nc && has_sn) {
            double acc = 0;
            for (size_t i = 0; i < sup.size(); ++i) acc += m.rho.rho[sup[i]] * tape.sn[j][i] * q[sup[i]];
            out.grad[j] = a2 * acc;
            if (want_curv) {
                std::fill(s.begin(), s.end(), 0.0);
                for (size_t i = 0; i < sup.size(); ++i) s[sup[i]] = m.rho.rho[sup[i]] * tape.sn[j][i];
                apply_symbol(m.g, m.s.dC[j].data(), s.data(), gj.data());
                double cc = 0;
                for (size_t i = 0; i < sup.size(); ++i) cc += s[sup[i]] * gj[sup[i]];
                out.curv[j] = a2 * cc;
            }
        }
        if (nd) {
            double acc = 0;
            for (int x = 0; x < NS; ++x) acc += u.psi[x] * q[x];
            out.grad[nc + j] = a2 * acc;
        }
        if (c != 0 && has_sn) {
            const double cb = c * m.p.beta;
            for (size_t i = 0; i < sup.size(); ++i)
                p[sup[i]] += cb * m.rho.rho[sup[i]] * tape.cs[j][i] * q[sup[i]];
        }
    }
    return out;
}

GradientResult gradient_impl(const Model& m, const DriftPolicy& u, const PerturbationSpec& f,
                             int n, std::uint64_t seed, bool parallel, bool want_curv) {
    if (!u.h.empty()) throw std::invalid_argument("gradient is defined for feedback policies only");
    auto per = ensemble<TrajGrad>(size_t(n), [&](size_t i) {
        return traj_gradient(m, u, f, seed, i, want_curv && i < 64);
    }, parallel);
    GradientResult g;
    int P = u.n_params();
    g.grad.assign(P, 0.0);
    g.curvature.assign(P, 0.0);
    int ok = 0, nc = 0;
    for (size_t i = 0; i < per.size(); ++i) {
        auto& t = per[i];
        if (!t.finite) { ++g.n_nan; continue; }
        ++ok;
        g.F += t.F;
        for (int k = 0; k < P; ++k) g.grad[k] += t.grad[k];
        if (want_curv && i < 64) {
            ++nc;
            for (int k = 0; k < P; ++k) g.curvature[k] += t.curv[k];
        }
    }
    if (!ok) throw std::runtime_error("no finite trajectories");
    g.F /= ok;
    for (auto& v : g.grad) v /= ok;
    if (nc) for (auto& v : g.curvature) v /= nc;
    if (want_curv && !u.d.empty()) {
        // linear gains: the curvature <psi, dC_j psi> is deterministic
        const int ncg = int(u.c.size());
        Field cpsi(m.g.sites());
        for (int j = 0; j < m.s.cells(); ++j) {
            apply_symbol(m.g, m.s.dC[j].data(), u.psi.data(), cpsi.data());
            g.curvature[ncg + j] = inner(m.g, u.psi, cpsi);
        }
    }
    return g;
}

double saa_value(const Model& m, const DriftPolicy& u, const PerturbationSpec& f,
                 const OptimizerConfig& cfg) {
    auto rep = evaluate_functional(m, u, f, cfg.n_traj, cfg.seed, cfg.parallel);
    if (rep.n_nan) throw std::runtime_error("non-finite trajectory during optimization");
    return rep.F.value;
}

std::vector<double> clamp_params(std::vector<double> th, double B) {
    for (auto& v : th) v = std::clamp(v, -B, B);
    return th;
}

}  // namespace

GradientResult objective_gradient(const Model& m, const DriftPolicy& u, const PerturbationSpec& f,
                                  int n_traj, std::uint64_t seed, bool parallel) {
    return gradient_impl(m, u, f, n_traj, seed, parallel, true);
}

OptimizeResult optimize_drift(const Model& m, const DriftPolicy& init, const PerturbationSpec& f,
                              const OptimizerConfig& cfg) {
    OptimizeResult res;
    res.policy = init;
    const int P = init.n_params();
    if (P == 0) {
        res.trace.push_back(saa_value(m, init, f, cfg));
        return res;
    }
    std::vector<char> freep = cfg.free.empty() ? std::vector<char>(P, 1) : cfg.free;
    DriftPolicy cur = init;
    cur.set_params(clamp_params(cur.params(), cfg.gain_bound));

    if (cfg.method == OptimizerConfig::SPSA) {
        std::vector<double> th = cur.params(), scale(P);
        double smax = 0;
        for (double v : th) smax = std::max(smax, std::abs(v));
        for (int i = 0; i < P; ++i) scale[i] = std::max(std::abs(th[i]), 0.1 * smax + 1e-3);
        double F = saa_value(m, cur, f, cfg);
        res.evaluations = 1;
        res.trace.push_back(F);
        std::vector<double> best = th;
        double bestF = F;
        std::mt19937_64 rng(cfg.seed ^ 0x5bd1e995ull);
        const double A = 0.1 * cfg.max_iter;
        for (int k = 0; k < cfg.max_iter; ++k) {
            double ak = cfg.step * 0.1 / std::pow(k + 1 + A, 0.602);
            double ck = 0.1 / std::pow(k + 1, 0.101);
            std::vector<double> D(P), tp(th), tm(th);
            for (int i = 0; i < P; ++i) {
                D[i] = freep[i] ? ((rng() & 1) ? 1.0 : -1.0) : 0.0;
                tp[i] += ck * scale[i] * D[i];
                tm[i] -= ck * scale[i] * D[i];
            }
            DriftPolicy up = cur, um = cur;
            up.set_params(clamp_params(tp, cfg.gain_bound));
            um.set_params(clamp_params(tm, cfg.gain_bound));
            double Fp = saa_value(m, up, f, cfg), Fm = saa_value(m, um, f, cfg);
            for (int i = 0; i < P; ++i)
                if (freep[i]) th[i] -= ak * (Fp - Fm) / (2 * ck * D[i]) * scale[i];
            th = clamp_params(th, cfg.gain_bound);
            cur.set_params(th);
            F = saa_value(m, cur, f, cfg);
            res.evaluations += 3;
            if (F < bestF) { bestF = F; best = th; }
            res.trace.push_back(bestF);
            if (k >= 10 && F > res.trace[res.trace.size() - 11] + 0.1 * std::abs(res.trace[res.trace.size() - 11])) {
                res.diverged = true;
                break;
            }
        }
        res.policy.set_params(best);
        return res;
    }

    // Newton-scaled descent with Armijo backtracking on the fixed-sample objective
    auto grad_at = [&](const DriftPolicy& u, bool curv) {
        GradientResult g;
        if (cfg.method == OptimizerConfig::Adjoint) {
            g = gradient_impl(m, u, f, cfg.n_traj, cfg.seed, cfg.parallel, curv);
            res.evaluations += 1;
            return g;
        }
        // central differences; second differences supply the diagonal curvature
        g.F = saa_value(m, u, f, cfg);
        g.grad.assign(P, 0.0);
        g.curvature.assign(P, 0.0);
        std::vector<double> th = u.params();
        double smax = 0;
        for (double v : th) smax = std::max(smax, std::abs(v));
        for (int i = 0; i < P; ++i) {
            if (!freep[i]) continue;
            double h = 1e-3 * std::max(std::abs(th[i]), 0.1 * smax + 1e-2);
            DriftPolicy a = u, b = u;
            auto ta = th, tb = th;
            ta[i] += h;
            tb[i] -= h;
            a.set_params(ta);
            b.set_params(tb);
            double Fa = saa_value(m, a, f, cfg), Fb = saa_value(m, b, f, cfg);
            g.grad[i] = (Fa - Fb) / (2 * h);
            g.curvature[i] = (Fa - 2 * g.F + Fb) / (h * h);
        }
        res.evaluations += 1 + 2 * P;
        return g;
    };

    GradientResult G = grad_at(cur, true);
    std::vector<double> H = G.curvature;
    double hmax = 0;
    for (int i = 0; i < P; ++i) if (freep[i]) hmax = std::max(hmax, H[i]);
    if (!(hmax > 0)) hmax = 1;
    for (auto& v : H) v = std::max(v, 1e-3 * hmax);
    double F = G.F;
    res.trace.push_back(F);
    double eta = cfg.step;
    for (int it = 0; it < cfg.max_iter; ++it) {
        std::vector<double> th = cur.params(), dir(P, 0.0);
        double slope = 0;
        for (int i = 0; i < P; ++i)
            if (freep[i]) {
                dir[i] = -G.grad[i] / H[i];
                slope += G.grad[i] * dir[i];
            }
        if (!(slope < 0)) break;
        bool accepted = false;
        for (int bt = 0; bt < 12; ++bt) {
            DriftPolicy cand = cur;
            std::vector<double> tc(P);
            for (int i = 0; i < P; ++i) tc[i] = th[i] + eta * dir[i];
            cand.set_params(clamp_params(tc, cfg.gain_bound));
            GradientResult Gc = grad_at(cand, false);
            if (Gc.F <= F + 1e-4 * eta * slope) {
                double rel = (F - Gc.F) / std::max(std::abs(F), 1e-12);
                cur = cand;
                F = Gc.F;
                G = Gc;
                res.trace.push_back(F);
                accepted = true;
                eta = std::min(cfg.step, 2 * eta);
                if (rel < cfg.tol) it = cfg.max_iter;
                break;
            }
            eta *= 0.5;
        }
        if (!accepted) break;
    }
    res.policy = cur;
    return res;
}

DriftSignal cell_bump_direction(const Model& m, int cell, double radius, double amp) {
    DriftSignal h(m.s.cells(), Field(m.g.sites(), 0.0));
    h.at(cell) = bump_field(m.g, radius, amp);
    return h;
}

std::vector<ResidualEntry> el_residual(const Model& m, const DriftPolicy& u,
                                       const PerturbationSpec& f, int n, std::uint64_t seed,
                                       const std::vector<DriftSignal>& open_dirs,
                                       const std::vector<int>& span_params, bool parallel) {
    const int M = m.s.cells(), NS = m.g.sites();
    const double a2 = m.g.a * m.g.a;
    const auto& sup = m.rho.support;
    const int nd = int(open_dirs.size()), ns = int(span_params.size());
    // the martingale oracle exists for the zero policy when grad f is constant
    const bool zero_policy = u.c.empty() && u.d.empty() && u.h.empty() &&
                             (f.kind == PerturbationSpec::None || f.kind == PerturbationSpec::Linear);
    // deterministic pieces of each open-loop direction: I_inf(h) and J_j h_j
    std::vector<Field> Ih;
    std::vector<std::vector<Field>> Jh(nd);
    for (auto& h : open_dirs) {
        Ih.push_back(integrate_drift(m.g, m.s, h, 0, M));
    }
    for (int k = 0; k < nd; ++k)
        for (int j = 0; j < M; ++j) {
            Field o(NS);
            apply_symbol(m.g, m.s.J[j].data(), open_dirs[k][j].data(), o.data());
            Jh[k].push_back(std::move(o));
        }
    Prepared P = prepare(m, u);
    const int nc = int(u.c.size());

    struct Row { std::vector<double> v, o; bool finite = true; };
    auto rows = ensemble<Row>(size_t(n), [&](size_t idx) {
        Row row;
        row.v.assign(nd + ns, 0.0);
        row.o.assign(nd, 0.0);
        Tape tape;
        tape.sn.resize(M);
        tape.cs.resize(M);
        LoopOptions opt;
        opt.record_drift = nd > 0;
        if (!P.h_hat.empty()) opt.open_loop = &P.h_hat;
        if (zero_policy && nd) {
            opt.observer = [&](int j, const Field& W) {
                if (j >= M) return;
                double coef = -m.p.lambda * m.p.beta * m.alpha[j] * m.s.dt[j] * a2;
                for (int k = 0; k < nd; ++k) {
                    double acc = 0;
                    for (int x : sup) acc += m.rho.rho[x] * std::sin(m.p.beta * W[x]) * Jh[k][j][x];
                    row.o[k] += coef * acc;
                }
            };
        }
        GainFn gain = make_gain(m, u, ns ? &tape : nullptr);
        auto r = closed_loop_simulate(m.g, m.s, gain, seed, idx, opt);
        row.finite = r.finite;
        if (!r.finite) return row;
        Field gphi = phi_gradient(m, f, r.Y);
        for (int k = 0; k < nd; ++k) {
            double v = inner(m.g, gphi, Ih[k]);
            for (int j = 0; j < M; ++j) {
                const Field& uj = r.u[j];
                double acc = 0;
                for (int x = 0; x < NS; ++x) acc += uj[x] * open_dirs[k][j][x];
                v += a2 * acc * m.s.dt[j];
            }
            row.v[k] = v;
            if (zero_policy && f.kind == PerturbationSpec::Linear) row.o[k] += inner(m.g, f.psi, Ih[k]);
        }
        // tangent directions: forward sensitivity of Y to one policy parameter
        Field dY(NS), dg(NS), q(NS), g(NS);
        for (int s = 0; s < ns; ++s) {
            int pi = span_params[s];
            bool is_c = pi < nc;
            int j0 = is_c ? pi : pi - nc;
            std::fill(dY.begin(), dY.end(), 0.0);
            double dE = 0;
            for (int j = j0; j < M; ++j) {
                double c = nc ? u.c[j] : 0, d = u.d.empty() ? 0 : u.d[j];
                std::fill(dg.begin(), dg.end(), 0.0);
                if (c != 0 && !tape.sn[j].empty())
                    for (size_t i = 0; i < sup.size(); ++i)
                        dg[sup[i]] = c * m.p.beta * m.rho.rho[sup[i]] * tape.cs[j][i] * dY[sup[i]];
                if (j == j0) {
                    if (is_c) for (size_t i = 0; i < sup.size(); ++i) dg[sup[i]] += m.rho.rho[sup[i]] * tape.sn[j][i];
                    else for (int x = 0; x < NS; ++x) dg[x] += u.psi[x];
                }
                for (int x = 0; x < NS; ++x) g[x] = d != 0 ? d * u.psi[x] : 0.0;
                if (c != 0 && !tape.sn[j].empty())
                    for (size_t i = 0; i < sup.size(); ++i) g[sup[i]] += c * m.rho.rho[sup[i]] * tape.sn[j][i];
                apply_symbol(m.g, m.s.dC[j].data(), dg.data(), q.data());
                dE += inner(m.g, g, q);
                for (int x = 0; x < NS; ++x) dY[x] -= q[x];
            }
            row.v[nd + s] = dE + inner(m.g, gphi, dY);
        }
        return row;
    }, parallel);

    std::vector<ResidualEntry> out;
    for (int k = 0; k < nd + ns; ++k) {
        std::vector<double> v, o;
        for (auto& r : rows)
            if (r.finite) {
                v.push_back(r.v[k]);
                if (k < nd) o.push_back(r.o[k]);
            }
        ResidualEntry e;
        e.in_span = k >= nd;
        e.label = k < nd ? "open_loop_" + std::to_string(k)
                         : "tangent_param_" + std::to_string(span_params[k - nd]);
        e.value = mean_se(v);
        if (k < nd && zero_policy) e.oracle = mean_se(o);
        out.push_back(e);
    }
    if (ns) {
        auto G = objective_gradient(m, u, f, n, seed, parallel);
        for (int s = 0; s < ns; ++s) out[nd + s].oracle = {G.grad[span_params[s]], 0.0};
    }
    return out;
}

DriftProfile drift_profile(const Model& m, const DriftPolicy& u, int n, std::uint64_t seed,
                           double t_lo, double t_hi, bool parallel) {
    const int M = m.s.cells();
    Prepared P = prepare(m, u);
    GainFn gain = make_gain(m, u, nullptr);
    auto sups = ensemble<std::vector<double>>(size_t(n), [&](size_t i) {
        LoopOptions opt;
        opt.drift_sup = true;
        opt.gain_mask = &P.mask;
        if (!P.h_hat.empty()) opt.open_loop = &P.h_hat;
        return closed_loop_simulate(m.g, m.s, gain, seed, i, opt).sup;
    }, parallel);
    DriftProfile d;
    d.t_lo = t_lo;
    d.t_hi = t_hi;
    std::vector<double> x, y;
    for (int j = 0; j < M; ++j) {
        std::vector<double> col(n);
        for (int i = 0; i < n; ++i) col[i] = sups[i][j];
        auto e = mean_se(col);
        d.t.push_back(m.s.t[j]);
        d.mean_sup.push_back(e.value);
        d.se_sup.push_back(e.se);
        if (m.s.t[j] >= t_lo && m.s.t[j] <= t_hi && e.value > 0) {
            x.push_back(std::log(m.s.t[j]));
            y.push_back(std::log(e.value));
        }
    }
    d.points = int(x.size());
    if (d.points >= 3) d.fit = linear_fit(x, y);
    else if (!(u.c.empty() && u.d.empty() && u.h.empty()))
        throw std::runtime_error("drift profile window holds fewer than 3 knots");
    return d;
}

double gaussian_value(const TorusGrid& g, const Field& psi, const std::vector<double>& sym) {
    Field c(g.sites());
    apply_symbol(g, sym.data(), psi.data(), c.data());
    return -0.5 * inner(g, psi, c);
}

DPReport dp_consistency(const Model& m, int S, const PerturbationSpec& f,
                        const OptimizerConfig& cfg, int n_eval, std::uint64_t eval_seed) {
    if (m.p.lambda != 0 || f.kind != PerturbationSpec::Linear)
        throw std::invalid_argument("dp_consistency needs lambda = 0 and a linear functional");
    const int M = m.s.cells();
    if (S < 0 || S > M) throw std::out_of_range("split knot");
    DPReport rep;
    rep.split = S;
    rep.closed_form = gaussian_value(m.g, f.psi, m.s.Cinf);

    DriftPolicy init;
    init.kind = DriftPolicy::ClosedFormLinear;
    init.psi = f.psi;
    init.d.assign(M, 0.0);
    auto one = optimize_drift(m, init, f, cfg);
    rep.one_shot = evaluate_functional(m, one.policy, f, n_eval, eval_seed, cfg.parallel).F;

    // outer stage: drift only on cells before S, terminal value of the inner stage in closed form
    OptimizerConfig c2 = cfg;
    c2.free.assign(M, 0);
    for (int j = 0; j < S; ++j) c2.free[j] = 1;
    auto two = optimize_drift(m, init, f, c2);
    std::vector<double> CS(m.g.modes());
    for (int k = 0; k < m.g.modes(); ++k) CS[k] = m.s.Cinf[k] - symbol_C(m.g.lam[k], m.s.t[S]);
    double inner_value = gaussian_value(m.g, f.psi, CS);
    Prepared P = prepare(m, two.policy);
    GainFn gain = make_gain(m, two.policy, nullptr);
    auto vals = ensemble<double>(size_t(n_eval), [&](size_t i) {
        double yS = 0;
        LoopOptions opt;
        opt.gain_mask = &P.mask;
        opt.observer = [&](int j, const Field& Y) { if (j == S) yS = inner(m.g, f.psi, Y); };
        auto r = closed_loop_simulate(m.g, m.s, gain, eval_seed, i, opt);
        return yS + r.energy + inner_value;
    }, cfg.parallel);
    rep.two_stage = mean_se(vals);
    return rep;
}

}  // namespace sg
