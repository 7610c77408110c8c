#include "sg/schedule.hpp"

#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>

namespace sg {

namespace {
std::uint64_t fnv1a(std::uint64_t h, const void* p, size_t n) {
    auto b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < n; ++i) {
        h ^= b[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

// increments smaller than this fraction of C_inf are below double resolution of the field
constexpr double kNegligible = 1e-32;
}  // namespace

ScaleSchedule make_schedule(const TorusGrid& g, const ScheduleSpec& sp) {
    if (sp.knots < 2) throw std::invalid_argument("schedule needs at least 2 knots");
    double tmax = sp.t_max > 0 ? sp.t_max : 4 * std::pow(std::numbers::pi / g.a, 2);
    if (!(sp.t_min > 0) || !(tmax > sp.t_min)) throw std::invalid_argument("bad schedule range");
    ScaleSchedule s;
    int K = sp.knots, M = K - 1, NM = g.modes();
    s.t.resize(K);
    for (int i = 0; i < K; ++i)
        s.t[i] = std::exp(std::log(sp.t_min) + (std::log(tmax) - std::log(sp.t_min)) * i / M);
    s.t[0] = sp.t_min;
    s.t[M] = tmax;
    s.dt.resize(M);
    for (int j = 0; j < M; ++j) s.dt[j] = s.t[j + 1] - s.t[j];

    std::vector<std::vector<double>> C(K, std::vector<double>(NM));
    for (int i = 0; i < K; ++i)
        for (int k = 0; k < NM; ++k) C[i][k] = symbol_C(g.lam[k], s.t[i]);
    s.Cinf.resize(NM);
    for (int k = 0; k < NM; ++k) s.Cinf[k] = 1 / g.lam[k];
    s.C0 = C[0];
    s.Ctail.resize(NM);
    for (int k = 0; k < NM; ++k) s.Ctail[k] = s.Cinf[k] - C[M][k];

    s.dC.assign(M, std::vector<double>(NM));
    s.J.assign(M, std::vector<double>(NM));
    for (int j = 0; j < M; ++j)
        for (int k = 0; k < NM; ++k) {
            double d = std::max(C[j + 1][k] - C[j][k], 0.0);
            s.dC[j][k] = d;
            s.J[j][k] = std::sqrt(d / s.dt[j]);
        }

    double ia2 = 1 / (g.a * g.a);
    auto noise = [&](const std::vector<double>& c) {
        std::vector<double> v(NM);
        for (int k = 0; k < NM; ++k) v[k] = c[k] > kNegligible * s.Cinf[k] ? c[k] * ia2 : 0.0;
        return v;
    };
    s.var.push_back(noise(s.C0));
    for (int j = 0; j < M; ++j) s.var.push_back(noise(s.dC[j]));
    s.var.push_back(noise(s.Ctail));

    s.K.resize(K);
    for (int i = 0; i < K; ++i) s.K[i] = k_zero_variance(g, s.t[i]);
    s.Kinf = k_zero_variance(g, INFINITY);

    std::uint64_t h = 0xcbf29ce484222325ull;
    h = fnv1a(h, &g.n, sizeof g.n);
    h = fnv1a(h, &g.ell, sizeof g.ell);
    h = fnv1a(h, &g.mass, sizeof g.mass);
    h = fnv1a(h, s.t.data(), s.t.size() * sizeof(double));
    s.checksum = h;
    return s;
}

Field PathState::infinity(const TorusGrid& g) const {
    Spectrum w = W.back();
    for (size_t k = 0; k < w.size(); ++k) w[k] += tail[k];
    return inverse(g, w);
}

PathState sample_path(const TorusGrid& g, const ScaleSchedule& s, std::uint64_t seed,
                      std::uint64_t traj) {
    PathState p;
    p.seed = seed;
    p.traj = traj;
    int M = s.cells(), NM = g.modes();
    p.dW.assign(M + 1, Spectrum(NM));
    p.W.assign(M + 1, Spectrum(NM));
    for (int i = 0; i <= M; ++i) {
        add_gaussian_spectrum(g, s.var[i].data(), seed, traj, std::uint32_t(i), p.dW[i].data());
        for (int k = 0; k < NM; ++k) p.W[i][k] = (i ? p.W[i - 1][k] : cplx(0)) + p.dW[i][k];
    }
    p.tail.assign(NM, cplx(0));
    add_gaussian_spectrum(g, s.var[M + 1].data(), seed, traj, std::uint32_t(M + 1),
                          p.tail.data());
    return p;
}

Field integrate_drift(const TorusGrid& g, const ScaleSchedule& s, const DriftSignal& u,
                      int from, int to) {
    if (from < 0 || to > s.cells() || from > to || int(u.size()) < to)
        throw std::out_of_range("knot range out of bounds");
    int NM = g.modes();
    Spectrum acc(NM), tmp(NM);
    for (int j = from; j < to; ++j) {
        forward(g, u[j].data(), tmp.data());
        for (int k = 0; k < NM; ++k) acc[k] += s.J[j][k] * s.dt[j] * tmp[k];
    }
    return inverse(g, acc);
}

double drift_energy(const TorusGrid& g, const ScaleSchedule& s, const DriftSignal& u) {
    double e = 0;
    for (int j = 0; j < s.cells() && j < int(u.size()); ++j)
        e += 0.5 * g.a * g.a * l2_sq_position(u[j]) * s.dt[j];
    return e;
}

LoopResult closed_loop_simulate(const TorusGrid& g, const ScaleSchedule& s, const GainFn& gain,
                                std::uint64_t seed, std::uint64_t traj, const LoopOptions& opt) {
    const int M = s.cells(), NM = g.modes(), NS = g.sites();
    const double a2 = g.a * g.a;
    thread_local Spectrum Yh, gh, uh;
    thread_local Field Y, gf, uf;
    Yh.assign(NM, cplx(0));
    gh.resize(NM);
    uh.resize(NM);
    Y.resize(NS);
    gf.assign(NS, 0.0);
    LoopResult r;
    if (opt.drift_sup) r.sup.assign(M, 0.0);

    add_gaussian_spectrum(g, s.var[0].data(), seed, traj, 0, Yh.data());
    const bool watch = opt.record_knots || bool(opt.observer);
    for (int j = 0; j < M; ++j) {
        bool probe = gain && (!opt.gain_mask || (*opt.gain_mask)[j]);
        if (probe || watch) inverse(g, Yh.data(), Y.data());
        if (watch) {
            if (opt.record_knots) r.knots.push_back(Y);
            if (opt.observer) opt.observer(j, Y);
        }
        bool active = probe && gain(j, Y, gf);
        const Spectrum* h = opt.open_loop ? &(*opt.open_loop)[j] : nullptr;
        if (active || h) {
            if (active) forward(g, gf.data(), gh.data());
            else std::fill(gh.begin(), gh.end(), cplx(0));
            const double* Jj = s.J[j].data();
            const double* dC = s.dC[j].data();
            const double dt = s.dt[j];
            double e = 0;
            for (int k = 0; k < NM; ++k) {
                cplx u = -Jj[k] * gh[k];
                if (h) u += (*h)[k];
                uh[k] = u;
                e += g.mult[k] * std::norm(u);
                Yh[k] += -dC[k] * gh[k] + (h ? Jj[k] * dt * (*h)[k] : cplx(0));
            }
            r.energy += 0.5 * a2 * e * dt;
            if (opt.record_drift || opt.drift_sup) {
                uf.resize(NS);
                inverse(g, uh.data(), uf.data());
                if (opt.drift_sup) {
                    double m = 0;
                    for (double v : uf) m = std::max(m, std::abs(v));
                    r.sup[j] = m;
                }
                if (opt.record_drift) r.u.push_back(uf);
            }
        } else if (opt.record_drift) {
            r.u.push_back(Field(NS, 0.0));
        }
        add_gaussian_spectrum(g, s.var[j + 1].data(), seed, traj, std::uint32_t(j + 1), Yh.data());
    }
    if (watch) {
        inverse(g, Yh.data(), Y.data());
        if (opt.record_knots) r.knots.push_back(Y);
        if (opt.observer) opt.observer(M, Y);
    }
    add_gaussian_spectrum(g, s.var[M + 1].data(), seed, traj, std::uint32_t(M + 1), Yh.data());
    r.Y.resize(NS);
    inverse(g, Yh.data(), r.Y.data());
    for (double v : r.Y)
        if (!std::isfinite(v)) { r.finite = false; break; }
    r.finite = r.finite && std::isfinite(r.energy);
    return r;
}

}  // namespace sg
