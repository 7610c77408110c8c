#include "experiments.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "sg/besov.hpp"
#include "sg/control.hpp"
#include "sg/measure.hpp"
#include "sg/semiclassical.hpp"

namespace sgx {

using namespace sg;

namespace {

constexpr double kPi = std::numbers::pi;

std::string I(long v) { return std::to_string(v); }
std::string B(bool v) { return v ? "true" : "false"; }

void check(Outcome& o, int crit, const std::string& name, bool pass, const std::string& detail) {
    o.checks.push_back({crit, name, pass, detail});
}

ScheduleSpec schedule_of(const json& c) {
    ScheduleSpec s;
    s.knots = c["schedule"]["knots"].get<int>();
    s.t_min = c["schedule"]["t_min"].get<double>();
    s.t_max = c["schedule"]["t_max"].get<double>();
    return s;
}

SGParams params_of(const json& c, double lambda) {
    SGParams p;
    p.beta = std::sqrt(c["physics"]["beta_sq"].get<double>());
    p.lambda = lambda;
    return p;
}

double lambda_of(const json& c) { return c["physics"]["lambda"].get<double>(); }
double mass_of(const json& c) { return c["grid"]["mass"].get<double>(); }
std::uint64_t seed_of(const json& c, int tag) { return c["mc"]["master_seed"].get<std::uint64_t>() * 1000 + tag; }

TorusGrid main_grid(const json& c) {
    return build_grid(c["grid"]["n_side"].get<int>(), c["grid"]["side_length"].get<double>(), mass_of(c));
}
TorusGrid fine_grid(const json& c) {
    return build_grid(c["fine_grid"]["n_side"].get<int>(), c["fine_grid"]["side_length"].get<double>(),
                      mass_of(c));
}

Model main_model(const json& c, double lambda) {
    return make_model(c["grid"]["n_side"].get<int>(), c["grid"]["side_length"].get<double>(), mass_of(c),
                      schedule_of(c), params_of(c, lambda), c["physics"]["cutoff_radius"].get<double>());
}

std::vector<double> list_of(const json& v) { return v.get<std::vector<double>>(); }

// slope of K_t(0) against log t over [lo, hi] on a log grid
LinFit kernel_slope(const TorusGrid& g, double lo, double hi, int pts = 40) {
    std::vector<double> x, y;
    for (int i = 0; i < pts; ++i) {
        double t = lo * std::pow(hi / lo, double(i) / (pts - 1));
        x.push_back(std::log(t));
        y.push_back(k_zero_variance(g, t));
    }
    return linear_fit(x, y);
}

OptimizerConfig optimizer_of(const json& c, const json& block, int tag) {
    OptimizerConfig o;
    auto m = c["bd_solve"]["method"].get<std::string>();
    o.method = m == "spsa" ? OptimizerConfig::SPSA
             : m == "coordinate_fd" ? OptimizerConfig::CoordinateFD : OptimizerConfig::Adjoint;
    o.seed = seed_of(c, tag);
    o.n_traj = block["opt_traj"].get<int>();
    o.max_iter = block["opt_iter"].get<int>();
    o.gain_bound = c["bd_solve"]["gain_bound"].get<double>();
    return o;
}

DriftPolicy scaled(const DriftPolicy& u, double s) {
    DriftPolicy v = u;
    for (auto& c : v.c) c *= s;
    return v;
}

std::string fmt_est(const Estimate& e) { return num(e.value) + " +- " + num(e.se); }

// ---------------------------------------------------------------- decompose-check
Outcome decompose_check(const json& c) {
    Outcome o;
    const auto& blk = c["decompose_check"];
    TorusGrid g = main_grid(c), fg = fine_grid(c);
    ScaleSchedule s = make_schedule(g, schedule_of(c));
    const std::uint64_t seed = seed_of(c, 1);
    const int M = s.cells();

    Table kt{"k_profile", {"grid", "t", "K", "seed", "n_traj", "se"}};
    bool mono = true;
    double prev = 0;
    for (int j = 0; j <= M; ++j) {
        mono = mono && s.K[j] >= prev;
        prev = s.K[j];
        kt.add({"main", num(s.t[j]), num(s.K[j]), I(seed), "0", "0"});
    }
    kt.add({"main", "inf", num(s.Kinf), I(seed), "0", "0"});
    double k0 = k_zero_variance(g, 0), k0f = k_zero_variance(fg, 0);
    check(o, 1, "K_0(0) = 0 exactly", k0 == 0 && k0f == 0, "K_0 = " + num(k0) + ", fine " + num(k0f));
    check(o, 0, "K_t(0) nondecreasing over knots", mono, "");

    const double m2 = mass_of(c) * mass_of(c);
    const double lo = 16 * m2, hi = std::pow(kPi / fg.a, 2) / 4;
    LinFit kf = kernel_slope(fg, lo, hi);
    double target = 1 / (4 * kPi), rel = std::abs(kf.slope / target - 1);
    Table ks{"kernel_slope", {"grid", "t_lo", "t_hi", "slope", "target", "rel_err", "seed", "n_traj", "se"}};
    ks.add({"fine", num(lo), num(hi), num(kf.slope), num(target), num(rel), I(seed), "0", num(kf.slope_se)});
    check(o, 1, "K_t(0) log-slope within 10% of 1/(4 pi) on the fine grid", rel <= 0.1,
          "slope " + num(kf.slope) + " over t in [" + num(lo) + ", " + num(hi) + "], rel err " + num(rel));

    Table pv{"parseval", {"field", "roundtrip_rel", "parseval_rel", "seed", "n_traj", "se"}};
    double worst = 0;
    for (int i = 0; i < blk["random_fields"].get<int>(); ++i) {
        Field f = white_noise(g, seed, i);
        Field r = spectral_roundtrip(g, f);
        double num2 = 0;
        for (int x = 0; x < g.sites(); ++x) num2 += (r[x] - f[x]) * (r[x] - f[x]);
        double n2 = l2_sq_position(f);
        double rt = std::sqrt(num2 / n2);
        double pr = std::abs(l2_sq_spectral(g, forward(g, f)) - n2) / n2;
        worst = std::max({worst, rt, pr});
        pv.add({I(i), num(rt), num(pr), I(seed), "1", "0"});
    }
    check(o, 1, "Parseval and roundtrip residuals <= 1e-12", worst <= 1e-12, "max " + num(worst));

    Table fd{"fd_consistency", {"t", "delta", "max_residual", "order", "seed", "n_traj", "se"}};
    const double delta = blk["fd_delta"].get<double>();
    bool order_ok = true;
    std::string od;
    for (double t : list_of(blk["young_t"])) {
        double r1 = 0, r2 = 0;
        for (int k = 0; k < g.modes(); ++k) {
            double l = g.lam[k], J2 = std::pow(symbol_J(l, t), 2);
            r1 = std::max(r1, std::abs(symbol_C(l, t + delta) - symbol_C(l, t) - J2 * delta));
            r2 = std::max(r2, std::abs(symbol_C(l, t + delta / 2) - symbol_C(l, t) - J2 * delta / 2));
        }
        double order = std::log2(r1 / r2);
        order_ok = order_ok && order > 1.8 && order < 2.2;
        od += "t=" + num(t) + ": " + num(order) + " ";
        fd.add({num(t), num(delta), num(r1), num(order), I(seed), "0", "0"});
    }
    check(o, 1, "per-mode |dC - J^2 delta| residual is O(delta^2)", order_ok, "observed orders " + od);

    Table yg{"young_bound", {"t", "field", "lhs", "rhs", "seed", "n_traj", "se"}};
    int yviol = 0;
    for (double t : list_of(blk["young_t"])) {
        auto J = make_multiplier(g, Symbol::J, t);
        for (int i = 0; i < 5; ++i) {
            Field f = white_noise(g, seed + 1, i);
            Field Jf = apply_multiplier(g, J, f);
            double lhs = 0, sup = 0;
            for (int x = 0; x < g.sites(); ++x) {
                lhs = std::max(lhs, std::abs(Jf[x]));
                sup = std::max(sup, std::abs(f[x]));
            }
            double rhs = sup / t;
            if (lhs > rhs * (1 + 1e-12)) ++yviol;
            yg.add({num(t), I(i), num(lhs), num(rhs), I(seed + 1), "1", "0"});
        }
    }
    check(o, 0, "sup|J_t f| <= sup|f| / t", yviol == 0, I(yviol) + " violations");

    Table en{"energy_inequality", {"drift", "lhs", "rhs", "ratio", "seed", "n_traj", "se"}};
    int viol = 0;
    double maxratio = 0;
    const auto key = philox_key(seed + 2);
    for (int i = 0; i < blk["energy_drifts"].get<int>(); ++i) {
        DriftSignal u(M);
        for (int j = 0; j < M; ++j) {
            u[j] = white_noise(g, seed + 2, std::uint64_t(i) * M + j);
            double amp = std::exp(normal_pair(std::uint32_t(j), 7, std::uint64_t(i), key).first);
            for (auto& v : u[j]) v *= amp;
        }
        Field If = integrate_drift(g, s, u, 0, M), LI(g.sites());
        apply_symbol(g, g.lam.data(), If.data(), LI.data());
        double lhs = inner(g, If, LI), rhs = 2 * drift_energy(g, s, u);
        if (lhs > rhs) ++viol;
        maxratio = std::max(maxratio, lhs / rhs);
        en.add({I(i), num(lhs), num(rhs), num(lhs / rhs), I(seed + 2), "1", "0"});
    }
    check(o, 3, "energy inequality ||sqrt(L) I(u)||^2 <= 2 E(u) on random drifts", viol == 0,
          I(viol) + " violations, max ratio " + num(maxratio));

    // W^{1,inf} bound through Young: sup|D I(u)| <= sum_j dt_j |D K_j|_1 sup|u_j|, D in {1, d1, d2}
    auto diffs = [&](const Field& f) {
        std::array<Field, 3> out{f, Field(g.sites()), Field(g.sites())};
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j) {
                int x = i * g.n + j;
                out[1][x] = (f[((i + 1) % g.n) * g.n + j] - f[x]) / g.a;
                out[2][x] = (f[i * g.n + (j + 1) % g.n] - f[x]) / g.a;
            }
        return out;
    };
    const double dexp = 0.6;   // <t>^{-1/2 - delta}, delta = 0.1
    Field delta0(g.sites(), 0.0);
    delta0[0] = 1;
    std::vector<double> kl1(M, 0.0);
    double wbound = 0;
    for (int j = 0; j < M; ++j) {
        Field K(g.sites());
        apply_symbol(g, s.J[j].data(), delta0.data(), K.data());
        for (auto& d : diffs(K))
            for (double v : d) kl1[j] += std::abs(v);
        wbound += s.dt[j] * kl1[j] * std::pow(1 + s.t[j] * s.t[j], -dexp / 2);
    }
    Table wt{"winf_bound", {"drift", "lhs", "rhs", "seed", "n_traj", "se"}};
    int wviol = 0;
    double wmax = 0;
    for (int i = 0; i < 20; ++i) {
        DriftSignal u(M);
        for (int j = 0; j < M; ++j) {
            u[j] = white_noise(g, seed + 3, std::uint64_t(i) * M + j);
            double sup = 0;
            for (double v : u[j]) sup = std::max(sup, std::abs(v));
            double scale = std::pow(1 + s.t[j] * s.t[j], -dexp / 2) / sup;
            for (auto& v : u[j]) v *= scale;
        }
        double lhs = 0;
        for (auto& d : diffs(integrate_drift(g, s, u, 0, M))) {
            double sup = 0;
            for (double v : d) sup = std::max(sup, std::abs(v));
            lhs += sup;
        }
        if (lhs > wbound * (1 + 1e-12)) ++wviol;
        wmax = std::max(wmax, lhs);
        wt.add({I(i), num(lhs), num(wbound), I(seed + 3), "1", "0"});
    }
    check(o, 0, "W^{1,inf} norm of I(u) bounded for <t>^{1/2+delta}-normalized drifts", wviol == 0 && std::isfinite(wbound),
          "max lhs " + num(wmax) + " vs bound " + num(wbound));

    // u_j = J_j L psi reproduces psi through the quadrature resolvent
    Field psi = bump_field(g, 2.0, 1.0);
    Field Lpsi(g.sites());
    apply_symbol(g, g.lam.data(), psi.data(), Lpsi.data());
    DriftSignal u(M, Field(g.sites()));
    for (int j = 0; j < M; ++j) apply_symbol(g, s.J[j].data(), Lpsi.data(), u[j].data());
    Field Ipsi = integrate_drift(g, s, u, 0, M);
    double e2 = 0, n2 = 0;
    for (int x = 0; x < g.sites(); ++x) {
        e2 += (Ipsi[x] - psi[x]) * (Ipsi[x] - psi[x]);
        n2 += psi[x] * psi[x];
    }
    double irel = std::sqrt(e2 / n2);
    double E = drift_energy(g, s, u), Eref = 0.5 * inner(g, psi, Lpsi);
    Table rs{"resolvent", {"quantity", "value", "reference", "rel_err", "seed", "n_traj", "se"}};
    rs.add({"I(J L psi)", num(std::sqrt(n2 * g.a * g.a)), num(std::sqrt(n2 * g.a * g.a)), num(irel), I(seed), "0", "0"});
    rs.add({"energy", num(E), num(Eref), num(std::abs(E / Eref - 1)), I(seed), "0", "0"});
    check(o, 0, "drift J_j L psi integrates to psi within 2%", irel <= 0.02, "rel err " + num(irel));
    check(o, 0, "its energy matches <psi, L psi> / 2 within 2%", std::abs(E / Eref - 1) <= 0.02,
          num(E) + " vs " + num(Eref));

    o.tables = {kt, ks, pv, fd, yg, en, wt, rs};
    return o;
}

// ---------------------------------------------------------------- wick-check
Outcome wick_check(const json& c) {
    Outcome o;
    TorusGrid g = main_grid(c), fg = fine_grid(c);
    ScaleSchedule s = make_schedule(g, schedule_of(c));
    const double beta = std::sqrt(c["physics"]["beta_sq"].get<double>());
    const int M = s.cells(), K = M + 2;   // knots 0..M and infinity
    const int n = c["mc"]["n_traj"].get<int>();
    const int S = c["wick_check"]["split_knot"].get<int>();
    const std::uint64_t seed = seed_of(c, 2);

    struct Row { std::vector<double> cs, sn; double viol = 0, circle = 0; };
    auto rows = ensemble<Row>(size_t(n), [&](size_t i) {
        PathState p = sample_path(g, s, seed, i);
        Row r;
        for (int j = 0; j < K; ++j) {
            WickTrigField w;
            double al;
            if (j <= M) {
                w = wick_trig(g, s, p, j, beta);
                al = alpha_from_K(beta, s.K[j]);
            } else {
                al = alpha_from_K(beta, s.Kinf);
                w = wick_trig(p.infinity(g), al, beta);
            }
            r.cs.push_back(w.c[0]);
            r.sn.push_back(w.s[0]);
            for (int x = 0; x < g.sites(); ++x) {
                r.viol = std::max(r.viol, std::abs(w.c[x]) - al);
                r.circle = std::max(r.circle, std::abs(w.c[x] * w.c[x] + w.s[x] * w.s[x] - al * al) / (al * al));
            }
        }
        return r;
    });

    Table wk{"wick_knots", {"knot", "t", "alpha", "mean_cos", "cos_se", "z_cos", "mean_sin", "sin_se", "seed", "n_traj"}};
    int bad = 0;
    double zmax = 0;
    for (int j = 0; j < K; ++j) {
        std::vector<double> cs(n), sn(n);
        for (int i = 0; i < n; ++i) {
            cs[i] = rows[i].cs[j];
            sn[i] = rows[i].sn[j];
        }
        auto ec = mean_se(cs), es = mean_se(sn);
        double z = ec.se > 0 ? (ec.value - 1) / ec.se : (ec.value == 1 ? 0 : INFINITY);
        zmax = std::max(zmax, std::abs(z));
        if (std::abs(z) > 4) ++bad;
        double t = j <= M ? s.t[j] : INFINITY;
        double al = alpha_from_K(beta, j <= M ? s.K[j] : s.Kinf);
        wk.add({j <= M ? I(j) : "inf", num(t), num(al), num(ec.value), num(ec.se), num(z), num(es.value),
                num(es.se), I(seed), I(n)});
    }
    check(o, 2, "E[Wick cos_t(0)] = 1 within 4 SE at every knot", bad == 0,
          I(bad) + " of " + I(K) + " knots outside, max |z| " + num(zmax));
    double viol = 0, circ = 0;
    for (auto& r : rows) {
        viol = std::max(viol, r.viol);
        circ = std::max(circ, r.circle);
    }
    check(o, 2, "|Wick cos| <= alpha(t) pointwise", viol <= 0, "max(|cos| - alpha) = " + num(viol));
    check(o, 0, "cos^2 + sin^2 = alpha^2 to 1e-10", circ <= 1e-10, "max rel err " + num(circ));

    // orthogonal increments at site 0 between knots S and M
    std::vector<double> prod(n), inc(n), base(n);
    for (int i = 0; i < n; ++i) {
        inc[i] = rows[i].cs[M] - rows[i].cs[S];
        base[i] = rows[i].cs[S];
    }
    double mi = mean(inc), mb = mean(base);
    for (int i = 0; i < n; ++i) prod[i] = (inc[i] - mi) * (base[i] - mb);
    auto cov = mean_se(prod);
    Table oi{"orthogonal_increments", {"knot_s", "knot_t", "cov", "se", "seed", "n_traj"}};
    oi.add({I(S), I(M), num(cov.value), num(cov.se), I(seed), I(n)});
    check(o, 0, "martingale increments orthogonal to the past within 4 SE",
          std::abs(cov.value) <= 4 * cov.se, "cov " + fmt_est(cov));

    const double m2 = mass_of(c) * mass_of(c);
    const double lo = 16 * m2, hi = std::pow(kPi / fg.a, 2) / 4;
    LinFit kf = kernel_slope(fg, lo, hi);
    double slope = 0.5 * beta * beta * kf.slope, target = beta * beta / (8 * kPi);
    double rel = std::abs(slope / target - 1);
    Table as{"alpha_slope", {"grid", "t_lo", "t_hi", "slope", "target", "rel_err", "seed", "n_traj", "se"}};
    as.add({"fine", num(lo), num(hi), num(slope), num(target), num(rel), I(seed), "0", num(0.5 * beta * beta * kf.slope_se)});
    check(o, 2, "log alpha log-slope within 10% of beta^2/(8 pi) on the fine grid", rel <= 0.1,
          "slope " + num(slope) + " vs " + num(target));
    o.tables = {wk, oi, as};
    return o;
}

// ---------------------------------------------------------------- lp-scaling
Outcome lp_scaling(const json& c) {
    Outcome o;
    const auto& blk = c["lp_scaling"];
    const double beta = std::sqrt(c["physics"]["beta_sq"].get<double>());
    TorusGrid fg = fine_grid(c);
    BlockPartition P = make_partition(fg);
    const double al = alpha_from_K(beta, k_zero_variance(fg, INFINITY));
    const int n = blk["n_traj"].get<int>();
    const std::uint64_t seed = seed_of(c, 3);
    auto energies = ensemble<std::vector<double>>(size_t(n), [&](size_t i) {
        Field W = sample_terminal(fg, seed, i);
        Field f(fg.sites());
        for (int x = 0; x < fg.sites(); ++x) f[x] = al * std::cos(beta * W[x]);
        return block_energies(fg, P, f);
    });
    Table bp{"block_profile", {"block", "variance", "variance_se", "resolved", "seed", "n_traj"}};
    Table lf{"lp_fit", {"slope", "slope_se", "bootstrap_se", "target", "shells", "seed", "n_traj"}};
    double target = beta * beta / (2 * kPi);
    try {
        BlockProfile prof = block_variance_profile(fg, P, energies, seed);
        for (size_t k = 0; k < prof.j.size(); ++k)
            bp.add({I(prof.j[k]), num(prof.var[k]), num(prof.se[k]), B(prof.j[k] >= 0 && prof.j[k] <= P.resolved_max),
                    I(seed), I(n)});
        lf.add({num(prof.fit.slope), num(prof.fit.slope_se), num(prof.slope_boot_se), num(target), I(prof.shells), I(seed), I(n)});
        check(o, 7, "block-variance log2 slope within 0.3 of beta^2/(2 pi) over >= 3 resolved shells",
              prof.shells >= 3 && std::abs(prof.fit.slope - target) <= 0.3,
              "slope " + num(prof.fit.slope) + " +- " + num(prof.slope_boot_se) + " over " + I(prof.shells) + " shells");
    } catch (const std::exception& e) {
        check(o, 7, "block-variance log2 slope within 0.3 of beta^2/(2 pi) over >= 3 resolved shells", false, e.what());
    }

    // Besov norm of the Wick cosine across knots on the main grid
    TorusGrid g = main_grid(c);
    ScaleSchedule s = make_schedule(g, schedule_of(c));
    BlockPartition Pm = make_partition(g);
    BesovParams bpar;
    bpar.s = -beta * beta / (4 * kPi) - 0.1;
    bpar.p = bpar.q = 2;
    bpar.weighted = true;
    bpar.weight.kind = WeightSpec::Polynomial;
    bpar.weight.sigma = 3;
    const int M = s.cells(), nk = blk["besov_knots"].get<int>(), nb = blk["besov_n_traj"].get<int>();
    std::vector<int> knots;
    for (int k = 0; k < nk; ++k) {
        int j = int(std::lround(double(k) * M / (nk - 1)));
        if (knots.empty() || knots.back() != j) knots.push_back(j);
    }
    const std::uint64_t seed2 = seed_of(c, 4);
    auto norms = ensemble<std::vector<double>>(size_t(nb), [&](size_t i) {
        PathState p = sample_path(g, s, seed2, i);
        std::vector<double> r;
        for (int j : knots) {
            auto w = wick_trig(g, s, p, j, beta);
            double b = besov_norm(g, Pm, w.c, bpar);
            r.push_back(b * b);
        }
        return r;
    });
    Table bs{"besov_profile", {"knot", "t", "mean_norm_p", "mean_norm_p_se", "ratio_to_first", "seed", "n_traj"}};
    double first = 0, sup = 0;
    for (size_t k = 0; k < knots.size(); ++k) {
        std::vector<double> col(nb);
        for (int i = 0; i < nb; ++i) col[i] = norms[i][k];
        auto e = mean_se(col);
        if (k == 0) first = e.value;
        sup = std::max(sup, e.value);
        bs.add({I(knots[k]), num(s.t[knots[k]]), num(e.value), num(e.se), num(e.value / first), I(seed2), I(nb)});
    }
    check(o, 7, "weighted Besov norm of Wick cos bounded within 2x of its first-knot value", sup <= 2 * first,
          "sup/first = " + num(sup / first));
    o.tables = {bp, lf, bs};
    return o;
}

// ---------------------------------------------------------------- bd-solve
Outcome bd_solve(const json& c) {
    Outcome o;
    const auto& blk = c["bd_solve"];
    const int n = c["mc"]["n_traj"].get<int>(), ns = blk["setting_traj"].get<int>();
    const double lam = lambda_of(c);
    Model m0 = main_model(c, 0.0);
    Model m = main_model(c, lam);
    const int M = m.s.cells();
    Field psi = bump_field(m.g, blk["psi_radius"].get<double>(), blk["psi_amp"].get<double>());
    PerturbationSpec lin;
    lin.kind = PerturbationSpec::Linear;
    lin.psi = psi;
    const double g0 = gaussian_value(m0.g, psi, m0.s.Cinf);
    const std::uint64_t sd = seed_of(c, 5), sev = seed_of(c, 6);

    // Gaussian closed forms
    Table gs{"gaussian", {"estimator", "value", "se", "closed_form", "z", "seed", "n_traj"}};
    auto gz = [&](const Estimate& e) { return e.se > 0 ? (e.value - g0) / e.se : (e.value == g0 ? 0.0 : INFINITY); };
    auto d0 = direct_log_laplace(m0, lin, n, sd);
    gs.add({"direct", num(d0.value.value), num(d0.value.se), num(g0), num(gz(d0.value)), I(sd), I(n)});
    check(o, 4, "lambda=0 direct estimate within 3 SE of the Gaussian closed form", std::abs(gz(d0.value)) <= 3,
          fmt_est(d0.value) + " vs " + num(g0));
    auto e0 = evaluate_functional(m0, DriftPolicy::closed_form_linear(m0, psi), lin, n, sd);
    gs.add({"closed_form_policy", num(e0.F.value), num(e0.F.se), num(g0), num(gz(e0.F)), I(sd), I(n)});
    check(o, 4, "lambda=0 closed-form policy within 3 SE of the Gaussian closed form", std::abs(gz(e0.F)) <= 3,
          fmt_est(e0.F) + " vs " + num(g0));
    OptimizerConfig oc = optimizer_of(c, blk, 7);
    DriftPolicy lin0;
    lin0.kind = DriftPolicy::ClosedFormLinear;
    lin0.psi = psi;
    lin0.d.assign(M, 0.0);
    auto og = optimize_drift(m0, lin0, lin, oc);
    auto eg = evaluate_functional(m0, og.policy, lin, n, sev);
    gs.add({"optimized", num(eg.F.value), num(eg.F.se), num(g0), num(gz(eg.F)), I(sev), I(n)});
    check(o, 4, "lambda=0 optimizer recovers the closed form within 2 SE", std::abs(gz(eg.F)) <= 2,
          fmt_est(eg.F) + " vs " + num(g0));
    const int split = blk["dp_split"].get<int>();
    auto dp = dp_consistency(m0, split, lin, oc, n, sev + 1);
    double dse = combined_se(dp.one_shot.se, dp.two_stage.se);
    gs.add({"dp_one_shot", num(dp.one_shot.value), num(dp.one_shot.se), num(g0), num(gz(dp.one_shot)), I(sev + 1), I(n)});
    gs.add({"dp_two_stage", num(dp.two_stage.value), num(dp.two_stage.se), num(g0), num(gz(dp.two_stage)), I(sev + 1), I(n)});
    check(o, 4, "dynamic-programming split agrees with one-shot within 2 combined SE",
          std::abs(dp.one_shot.value - dp.two_stage.value) <= 2 * dse,
          "split " + I(split) + ": " + fmt_est(dp.one_shot) + " vs " + fmt_est(dp.two_stage));

    // lambda=0, f=0: gains started away from zero collapse
    OptimizerConfig oc0 = oc;
    auto o0 = optimize_drift(m0, DriftPolicy::first_order_sine(m), PerturbationSpec{}, oc0);
    auto e00 = evaluate_functional(m0, o0.policy, PerturbationSpec{}, ns, sev);
    check(o, 0, "lambda=0, f=0: optimized energy term <= 1e-3", e00.energy_term.value <= 1e-3,
          "energy " + fmt_est(e00.energy_term));

    // interacting optimization
    DriftPolicy init = DriftPolicy::first_order_sine(m);
    auto opt = optimize_drift(m, init, PerturbationSpec{}, oc);
    Table tr{"optimizer_trace", {"iteration", "objective", "seed", "n_traj", "se"}};
    for (size_t k = 0; k < opt.trace.size(); ++k) tr.add({I(long(k)), num(opt.trace[k]), I(oc.seed), I(oc.n_traj), "0"});
    bool mono = true;
    for (size_t k = 1; k < opt.trace.size(); ++k) mono = mono && opt.trace[k] <= opt.trace[k - 1];
    check(o, 0, "optimizer CRN objective is nonincreasing", mono && !opt.diverged,
          num(opt.trace.front()) + " -> " + num(opt.trace.back()));
    Table gains{"gains", {"cell", "t", "init", "optimized", "seed", "n_traj", "se"}};
    for (int j = 0; j < M; ++j)
        gains.add({I(j), num(m.s.t[j]), num(init.c[j]), num(opt.policy.c[j]), I(oc.seed), I(oc.n_traj), "0"});

    // weak duality across policies and settings
    Table du{"duality", {"setting", "lambda", "f", "policy", "F", "F_se", "direct", "direct_se", "slack_se", "ok", "seed", "n_traj"}};
    PerturbationSpec sb;
    sb.kind = PerturbationSpec::SmearedBounded;
    sb.psi = psi;
    sb.kappa = blk["kappa"].get<double>();
    struct Setting { std::string name; double lambda; PerturbationSpec f; std::string fname; int n; };
    std::vector<Setting> settings = {{"S1", lam, {}, "none", n},
                                     {"S2", lam, sb, "smeared_bounded", ns},
                                     {"S3", blk["lambda_alt"].get<double>(), lin, "linear", ns}};
    int dviol = 0, dcount = 0;
    double gap = NAN;
    Estimate F_zero, F_init, F_opt, direct1;
    std::vector<double> pt_zero, pt_init, pt_opt;
    for (size_t si = 0; si < settings.size(); ++si) {
        auto& st = settings[si];
        Model ms = si == 0 ? m : main_model(c, st.lambda);
        const std::uint64_t ss = seed_of(c, 10 + int(si));
        auto D = direct_log_laplace(ms, st.f, st.n, ss);
        DriftPolicy ini = DriftPolicy::first_order_sine(ms);
        std::vector<std::pair<std::string, DriftPolicy>> pols = {
            {"zero", DriftPolicy::zero()}, {"init_x0.5", scaled(ini, 0.5)}, {"init", ini},
            {"init_x1.5", scaled(ini, 1.5)}, {"optimized", opt.policy}};
        for (auto& [pn, pu] : pols) {
            auto F = evaluate_functional(ms, pu, st.f, st.n, ss);
            double slack = combined_se(F.F.se, D.value.se);
            bool ok = D.value.value <= F.F.value + 2 * slack;
            ++dcount;
            if (!ok) ++dviol;
            du.add({st.name, num(st.lambda), st.fname, pn, num(F.F.value), num(F.F.se), num(D.value.value),
                    num(D.value.se), num(slack), B(ok), I(ss), I(st.n)});
            if (si == 0) {
                if (pn == "zero") { F_zero = F.F; pt_zero = F.per_traj; }
                if (pn == "init") { F_init = F.F; pt_init = F.per_traj; }
                if (pn == "optimized") { F_opt = F.F; pt_opt = F.per_traj; }
            }
        }
        if (si == 0) {
            direct1 = D.value;
            double den = std::abs(D.value.value);
            gap = (F_opt.value - D.value.value) / (den > 1e-12 ? den : 1.0);
        }
    }
    check(o, 5, "weak duality: direct <= variational + 2 combined SE for every policy and setting", dviol == 0,
          I(dcount - dviol) + "/" + I(dcount) + " cases hold");
    check(o, 5, "relative duality gap after optimization <= 5%", std::abs(gap) <= 0.05,
          "F_opt " + fmt_est(F_opt) + ", direct " + fmt_est(direct1) + ", gap " + num(100 * gap) + "%");
    const double cutoff_int = lam * m.g.a * m.g.a * m.rho.mass();
    check(o, 0, "zero policy value equals lambda a^2 sum rho within 4 SE",
          std::abs(F_zero.value - cutoff_int) <= 4 * F_zero.se, fmt_est(F_zero) + " vs " + num(cutoff_int));
    auto d_oi = paired_difference(pt_opt, pt_init), d_iz = paired_difference(pt_init, pt_zero);
    Table od{"policy_order", {"comparison", "difference", "se", "seed", "n_traj"}};
    od.add({"optimized - init", num(d_oi.value), num(d_oi.se), I(seed_of(c, 10)), I(n)});
    od.add({"init - zero", num(d_iz.value), num(d_iz.se), I(seed_of(c, 10)), I(n)});
    check(o, 0, "F(opt) <= F(init) <= F(zero) under CRN (paired 2 SE)",
          d_oi.value <= 2 * d_oi.se && d_iz.value <= 2 * d_iz.se,
          "opt-init " + fmt_est(d_oi) + ", init-zero " + fmt_est(d_iz));

    // Euler-Lagrange residual
    const std::uint64_t sel = seed_of(c, 20);
    const int nel = blk["el_traj"].get<int>();
    std::vector<DriftSignal> dirs;
    std::vector<std::string> dnames;
    for (int j : {M / 4, M / 2, 3 * M / 4}) {
        dirs.push_back(cell_bump_direction(m, j, 2.0));
        dnames.push_back("bump_cell_" + I(j));
    }
    std::vector<int> span = {M / 3, M / 2, 2 * M / 3};
    auto el = el_residual(m, opt.policy, PerturbationSpec{}, nel, sel, dirs, span);
    auto elz = el_residual(m, DriftPolicy::zero(), PerturbationSpec{}, nel, sel, dirs, {});
    Table er{"el_residual", {"policy", "direction", "in_span", "value", "se", "oracle", "oracle_se", "seed", "n_traj"}};
    int span_bad = 0;
    for (auto& e : el) {
        er.add({"optimized", e.label, B(e.in_span), num(e.value.value), num(e.value.se), num(e.oracle.value),
                num(e.oracle.se), I(sel), I(nel)});
        if (e.in_span && std::abs(e.value.value) > 3 * e.value.se) ++span_bad;
    }
    check(o, 0, "optimized policy: in-span EL residuals within 3 SE of 0", span_bad == 0,
          I(span_bad) + " in-span directions outside");
    int orc_bad = 0;
    for (auto& e : elz) {
        er.add({"zero", e.label, B(e.in_span), num(e.value.value), num(e.value.se), num(e.oracle.value),
                num(e.oracle.se), I(sel), I(nel)});
        if (std::abs(e.value.value - e.oracle.value) > 2 * combined_se(e.value.se, e.oracle.se)) ++orc_bad;
    }
    check(o, 0, "zero policy: EL residual matches the direct martingale term within 2 SE", orc_bad == 0,
          I(orc_bad) + " directions outside");

    o.tables = {gs, tr, gains, du, od, er};
    if (lam == 0) return o;   // no drift to profile

    // drift sup-norm profile
    const double wlo = blk["window_lo"].get<double>() * mass_of(c) * mass_of(c);
    double whi = blk["window_hi"].get<double>();
    if (whi <= 0) whi = std::pow(kPi / m.g.a, 2);
    const int np = blk["profile_traj"].get<int>();
    const std::uint64_t spf = seed_of(c, 21);
    auto prof_opt = drift_profile(m, opt.policy, np, spf, wlo, whi);
    auto prof_ini = drift_profile(m, init, np, spf, wlo, whi);
    const double pexp = m.p.beta * m.p.beta / (8 * kPi) - 1;
    Table dp_t{"drift_profile", {"policy", "cell", "t", "mean_sup", "sup_se", "envelope", "seed", "n_traj"}};
    int env_bad = 0;
    for (int j = 0; j < M; ++j) {
        double env = m.p.lambda * m.p.beta * m.alpha[j] / m.s.t[j];
        if (prof_ini.mean_sup[j] > env * (1 + 1e-12)) ++env_bad;
        dp_t.add({"init", I(j), num(prof_ini.t[j]), num(prof_ini.mean_sup[j]), num(prof_ini.se_sup[j]), num(env), I(spf), I(np)});
        dp_t.add({"optimized", I(j), num(prof_opt.t[j]), num(prof_opt.mean_sup[j]), num(prof_opt.se_sup[j]), num(env), I(spf), I(np)});
    }
    Table df{"drift_fit", {"policy", "t_lo", "t_hi", "points", "slope", "slope_se", "target", "seed", "n_traj"}};
    df.add({"init", num(wlo), num(whi), I(prof_ini.points), num(prof_ini.fit.slope), num(prof_ini.fit.slope_se), num(pexp), I(spf), I(np)});
    df.add({"optimized", num(wlo), num(whi), I(prof_opt.points), num(prof_opt.fit.slope), num(prof_opt.fit.slope_se), num(pexp), I(spf), I(np)});
    check(o, 6, "optimized drift sup-norm log-log slope within 0.15 of beta^2/(8 pi) - 1",
          std::abs(prof_opt.fit.slope - pexp) <= 0.15,
          "slope " + num(prof_opt.fit.slope) + " (init " + num(prof_ini.fit.slope) + ") over t in [" + num(wlo) +
              ", " + num(whi) + "], target " + num(pexp));
    check(o, 0, "initialized drift below the t^-1 lambda beta alpha(t) envelope", env_bad == 0,
          I(env_bad) + " cells above");

    o.tables.push_back(dp_t);
    o.tables.push_back(df);
    return o;
}

// ---------------------------------------------------------------- observables
Outcome observables(const json& c) {
    Outcome o;
    const auto& blk = c["observables"];
    const double lam = lambda_of(c);
    Model m0 = main_model(c, 0.0), m = main_model(c, lam),
          m5 = main_model(c, blk["strong_lambda"].get<double>());
    const TorusGrid& g = m.g;
    Field psi = bump_field(g, blk["psi_radius"].get<double>(), 1.0);
    const double kap = blk["kappa"].get<double>();
    std::vector<int> offsets;
    for (int d = 1; d * g.a <= g.ell / 4 + 1e-12; ++d)
        if (d % std::max(1, int(std::lround(0.5 / g.a))) == 0) offsets.push_back(d);
    const double fit_lo = 2 / mass_of(c), fit_hi = g.ell / 4;
    // obs layout: X, X^2, X^3, X^4, kappa tanh(X / kappa), then the correlator block
    auto corr = correlator_obs(m, offsets);
    ObsFn obs = [&](const Field& phi) {
        double X = inner(g, psi, phi);
        std::vector<double> v = {X, X * X, X * X * X, X * X * X * X, kap * std::tanh(X / kap)};
        auto cv = corr(phi);
        v.insert(v.end(), cv.begin(), cv.end());
        return v;
    };
    const int CF = 5;

    // free field
    MeasureSpec fs;
    fs.n_traj = blk["free_traj"].get<int>();
    fs.seed = seed_of(c, 30);
    auto S0 = sample_sg(m0, fs, obs);
    auto C0 = correlator_from(m0, S0, CF, offsets, fit_lo, fit_hi);
    Table tp{"two_point", {"lambda", "method", "r", "G", "G_se", "exact", "z", "seed", "n_traj"}};
    int tp_bad = 0;
    for (size_t k = 0; k < offsets.size(); ++k) {
        double ex = free_propagator(g, offsets[k]);
        double z = (C0.G[k].value - ex) / C0.G[k].se;
        if (std::abs(z) > 3) ++tp_bad;
        tp.add({"0", "coupling", num(C0.r[k]), num(C0.G[k].value), num(C0.G[k].se), num(ex), num(z), I(fs.seed), I(fs.n_traj)});
    }
    check(o, 8, "lambda=0 two-point matches the mode-sum propagator within 3 SE per distance", tp_bad == 0,
          I(tp_bad) + " of " + I(long(offsets.size())) + " distances outside");
    std::vector<double> rr, GG;
    for (int d = 1; d * g.a <= 4 / mass_of(c) + 1e-12; ++d) {
        rr.push_back(d * g.a);
        GG.push_back(free_propagator(g, d));
    }
    double mex = fit_mass(rr, GG, 2 / mass_of(c), 4 / mass_of(c));
    check(o, 0, "free propagator fit mass within 15% of m on [2/m, 4/m]", std::abs(mex / mass_of(c) - 1) <= 0.15,
          "m_fit " + num(mex));
    auto K0 = cumulants(S0, 0);
    Field cpsi(g.sites());
    apply_symbol(g, m0.s.Cinf.data(), psi.data(), cpsi.data());
    const double sv = inner(g, psi, cpsi);
    check(o, 0, "lambda=0 smeared variance matches <psi, C psi> within 3 SE",
          std::abs(K0.k2.value - sv) <= 3 * K0.k2.se, fmt_est(K0.k2) + " vs " + num(sv));
    check(o, 9, "lambda=0 fourth cumulant within 3 SE of 0", std::abs(K0.k4.value) <= 3 * K0.k4.se, fmt_est(K0.k4));

    // interacting: coupling with a briefly optimized policy vs reweighting
    OptimizerConfig oc = optimizer_of(c, blk, 31);
    auto u1 = optimize_drift(m, DriftPolicy::first_order_sine(m), PerturbationSpec{}, oc).policy;
    MeasureSpec cs;
    cs.method = MeasureSpec::Coupling;
    cs.policy = u1;
    cs.n_traj = blk["coupling_traj"].get<int>();
    cs.seed = seed_of(c, 32);
    MeasureSpec rs;
    rs.method = MeasureSpec::Reweight;
    rs.n_traj = blk["reweight_traj"].get<int>();
    rs.seed = seed_of(c, 33);
    auto SC = sample_sg(m, cs, obs);
    auto SR = sample_sg(m, rs, obs);
    Table xv{"cross_validation", {"observable", "coupling", "coupling_se", "reweight", "reweight_se", "z", "reweight_ess", "seed", "n_traj"}};
    int xv_bad = 0;
    auto cmp = [&](const std::string& name, Estimate a, Estimate b) {
        double z = (a.value - b.value) / combined_se(a.se, b.se);
        if (std::abs(z) > 3) ++xv_bad;
        xv.add({name, num(a.value), num(a.se), num(b.value), num(b.se), num(z), num(SR.ess), I(cs.seed),
                I(cs.n_traj)});
    };
    cmp("one_point_plateau", sample_mean(SC, CF), sample_mean(SR, CF));
    cmp("smeared_second_moment", sample_mean(SC, 1), sample_mean(SR, 1));
    auto KC = cumulants(SC, 0), KR = cumulants(SR, 0);
    cmp("kappa2", KC.k2, KR.k2);
    cmp("smeared_bounded_mean", sample_mean(SC, 4), sample_mean(SR, 4));
    check(o, 8, "coupling and reweighting agree on one-point, smeared variance and kappa2 within 3 combined SE",
          xv_bad == 0, I(xv_bad) + " observables outside, reweight ESS " + num(SR.ess));
    auto C1 = correlator_from(m, SC, CF, offsets, fit_lo, fit_hi);
    for (size_t k = 0; k < offsets.size(); ++k)
        tp.add({num(lam), "coupling", num(C1.r[k]), num(C1.G[k].value), num(C1.G[k].se), "", "", I(cs.seed), I(cs.n_traj)});
    Table ms{"mass_fit", {"lambda", "m_fit", "ci_lo", "ci_hi", "fit_lo", "fit_hi", "excluded", "seed", "n_traj", "se"}};
    ms.add({"0", num(C0.m_fit), num(C0.m_lo), num(C0.m_hi), num(fit_lo), num(fit_hi), I(C0.excluded), I(fs.seed), I(fs.n_traj),
            num((C0.m_hi - C0.m_lo) / 3.92)});
    ms.add({num(lam), num(C1.m_fit), num(C1.m_lo), num(C1.m_hi), num(fit_lo), num(fit_hi), I(C1.excluded), I(cs.seed),
            I(cs.n_traj), num((C1.m_hi - C1.m_lo) / 3.92)});
    check(o, 9, "interacting fitted mass CI excludes 0", C1.m_lo > 0,
          "m_fit " + num(C1.m_fit) + " CI [" + num(C1.m_lo) + ", " + num(C1.m_hi) + "]");

    // strong coupling non-Gaussianity
    OptimizerConfig oc5 = optimizer_of(c, blk, 34);
    auto u5 = optimize_drift(m5, DriftPolicy::first_order_sine(m5), PerturbationSpec{}, oc5).policy;
    MeasureSpec s5 = cs;
    s5.policy = u5;
    s5.n_traj = blk["strong_traj"].get<int>();
    s5.seed = seed_of(c, 35);
    auto S5 = sample_sg(m5, s5, obs);
    auto K5 = cumulants(S5, 0);
    Table cu{"cumulants", {"lambda", "method", "kappa2", "kappa2_se", "kappa4", "kappa4_se", "seed", "n_traj"}};
    cu.add({"0", "coupling", num(K0.k2.value), num(K0.k2.se), num(K0.k4.value), num(K0.k4.se), I(fs.seed), I(fs.n_traj)});
    cu.add({num(lam), "coupling", num(KC.k2.value), num(KC.k2.se), num(KC.k4.value), num(KC.k4.se), I(cs.seed), I(cs.n_traj)});
    cu.add({num(lam), "reweight", num(KR.k2.value), num(KR.k2.se), num(KR.k4.value), num(KR.k4.se), I(rs.seed), I(rs.n_traj)});
    cu.add({num(m5.p.lambda), "coupling", num(K5.k2.value), num(K5.k2.se), num(K5.k4.value), num(K5.k4.se), I(s5.seed), I(s5.n_traj)});
    check(o, 9, "strong coupling fourth cumulant exceeds 3 SE", std::abs(K5.k4.value) > 3 * K5.k4.se,
          "lambda " + num(m5.p.lambda) + ": " + fmt_est(K5.k4));

    // reflection positivity of the covariance
    const double rr1 = blk["rp_radius"].get<double>();
    std::vector<double> cx = {1.25 * rr1, 2.5 * rr1, 3.75 * rr1}, cy = {-2 * rr1, 0, 2 * rr1};
    auto bumps = rp_bump_basis(g, rr1, cx, cy);
    auto rp = rp_covariance_check(g, bumps);
    auto rps = rp_covariance_check(g, rp_site_basis(g, 3, 2));
    Table rpt{"reflection_positivity", {"basis", "size", "min_eigenvalue", "min_diagonal", "seed", "n_traj", "se"}};
    rpt.add({"smooth_bumps", I(rp.basis), num(rp.min_eig), num(*std::min_element(rp.diag.begin(), rp.diag.end())), "0", "0", "0"});
    rpt.add({"site_deltas", I(rps.basis), num(rps.min_eig), num(*std::min_element(rps.diag.begin(), rps.diag.end())), "0", "0", "0"});
    check(o, 10, "reflection-positivity Gram matrix smallest eigenvalue >= -1e-10", rp.min_eig >= -1e-10,
          "min eigenvalue " + num(rp.min_eig) + " over " + I(rp.basis) + " half-space bumps");
    Field tt = reflect(g, reflect(g, bumps[0]));
    check(o, 0, "reflection is an involution", tt == bumps[0], "");
    check(o, 0, "Gram diagonal positive", *std::min_element(rp.diag.begin(), rp.diag.end()) > 0, "");

    // cutoff stability of the drift
    auto radii = list_of(blk["decay_radii"]);
    const int nd = blk["decay_traj"].get<int>();
    const std::uint64_t sdc = seed_of(c, 36);
    auto dec = cutoff_drift_decay(blk["decay_n_side"].get<int>(), blk["decay_side_length"].get<double>(), mass_of(c),
                                  schedule_of(c), params_of(c, lam), radii, mass_of(c) / 2, nd, sdc);
    Table dt{"cutoff_decay", {"N", "difference", "difference_se", "seed", "n_traj"}};
    bool dec_ok = true;
    for (size_t k = 0; k < dec.N.size(); ++k) {
        dt.add({num(dec.N[k]), num(dec.diff[k].value), num(dec.diff[k].se), I(sdc), I(nd)});
        if (k) dec_ok = dec_ok && dec.diff[k].value < dec.diff[k - 1].value;
    }
    double rate = -dec.fit.slope, rate_lo = rate - 1.96 * dec.fit.slope_se;
    Table dft{"cutoff_decay_fit", {"rate", "rate_se", "ci_lo", "seed", "n_traj"}};
    dft.add({num(rate), num(dec.fit.slope_se), num(rate_lo), I(sdc), I(nd)});
    check(o, 12, "drift difference strictly decreasing in N with decay-rate CI above 0", dec_ok && rate_lo > 0,
          "rate " + num(rate) + " +- " + num(dec.fit.slope_se));

    o.tables = {tp, xv, ms, cu, rpt, dt, dft};
    return o;
}

// ---------------------------------------------------------------- semiclassical
Outcome semiclassical(const json& c) {
    Outcome o;
    const auto& blk = c["semiclassical"];
    TorusGrid g = build_grid(blk["n_side"].get<int>(), blk["side_length"].get<double>(), mass_of(c));
    CutoffSpec rho = make_cutoff(g, blk["cutoff_radius"].get<double>());
    SGParams p = params_of(c, lambda_of(c)), p0 = params_of(c, 0.0);
    Field psi = bump_field(g, blk["psi_radius"].get<double>(), blk["psi_amp"].get<double>());
    PerturbationSpec lin, sb;
    lin.kind = PerturbationSpec::Linear;
    lin.psi = psi;
    sb.kind = PerturbationSpec::SmearedBounded;
    sb.psi = psi;
    sb.kappa = blk["kappa"].get<double>();
    auto hb = list_of(blk["hbar"]);
    const int n = blk["n_traj"].get<int>();
    const double tol = blk["tol"].get<double>();
    const std::uint64_t seed = seed_of(c, 40);
    std::vector<double> cinf(g.modes());
    for (int k = 0; k < g.modes(); ++k) cinf[k] = 1 / g.lam[k];
    const double g0 = gaussian_value(g, psi, cinf);

    Table sw{"hbar_sweep", {"setting", "hbar", "value", "value_se", "infimum", "gap", "rel_gap", "ess", "seed", "n_traj"}};
    auto add = [&](const std::string& name, const HbarSweepReport& r) {
        for (auto& pt : r.points)
            sw.add({name, num(pt.hbar), num(pt.value.value), num(pt.value.se), num(r.infimum), num(pt.gap),
                    num(pt.gap / std::abs(r.infimum)), num(pt.ess), I(seed), I(n)});
    };
    auto gs = hbar_sweep(g, lin, p0, rho, hb, n, seed);
    add("gaussian", gs);
    int gbad = 0;
    for (auto& pt : gs.points)
        if (std::abs(pt.value.value - g0) > 3 * pt.value.se) ++gbad;
    bool ginf = std::abs(gs.infimum - g0) <= 1e-8;
    check(o, 11, "Gaussian hbar sweep matches the closed form within 3 SE at every hbar", gbad == 0 && ginf,
          I(gbad) + " hbar values outside; infimum " + num(gs.infimum) + " vs " + num(g0));

    auto is = hbar_sweep(g, sb, p, rho, hb, n, seed);
    add("interacting", is);
    double gfirst = is.points.front().gap, glast = is.points.back().gap;
    double rel = glast / std::abs(is.infimum);
    check(o, 11, "interacting LD gap at the smallest hbar below 10% relative and below the largest-hbar gap",
          rel < 0.1 && glast < gfirst,
          "gap " + num(gfirst) + " -> " + num(glast) + ", relative " + num(rel));

    Table el{"el_solver", {"case", "residual", "iterations", "value", "closed_form_err", "seed", "n_traj", "se"}};
    auto st = solve_classical_el(g, sb, p, rho, tol);
    el.add({"smeared_bounded", num(st.residual), I(st.iterations), num(st.value), "", "0", "0", "0"});
    auto st0 = solve_classical_el(g, lin, p0, rho, tol);
    Field exact(g.sites());
    apply_symbol(g, cinf.data(), psi.data(), exact.data());
    double err = 0;
    for (int x = 0; x < g.sites(); ++x) err = std::max(err, std::abs(st0.phi[x] + exact[x]));
    el.add({"gaussian_linear", num(st0.residual), I(st0.iterations), num(st0.value), num(err), "0", "0", "0"});
    check(o, 11, "classical EL residual <= tol and lambda=0 minimizer matches -C psi to 1e-8",
          st.converged && st.residual <= tol && err <= 1e-8,
          "residual " + num(st.residual) + ", closed-form error " + num(err));

    // rate functional sanity
    Field zero(g.sites(), 0.0), cst(g.sites(), 0.3);
    double I0 = rate_functional(g, zero, p, rho);
    double Ic = rate_functional(g, cst, p, rho);
    double Icf = p.lambda * g.a * g.a * rho.mass() * (std::cos(p.beta * 0.3) - 1) +
                 0.5 * mass_of(c) * mass_of(c) * 0.09 * g.area();
    check(o, 0, "I(0) = 0 and constant-field closed form", I0 == 0 && std::abs(Ic - Icf) <= 1e-10 * std::abs(Icf),
          num(Ic) + " vs " + num(Icf));
    int fd_bad = 0;
    Field base = white_noise(g, seed, 1);
    for (auto& v : base) v *= 0.2;
    Field gr = rate_gradient(g, base, p, rho);
    for (int k = 0; k < 20; ++k) {
        Field h = white_noise(g, seed, 100 + k), bp = base, bm = base;
        const double eps = 1e-5;
        for (int x = 0; x < g.sites(); ++x) {
            bp[x] += eps * h[x];
            bm[x] -= eps * h[x];
        }
        double fdv = (rate_functional(g, bp, p, rho) - rate_functional(g, bm, p, rho)) / (2 * eps);
        double an = inner(g, gr, h);
        if (std::abs(fdv - an) > 1e-6 * std::max(1.0, std::abs(an))) ++fd_bad;
    }
    check(o, 0, "rate-functional gradient matches central differences", fd_bad == 0, I(fd_bad) + " of 20 directions off");
    Field start = white_noise(g, seed, 2);
    auto sv = solve_classical_el(g, PerturbationSpec{}, p, rho, tol, 2000, start);
    double vmax = 0;
    for (double v : sv.phi) vmax = std::max(vmax, std::abs(v));
    check(o, 0, "f=0 minimizer from a random start is 0 (convex window)", sv.converged && vmax <= 1e-6,
          "max |phi| " + num(vmax));

    o.tables = {sw, el};
    return o;
}

}  // namespace

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> s = {"decompose-check", "wick-check", "lp-scaling", "bd-solve",
                                               "observables", "semiclassical", "report"};
    return s;
}

Outcome run_subcommand(const std::string& name, const json& cfg) {
    if (name == "decompose-check") return decompose_check(cfg);
    if (name == "wick-check") return wick_check(cfg);
    if (name == "lp-scaling") return lp_scaling(cfg);
    if (name == "bd-solve") return bd_solve(cfg);
    if (name == "observables") return observables(cfg);
    if (name == "semiclassical") return semiclassical(cfg);
    if (name == "report") {
        Outcome all;
        Table sum{"summary", {"subcommand", "criterion", "check", "pass", "detail", "seed", "n_traj", "se"}};
        for (const auto& sub : subcommands()) {
            if (sub == "report") continue;
            Outcome o = run_subcommand(sub, cfg);
            for (auto& t : o.tables) {
                t.name = sub + "." + t.name;
                all.tables.push_back(std::move(t));
            }
            for (auto& ch : o.checks) {
                sum.add({sub, I(ch.criterion), ch.name, B(ch.pass), ch.detail,
                         I(cfg["mc"]["master_seed"].get<long>()), "", ""});
                all.checks.push_back(ch);
            }
        }
        all.tables.insert(all.tables.begin(), sum);
        return all;
    }
    throw ConfigError("unknown subcommand '" + name + "'");
}

}  // namespace sgx
