#include "sg/wick.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace sg {

void validate(const SGParams& p) {
    double b2 = p.beta * p.beta;
    if (!(p.beta > 0) || !(b2 < 4 * std::numbers::pi))
        throw std::invalid_argument("beta^2 must lie in (0, 4 pi)");
    if (!std::isfinite(p.lambda)) throw std::invalid_argument("lambda must be finite");
}

double smoothstep5(double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x * x * x * (10 - 15 * x + 6 * x * x);
}

CutoffSpec make_cutoff(const TorusGrid& g, double R, double cx, double cy) {
    if (!(R > 0)) throw std::invalid_argument("cutoff radius must be positive");
    CutoffSpec c;
    c.R = R;
    c.cx = cx;
    c.cy = cy;
    c.rho.assign(g.sites(), 0.0);
    // plateau R-2, ramp of width 2 (slope at most 15/16); for R < 2 the ramp spans [0, R]
    double r0 = std::max(R - 2, 0.0), w = R - r0;
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) {
            double r = torus_dist(g, i, j, cx, cy);
            double v = r >= R ? 0.0 : 1 - smoothstep5((r - r0) / w);
            c.rho[i * g.n + j] = v;
            if (v > 0) c.support.push_back(i * g.n + j);
        }
    return c;
}

double CutoffSpec::mass() const {
    double s = 0;
    for (int x : support) s += rho[x];
    return s;
}

double alpha(const TorusGrid& g, double beta, double t) {
    return alpha_from_K(beta, k_zero_variance(g, t));
}

WickTrigField wick_trig(const Field& W, double a, double beta, const Field& shift) {
    WickTrigField w;
    size_t N = W.size();
    w.c.resize(N);
    w.s.resize(N);
    for (size_t x = 0; x < N; ++x) {
        double c0 = a * std::cos(beta * W[x]), s0 = a * std::sin(beta * W[x]);
        if (shift.empty()) {
            w.c[x] = c0;
            w.s[x] = s0;
        } else {
            double cp = std::cos(beta * shift[x]), sp = std::sin(beta * shift[x]);
            w.c[x] = c0 * cp - s0 * sp;
            w.s[x] = s0 * cp + c0 * sp;
        }
    }
    return w;
}

WickTrigField wick_trig(const TorusGrid& g, const ScaleSchedule& s, const PathState& p, int knot,
                        double beta, const Field& shift) {
    auto w = wick_trig(p.at(g, knot), alpha_from_K(beta, s.K[knot]), beta, shift);
    w.t = s.t[knot];
    return w;
}

double interaction(const TorusGrid& g, const Field& Y, double at, const CutoffSpec& rho,
                   const SGParams& p) {
    if (p.lambda == 0) return 0;
    double acc = 0;
    for (int x : rho.support) acc += rho.rho[x] * std::cos(p.beta * Y[x]);
    return p.lambda * at * g.a * g.a * acc;
}

Field interaction_gradient(const TorusGrid& g, const Field& Y, double at, const CutoffSpec& rho,
                           const SGParams& p) {
    Field gr(g.sites(), 0.0);
    if (p.lambda == 0) return gr;
    double c = -p.lambda * p.beta * at;
    for (int x : rho.support) gr[x] = c * rho.rho[x] * std::sin(p.beta * Y[x]);
    return gr;
}

}  // namespace sg
