#include "sg/besov.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "sg/wick.hpp"

namespace sg {

double lp_profile(double r) { return 1 - smoothstep5((r - 0.75) / 0.25); }

BlockPartition make_partition(const TorusGrid& g) {
    double kmax = 0;
    for (int m = 0; m < g.modes(); ++m) kmax = std::max(kmax, std::hypot(g.kx[m], g.ky[m]));
    BlockPartition P;
    while (std::ldexp(0.75, P.top) < kmax) ++P.top;
    P.w.assign(P.top + 1, std::vector<double>(g.modes()));
    for (int m = 0; m < g.modes(); ++m) {
        double k = std::hypot(g.kx[m], g.ky[m]);
        P.w[0][m] = lp_profile(k);
        for (int j = 0; j < P.top; ++j)
            P.w[j + 1][m] = lp_profile(k / std::ldexp(1.0, j + 1)) - lp_profile(k / std::ldexp(1.0, j));
    }
    // a shell is resolved when its outer radius fits in the lattice band and it is not the top block
    for (int j = 0; j < P.top - 1; ++j)
        if (std::ldexp(1.0, j + 1) <= kmax) P.resolved_max = j;
    return P;
}

std::vector<Field> lp_blocks(const TorusGrid& g, const BlockPartition& P, const Field& f) {
    Spectrum F = forward(g, f), B(g.modes());
    std::vector<Field> out;
    for (auto& w : P.w) {
        for (int m = 0; m < g.modes(); ++m) B[m] = w[m] * F[m];
        out.push_back(inverse(g, B));
    }
    return out;
}

double besov_norm(const TorusGrid& g, const BlockPartition& P, const Field& f,
                  const BesovParams& b) {
    if (!(b.p >= 1) || !(b.q >= 1)) throw std::invalid_argument("p and q must be in [1, inf]");
    auto blocks = lp_blocks(g, P, f);
    WeightSpec flat;
    const WeightSpec& w = b.weighted ? b.weight : flat;
    double acc = 0;
    for (int i = 0; i < int(blocks.size()); ++i) {
        int j = i - 1;
        double v = std::pow(2.0, j * b.s) * weighted_norm(g, blocks[i], w, b.p);
        if (std::isinf(b.q)) acc = std::max(acc, v);
        else acc += std::pow(v, b.q);
    }
    return std::isinf(b.q) ? acc : std::pow(acc, 1 / b.q);
}

std::vector<double> block_energies(const TorusGrid& g, const BlockPartition& P, const Field& f) {
    Spectrum F = forward(g, f);
    std::vector<double> e(P.count(), 0.0);
    double inv = 1.0 / g.sites();
    for (int i = 0; i < P.count(); ++i) {
        double s = 0;
        for (int m = 0; m < g.modes(); ++m) s += g.mult[m] * P.w[i][m] * P.w[i][m] * std::norm(F[m]);
        e[i] = s * inv;
    }
    return e;
}

static LinFit fit_resolved(const BlockPartition& P, const std::vector<double>& var) {
    std::vector<double> x, y;
    for (int j = 0; j <= P.resolved_max; ++j) {
        x.push_back(j);
        y.push_back(std::log2(var[j + 1]));
    }
    return linear_fit(x, y);
}

BlockProfile block_variance_profile(const TorusGrid&, const BlockPartition& P,
                                    const std::vector<std::vector<double>>& E,
                                    std::uint64_t boot_seed) {
    BlockProfile r;
    r.shells = P.resolved_max + 1;
    if (r.shells < 3) throw std::runtime_error("fewer than 3 resolved dyadic shells");
    size_t N = E.size();
    if (N < 2) throw std::invalid_argument("need an ensemble");
    int B = P.count();
    r.var.assign(B, 0.0);
    r.se.assign(B, 0.0);
    for (int i = 0; i < B; ++i) {
        std::vector<double> col(N);
        for (size_t s = 0; s < N; ++s) col[s] = E[s][i];
        auto e = mean_se(col);
        r.j.push_back(i - 1);
        r.var[i] = e.value;
        r.se[i] = e.se;
    }
    r.fit = fit_resolved(P, r.var);
    std::mt19937_64 rng(boot_seed);
    std::uniform_int_distribution<size_t> pick(0, N - 1);
    std::vector<double> slopes;
    for (int b = 0; b < 200; ++b) {
        std::vector<double> v(B, 0.0);
        for (size_t s = 0; s < N; ++s) {
            size_t k = pick(rng);
            for (int i = 0; i < B; ++i) v[i] += E[k][i];
        }
        slopes.push_back(fit_resolved(P, v).slope);   // scale-free in log2
    }
    r.slope_boot_se = mean_se(slopes).se * std::sqrt(double(slopes.size()));
    return r;
}

}  // namespace sg
