#include "sg/torus.hpp"

#include <fftw3.h>

#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace sg {

struct FftPlans {
    fftw_plan r2c = nullptr, c2r = nullptr;
    int n = 0;
    ~FftPlans() {
        std::lock_guard<std::mutex> lk(planner_mutex());
        if (r2c) fftw_destroy_plan(r2c);
        if (c2r) fftw_destroy_plan(c2r);
    }
    // the FFTW planner is not thread-safe; execution with the new-array API is
    static std::mutex& planner_mutex() {
        static std::mutex m;
        return m;
    }
};

static std::shared_ptr<const FftPlans> make_plans(int n) {
    auto p = std::make_shared<FftPlans>();
    p->n = n;
    int nh = n / 2 + 1;
    std::lock_guard<std::mutex> lk(FftPlans::planner_mutex());
    double* rin = fftw_alloc_real(size_t(n) * n);
    fftw_complex* cout = fftw_alloc_complex(size_t(n) * nh);
    unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    p->r2c = fftw_plan_dft_r2c_2d(n, n, rin, cout, flags);
    p->c2r = fftw_plan_dft_c2r_2d(n, n, cout, rin, flags | FFTW_DESTROY_INPUT);
    fftw_free(rin);
    fftw_free(cout);
    if (!p->r2c || !p->c2r) throw std::runtime_error("fftw planning failed");
    return p;
}

TorusGrid build_grid(int n_side, double side_length, double mass) {
    if (n_side < 8 || (n_side & (n_side - 1)) != 0)
        throw std::invalid_argument("n_side must be a power of two >= 8");
    if (!(side_length > 0) || !(mass > 0))
        throw std::invalid_argument("side_length and mass must be positive");
    TorusGrid g;
    g.n = n_side;
    g.nh = n_side / 2 + 1;
    g.ell = side_length;
    g.mass = mass;
    g.a = side_length / n_side;
    double dk = 2 * std::numbers::pi / side_length;
    int M = g.modes();
    g.kx.resize(M);
    g.ky.resize(M);
    g.lam.resize(M);
    g.mult.resize(M);
    for (int i = 0; i < g.n; ++i) {
        int ii = i < g.n / 2 ? i : i - g.n;
        for (int j = 0; j < g.nh; ++j) {
            int m = i * g.nh + j;
            int jj = j == g.n / 2 ? -j : j;
            g.kx[m] = dk * ii;
            g.ky[m] = dk * jj;
            g.lam[m] = mass * mass + g.kx[m] * g.kx[m] + g.ky[m] * g.ky[m];
            g.mult[m] = (j == 0 || j == g.n / 2) ? 1.0 : 2.0;
        }
    }
    g.plans = make_plans(n_side);
    return g;
}

void forward(const TorusGrid& g, const double* in, cplx* out) {
    fftw_execute_dft_r2c(g.plans->r2c, const_cast<double*>(in),
                         reinterpret_cast<fftw_complex*>(out));
    double s = 1.0 / g.n;
    for (int m = 0; m < g.modes(); ++m) out[m] *= s;
}

void inverse(const TorusGrid& g, const cplx* in, double* out) {
    thread_local Spectrum tmp;
    tmp.assign(in, in + g.modes());
    fftw_execute_dft_c2r(g.plans->c2r, reinterpret_cast<fftw_complex*>(tmp.data()), out);
    double s = 1.0 / g.n;
    for (int x = 0; x < g.sites(); ++x) out[x] *= s;
}

Spectrum forward(const TorusGrid& g, const Field& f) {
    if (int(f.size()) != g.sites()) throw std::invalid_argument("field size mismatch");
    Spectrum s(g.modes());
    forward(g, f.data(), s.data());
    return s;
}

Field inverse(const TorusGrid& g, const Spectrum& s) {
    if (int(s.size()) != g.modes()) throw std::invalid_argument("spectrum size mismatch");
    Field f(g.sites());
    inverse(g, s.data(), f.data());
    return f;
}

Field spectral_roundtrip(const TorusGrid& g, const Field& f) {
    for (double v : f)
        if (!std::isfinite(v)) throw std::invalid_argument("non-finite field value");
    return inverse(g, forward(g, f));
}

double l2_sq_position(const Field& f) {
    double s = 0;
    for (double v : f) s += v * v;
    return s;
}

double l2_sq_spectral(const TorusGrid& g, const Spectrum& s) {
    double acc = 0;
    for (int m = 0; m < g.modes(); ++m) acc += g.mult[m] * std::norm(s[m]);
    return acc;
}

double symbol_J(double lam, double t) {
    if (t <= 0) return 0;
    return std::exp(-lam / (2 * t)) / t;
}

double symbol_C(double lam, double t) {
    if (std::isinf(t)) return 1 / lam;
    if (t <= 0) return 0;
    return std::exp(-lam / t) / lam;
}

SpectralMultiplier make_multiplier(const TorusGrid& g, Symbol s, double t) {
    SpectralMultiplier m{s, t, std::vector<double>(g.modes())};
    for (int k = 0; k < g.modes(); ++k) {
        double l = g.lam[k];
        switch (s) {
            case Symbol::L: m.sym[k] = l; break;
            case Symbol::L_inverse: m.sym[k] = 1 / l; break;
            case Symbol::J: m.sym[k] = symbol_J(l, t); break;
            case Symbol::C: m.sym[k] = symbol_C(l, t); break;
            case Symbol::C_infinity: m.sym[k] = 1 / l; break;
            case Symbol::sqrt_L: m.sym[k] = std::sqrt(l); break;
        }
    }
    return m;
}

void apply_symbol(const TorusGrid& g, const double* sym, const double* in, double* out) {
    thread_local Spectrum s;
    s.resize(g.modes());
    forward(g, in, s.data());
    for (int k = 0; k < g.modes(); ++k) s[k] *= sym[k];
    inverse(g, s.data(), out);
}

Field apply_multiplier(const TorusGrid& g, const SpectralMultiplier& m, const Field& f) {
    if (int(f.size()) != g.sites() || int(m.sym.size()) != g.modes())
        throw std::invalid_argument("grid mismatch");
    Field out(g.sites());
    apply_symbol(g, m.sym.data(), f.data(), out.data());
    return out;
}

double k_zero_variance(const TorusGrid& g, double t) {
    if (t < 0) throw std::invalid_argument("negative t");
    if (t == 0) return 0;
    double s = 0;
    for (int k = 0; k < g.modes(); ++k) s += g.mult[k] * symbol_C(g.lam[k], t);
    return s / g.area();
}

double kernel_value(const TorusGrid& g, const std::vector<double>& sym, int dx, int dy) {
    double s = 0;
    for (int k = 0; k < g.modes(); ++k)
        s += g.mult[k] * sym[k] * std::cos(g.kx[k] * dx * g.a + g.ky[k] * dy * g.a);
    return s / g.area();
}

void add_gaussian_spectrum(const TorusGrid& g, const double* var, std::uint64_t seed,
                           std::uint64_t traj, std::uint32_t knot, cplx* out) {
    const auto key = philox_key(seed);
    const int n = g.n, nh = g.nh, h = n / 2;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < nh; ++j) {
            int m = i * nh + j;
            double v = var[m];
            if (v <= 0) continue;
            bool edge = (j == 0 || j == h);
            if (edge && i > h) continue;   // filled from its conjugate partner
            auto [z0, z1] = normal_pair(std::uint32_t(m), knot, traj, key);
            if (edge && (i == 0 || i == h)) {
                out[m] += std::sqrt(v) * z0;
            } else {
                double s = std::sqrt(0.5 * v);
                cplx z(s * z0, s * z1);
                out[m] += z;
                if (edge) out[(n - i) * nh + j] += std::conj(z);
            }
        }
    }
}

Field white_noise(const TorusGrid& g, std::uint64_t seed, std::uint64_t id) {
    const auto key = philox_key(seed);
    Field f(g.sites());
    for (int x = 0; x + 1 < g.sites(); x += 2) {
        auto [z0, z1] = normal_pair(std::uint32_t(x), 0xFFFFFFFFu, id, key);
        f[x] = z0;
        f[x + 1] = z1;
    }
    return f;
}

double site_coord(const TorusGrid& g, int i) {
    int ii = i <= g.n / 2 ? i : i - g.n;
    return ii * g.a;
}

double torus_dist(const TorusGrid& g, int i, int j, double zx, double zy) {
    auto wrap = [&](double d) {
        d = std::fmod(d, g.ell);
        if (d > g.ell / 2) d -= g.ell;
        if (d < -g.ell / 2) d += g.ell;
        return d;
    };
    double dx = wrap(i * g.a - zx), dy = wrap(j * g.a - zy);
    return std::sqrt(dx * dx + dy * dy);
}

double WeightSpec::at(const TorusGrid& g, int i, int j) const {
    if (kind == Polynomial) {
        double d = torus_dist(g, i, j, 0, 0);
        return c * std::pow(1 + d * d, -0.5 * sigma);
    }
    return std::exp(gamma * torus_dist(g, i, j, zx, zy));
}

Field weight_field(const TorusGrid& g, const WeightSpec& w) {
    Field f(g.sites());
    for (int i = 0; i < g.n; ++i)
        for (int j = 0; j < g.n; ++j) f[i * g.n + j] = w.at(g, i, j);
    return f;
}

double weighted_norm(const TorusGrid& g, const Field& f, const WeightSpec& w, double p) {
    if (!(p >= 1)) throw std::invalid_argument("p must be in [1, inf]");
    if (int(f.size()) != g.sites()) throw std::invalid_argument("field size mismatch");
    Field wf = weight_field(g, w);
    if (std::isinf(p)) {
        double s = 0;
        for (int x = 0; x < g.sites(); ++x) s = std::max(s, wf[x] * std::abs(f[x]));
        return s;
    }
    // polynomial weights act as a measure; exponential weights multiply f (exp(r p |x-z|) inside)
    double s = 0;
    for (int x = 0; x < g.sites(); ++x) {
        double v = std::abs(f[x]);
        s += w.kind == WeightSpec::Polynomial ? wf[x] * std::pow(v, p) : std::pow(wf[x] * v, p);
    }
    return std::pow(g.a * g.a * s, 1 / p);
}

double inner(const TorusGrid& g, const Field& f, const Field& h) {
    double s = 0;
    for (size_t x = 0; x < f.size(); ++x) s += f[x] * h[x];
    return g.a * g.a * s;
}

}  // namespace sg
