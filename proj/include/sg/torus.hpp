#pragma once
#include <complex>
#include <memory>
#include <string>
#include <vector>

#include "sg/philox.hpp"

namespace sg {

using cplx = std::complex<double>;
using Field = std::vector<double>;     // n*n, row-major (x index major)
using Spectrum = std::vector<cplx>;    // n*(n/2+1) half spectrum, unitary normalization

struct FftPlans;

// N x N periodic torus of side ell with mass m. Spectral symbols use the continuum
// dispersion m^2+|k|^2 on the torus Fourier modes.
struct TorusGrid {
    int n = 0;
    int nh = 0;             // n/2+1
    double ell = 0, mass = 0, a = 0;
    std::vector<double> kx, ky;   // per half-spectrum mode
    std::vector<double> lam;      // m^2 + |k|^2
    std::vector<double> mult;     // 1 or 2: weight of the mode in full-spectrum sums
    std::shared_ptr<const FftPlans> plans;

    int sites() const { return n * n; }
    int modes() const { return n * nh; }
    double area() const { return ell * ell; }
};

TorusGrid build_grid(int n_side, double side_length, double mass);

// unitary transforms; in and out may not alias
void forward(const TorusGrid& g, const double* in, cplx* out);
void inverse(const TorusGrid& g, const cplx* in, double* out);   // in is not modified
Spectrum forward(const TorusGrid& g, const Field& f);
Field inverse(const TorusGrid& g, const Spectrum& s);
Field spectral_roundtrip(const TorusGrid& g, const Field& f);

double l2_sq_position(const Field& f);                              // sum |f|^2
double l2_sq_spectral(const TorusGrid& g, const Spectrum& s);       // full-spectrum sum |s|^2

enum class Symbol { L, L_inverse, J, C, C_infinity, sqrt_L };

struct SpectralMultiplier {
    Symbol label;
    double t = 0;
    std::vector<double> sym;   // per half-spectrum mode
};

SpectralMultiplier make_multiplier(const TorusGrid& g, Symbol s, double t = 0);
double symbol_J(double lam, double t);        // t^-1 exp(-lam/2t)
double symbol_C(double lam, double t);        // exp(-lam/t)/lam, t = inf allowed
Field apply_multiplier(const TorusGrid& g, const SpectralMultiplier& m, const Field& f);
void apply_symbol(const TorusGrid& g, const double* sym, const double* in, double* out);

// pointwise variance of W_t: (1/ell^2) sum_k C_t(k)
double k_zero_variance(const TorusGrid& g, double t);
// C(x) for a symbol, x given as site offsets: (1/ell^2) sum_k sym(k) cos(k.x)
double kernel_value(const TorusGrid& g, const std::vector<double>& sym, int dx, int dy);

// Gaussian field with E|s(k)|^2 = var(k) per mode (unitary coefficients),
// real-valued in position space. Modes with var == 0 are skipped without drawing.
void add_gaussian_spectrum(const TorusGrid& g, const double* var, std::uint64_t seed,
                           std::uint64_t traj, std::uint32_t knot, cplx* out);

// i.i.d. standard normal site values, reproducible from (seed, id)
Field white_noise(const TorusGrid& g, std::uint64_t seed, std::uint64_t id);

// torus distance between site (i,j) and point z (physical coordinates)
double torus_dist(const TorusGrid& g, int i, int j, double zx, double zy);
// signed site coordinate in (-ell/2, ell/2]
double site_coord(const TorusGrid& g, int i);

struct WeightSpec {
    enum Kind { Polynomial, Exponential } kind = Polynomial;
    double sigma = 0, c = 1;          // polynomial: c <d(x,0)>^-sigma
    double gamma = 0, zx = 0, zy = 0; // exponential: exp(gamma d(x,z))
    double at(const TorusGrid& g, int i, int j) const;
};
Field weight_field(const TorusGrid& g, const WeightSpec& w);

// polynomial: (a^2 sum w |f|^p)^(1/p); exponential: (a^2 sum |w f|^p)^(1/p); p = inf gives sup w|f|
double weighted_norm(const TorusGrid& g, const Field& f, const WeightSpec& w, double p);
double inner(const TorusGrid& g, const Field& f, const Field& h);   // a^2 sum f h

}  // namespace sg
