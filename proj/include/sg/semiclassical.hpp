#pragma once
#include <cstdint>
#include <vector>

#include "sg/control.hpp"

namespace sg {

// I(phi) = lambda a^2 sum rho (cos(beta phi) - 1) + 1/2 a^2 <phi, (m^2 - Delta) phi>
double rate_functional(const TorusGrid& g, const Field& phi, const SGParams& p,
                       const CutoffSpec& rho);
// gradient in the a^2 inner product: (m^2 - Delta) phi - lambda beta rho sin(beta phi)
Field rate_gradient(const TorusGrid& g, const Field& phi, const SGParams& p, const CutoffSpec& rho);

struct ClassicalState {
    Field phi;
    double value = 0;      // f(phi) + I(phi)
    double rate = 0;       // I(phi)
    double residual = 0;   // L2 norm of the EL residual
    int iterations = 0;
    bool converged = false;
};

// minimizes f + I by C_inf-preconditioned descent with backtracking
ClassicalState solve_classical_el(const TorusGrid& g, const PerturbationSpec& f, const SGParams& p,
                                  const CutoffSpec& rho, double tol = 1e-8, int max_iter = 2000,
                                  const Field& start = {});

// one draw of W_inf (covariance C_inf) in position space
Field sample_terminal(const TorusGrid& g, std::uint64_t seed, std::uint64_t traj);

struct HbarPoint {
    double hbar = 0;
    Estimate value;    // -hbar log of the normalized Laplace functional
    double gap = 0;
    double ess = 0;
};

struct HbarSweepReport {
    std::vector<HbarPoint> points;
    double infimum = 0;       // inf (f + I) - inf I
    ClassicalState minimizer, vacuum;
    int n_traj = 0;
    std::uint64_t seed = 0;
};

// hbar-scaled measure: field hbar^{1/2} W_inf, Wick constant exp(beta^2 hbar K_inf / 2),
// density exp(-V/hbar). The same draws are reused for every hbar.
HbarSweepReport hbar_sweep(const TorusGrid& g, const PerturbationSpec& f, const SGParams& p,
                           const CutoffSpec& rho, const std::vector<double>& hbars, int n_traj,
                           std::uint64_t seed, bool parallel = true);

}  // namespace sg
