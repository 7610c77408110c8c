#pragma once
#include <cmath>
#include <vector>

#include "sg/schedule.hpp"
#include "sg/torus.hpp"

namespace sg {

struct SGParams {
    double beta = 2.5066282746310002;   // sqrt(2 pi)
    double lambda = 0.1;
};
void validate(const SGParams& p);   // throws unless 0 < beta^2 < 4 pi

// smoothstep bump: 1 on radius R-2, 0 beyond R, |grad rho| <= 1
struct CutoffSpec {
    double R = 4, cx = 0, cy = 0;
    Field rho;
    std::vector<int> support;   // sites with rho > 0
    double mass() const;        // sum of rho (multiply by a^2 for the integral)
};
CutoffSpec make_cutoff(const TorusGrid& g, double R, double cx = 0, double cy = 0);
double smoothstep5(double x);   // x^3 (10 - 15x + 6x^2) on [0,1]

double alpha(const TorusGrid& g, double beta, double t);
inline double alpha_from_K(double beta, double K) { return std::exp(0.5 * beta * beta * K); }

struct WickTrigField {
    double t = 0;
    Field c, s;   // alpha cos(beta(W+phi)), alpha sin(beta(W+phi))
};

// angle addition on the Wick pair of W, shift may be empty
WickTrigField wick_trig(const Field& W, double alpha_t, double beta, const Field& shift = {});
WickTrigField wick_trig(const TorusGrid& g, const ScaleSchedule& s, const PathState& p, int knot,
                        double beta, const Field& shift = {});

// lambda a^2 sum rho alpha cos(beta Y); Y already includes any shift
double interaction(const TorusGrid& g, const Field& Y, double alpha_t, const CutoffSpec& rho,
                   const SGParams& p);
// gradient with respect to Y (a^2 inner product): -lambda beta alpha rho sin(beta Y)
Field interaction_gradient(const TorusGrid& g, const Field& Y, double alpha_t,
                           const CutoffSpec& rho, const SGParams& p);

}  // namespace sg
