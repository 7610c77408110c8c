#pragma once
#include <functional>
#include <vector>

#include "sg/control.hpp"

namespace sg {

struct MeasureSpec {
    enum Method { Coupling, Reweight } method = Coupling;
    DriftPolicy policy;          // drift for the coupling method
    PerturbationSpec tilt;       // optional e^{-f} tilt, reweighting only
    int n_traj = 1000;
    std::uint64_t seed = 1;
    bool parallel = true;
};

// Observables are evaluated per sample and kept, fields are not.
using ObsFn = std::function<std::vector<double>(const Field&)>;

struct SampleSet {
    std::vector<std::vector<double>> obs;
    std::vector<double> w;    // normalized weights (uniform for coupling)
    double ess = 1;           // effective sample fraction
    int n_nan = 0;
};

SampleSet sample_sg(const Model& m, const MeasureSpec& spec, const ObsFn& obs);

// weighted mean of obs[k], jackknife SE over 20 blocks
Estimate sample_mean(const SampleSet& s, int k);
// generic jackknife of a statistic of weighted means
Estimate sample_stat(const SampleSet& s,
                     const std::function<double(const std::function<double(int)>&)>& stat);

struct CumulantReport {
    Estimate k2, k4;
};
// obs index k holds X = <psi, phi>
CumulantReport cumulants(const SampleSet& s, int k);
CumulantReport fourth_cumulant(const Model& m, const MeasureSpec& spec, const Field& psi);

struct CorrelatorReport {
    std::vector<double> r;
    std::vector<Estimate> G;
    double m_fit = 0, m_lo = 0, m_hi = 0;   // fitted mass with 95% interval
    double fit_lo = 0, fit_hi = 0;
    int excluded = 0;
};

// plateau sites (rho == 1) of the model's cutoff
std::vector<int> plateau_sites(const Model& m);
// exact lattice propagator C_inf at site offset (d, 0)
double free_propagator(const TorusGrid& g, int d);
// fit A r^{-1/2} e^{-m r} to given values over [lo, hi]
double fit_mass(const std::vector<double>& r, const std::vector<double>& G, double lo, double hi);

// per sample: plateau mean of phi, then for each offset the plateau and 4-direction mean of
// phi(x) phi(x + r)
ObsFn correlator_obs(const Model& m, const std::vector<int>& offsets);
// correlator from obs columns first .. first + offsets.size() laid out as by correlator_obs
CorrelatorReport correlator_from(const Model& m, const SampleSet& s, int first,
                                 const std::vector<int>& offsets, double fit_lo, double fit_hi);
CorrelatorReport connected_two_point(const Model& m, const MeasureSpec& spec,
                                     const std::vector<int>& offsets, double fit_lo,
                                     double fit_hi);

struct RPReport {
    double min_eig = 0;
    std::vector<double> diag;
    int basis = 0;
};
Field reflect(const TorusGrid& g, const Field& f);   // x1 -> -x1 through the site line x1 = 0
RPReport rp_covariance_check(const TorusGrid& g, const std::vector<Field>& basis);
std::vector<Field> rp_bump_basis(const TorusGrid& g, double radius,
                                 const std::vector<double>& cx, const std::vector<double>& cy);
std::vector<Field> rp_site_basis(const TorusGrid& g, int depth, int width);

struct DecayReport {
    std::vector<double> N;
    std::vector<Estimate> diff;
    LinFit fit;   // log diff vs N; rate = -slope
};
// per plateau radius N: CRN drift difference between cutoffs with plateaus N and N+2,
// both using the initialized feedback, measured in the weight exp(-gamma |x|) at the origin
DecayReport cutoff_drift_decay(int n_side, double ell, double mass, const ScheduleSpec& sched,
                               const SGParams& p, const std::vector<double>& radii, double gamma,
                               int n_traj, std::uint64_t seed, bool parallel = true);

}  // namespace sg
