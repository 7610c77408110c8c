#pragma once
#include <string>
#include <vector>

#include "sg/schedule.hpp"
#include "sg/stats.hpp"
#include "sg/wick.hpp"

namespace sg {

// Everything a trajectory needs: grid, schedule, couplings, cutoff, Wick constants.
struct Model {
    TorusGrid g;
    ScaleSchedule s;
    SGParams p;
    CutoffSpec rho;
    std::vector<double> alpha;   // alpha(t_j) per knot
    double alpha_inf = 1;
};
Model make_model(int n_side, double ell, double mass, const ScheduleSpec& sched,
                 const SGParams& p, double cutoff_radius);

struct PerturbationSpec {
    enum Kind { None, Linear, SmearedBounded, Quadratic } kind = None;
    Field psi;
    double kappa = 1;   // squash scale for SmearedBounded
    double value(const TorusGrid& g, const Field& phi) const;
    Field gradient(const TorusGrid& g, const Field& phi) const;
};

// smooth bump of radius r and height amp centered at (cx, cy)
Field bump_field(const TorusGrid& g, double r, double amp, double cx = 0, double cy = 0);

// g_j(Y) = c_j rho sin(beta Y) + d_j psi, realized drift u_j = -J_j g_j + h_j
struct DriftPolicy {
    enum Kind { Zero, ClosedFormLinear, FirstOrderSine, PerturbedOpenLoop } kind = Zero;
    std::vector<double> c;   // sine gains per cell (empty = none)
    std::vector<double> d;   // linear gains per cell (empty = none)
    Field psi;
    DriftSignal h;           // open-loop addition (empty = none)

    static DriftPolicy zero() { return {}; }
    static DriftPolicy closed_form_linear(const Model& m, const Field& psi);
    static DriftPolicy first_order_sine(const Model& m, double scale = 1.0);
    static DriftPolicy perturbed(const DriftPolicy& base, const DriftSignal& h);
    int n_params() const { return int(c.size() + d.size()); }
    std::vector<double> params() const;
    void set_params(const std::vector<double>& th);
};

std::string policy_name(const DriftPolicy& u);

struct TrajSample {
    double f = 0, inter = 0, energy = 0;
    bool finite = true;
    double total() const { return f + inter + energy; }
};

TrajSample run_policy(const Model& m, const DriftPolicy& u, const PerturbationSpec& f,
                      std::uint64_t seed, std::uint64_t idx, LoopOptions opt = {},
                      LoopResult* out = nullptr);

struct BDReport {
    Estimate F, f_term, inter_term, energy_term;
    std::vector<double> per_traj;   // total per trajectory, index order
    int n_traj = 0, n_nan = 0;
    std::uint64_t seed = 0, checksum = 0;
};

BDReport evaluate_functional(const Model& m, const DriftPolicy& u, const PerturbationSpec& f,
                             int n_traj, std::uint64_t seed, bool parallel = true);

struct DirectReport {
    Estimate value;
    double bias = 0;     // jackknife bias estimate of the log-of-mean
    double ess = 0;      // effective sample fraction
    std::vector<double> exponent;   // f + V per trajectory
    int n_traj = 0;
};
DirectReport direct_log_laplace(const Model& m, const PerturbationSpec& f, int n_traj,
                                std::uint64_t seed, bool parallel = true);

// SE of the paired difference a_i - b_i (common random numbers)
Estimate paired_difference(const std::vector<double>& a, const std::vector<double>& b);

// pathwise gradient of the sample-average objective with respect to policy params
struct GradientResult {
    double F = 0;
    std::vector<double> grad, curvature;   // curvature: energy-term Gauss-Newton diagonal
    int n_nan = 0;
};
GradientResult objective_gradient(const Model& m, const DriftPolicy& u, const PerturbationSpec& f,
                                  int n_traj, std::uint64_t seed, bool parallel = true);

struct OptimizerConfig {
    enum Method { Adjoint, SPSA, CoordinateFD } method = Adjoint;
    std::uint64_t seed = 7;
    int n_traj = 500;
    int max_iter = 20;
    double step = 1.0;          // initial step (Newton-scaled for gradient methods)
    double gain_bound = 50.0;   // |theta_i| <= gain_bound
    double tol = 1e-6;          // relative decrease stopping rule
    std::vector<char> free;     // optional mask of optimized params
    bool parallel = true;
};

struct OptimizeResult {
    DriftPolicy policy;
    std::vector<double> trace;   // CRN objective per accepted iterate
    int evaluations = 0;
    bool diverged = false;
};
OptimizeResult optimize_drift(const Model& m, const DriftPolicy& init, const PerturbationSpec& f,
                              const OptimizerConfig& cfg);

struct ResidualEntry {
    std::string label;
    bool in_span = false;
    Estimate value;
    Estimate oracle;   // independent estimate when one exists (zero policy), else empty
};

// first variation of the functional along test directions: open-loop fields h, and the
// tangent directions du/dtheta_i of the policy's own parameters (in span).
std::vector<ResidualEntry> el_residual(const Model& m, const DriftPolicy& u,
                                       const PerturbationSpec& f, int n_traj, std::uint64_t seed,
                                       const std::vector<DriftSignal>& open_dirs,
                                       const std::vector<int>& span_params, bool parallel = true);

// open-loop test direction: smooth low-mode bump on a single cell
DriftSignal cell_bump_direction(const Model& m, int cell, double radius, double amp = 1.0);

struct DriftProfile {
    std::vector<double> t, mean_sup, se_sup;
    LinFit fit;
    double t_lo = 0, t_hi = 0;
    int points = 0;
};
DriftProfile drift_profile(const Model& m, const DriftPolicy& u, int n_traj, std::uint64_t seed,
                           double t_lo, double t_hi, bool parallel = true);

struct DPReport {
    Estimate one_shot, two_stage;
    double closed_form = 0;
    int split = 0;
};
DPReport dp_consistency(const Model& m, int split_knot, const PerturbationSpec& f,
                        const OptimizerConfig& cfg, int n_eval, std::uint64_t eval_seed);

// -1/2 a^2 <psi, C psi> for a symbol given on modes
double gaussian_value(const TorusGrid& g, const Field& psi, const std::vector<double>& sym);

}  // namespace sg
