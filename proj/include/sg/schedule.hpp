#pragma once
#include <cstdint>
#include <functional>
#include <vector>

#include "sg/torus.hpp"

namespace sg {

struct ScheduleSpec {
    int knots = 64;
    double t_min = 0.01;
    double t_max = 0;   // 0 selects 4 (pi/a)^2
};

// Knots t_0 < ... < t_M. Cell j is (t_j, t_{j+1}]; the leading cell (0, t_0] and the
// tail (t_M, inf) carry exact Gaussian increments and no drift.
// Cell multipliers are J_j^2 = (C_{t_{j+1}} - C_{t_j}) / dt_j, so sum_j J_j^2 dt_j
// reproduces the covariance increments exactly.
struct ScaleSchedule {
    std::vector<double> t, dt;
    std::vector<std::vector<double>> dC, J;   // per cell, half spectrum
    std::vector<double> C0, Ctail, Cinf;
    std::vector<std::vector<double>> var;     // noise variance per increment: 0 = leading, j+1 = cell j, M+1 = tail
    std::vector<double> K;                    // K_{t_j}(0)
    double Kinf = 0;
    std::uint64_t checksum = 0;

    int cells() const { return int(t.size()) - 1; }
    int tail_id() const { return cells() + 1; }
};

ScaleSchedule make_schedule(const TorusGrid& g, const ScheduleSpec& s = {});

// Per-knot fields; W[j] is W_{t_j}, tail is the (t_M, inf) increment.
struct PathState {
    std::vector<Spectrum> dW;      // dW[0] = W_{t_0}, dW[j+1] = increment over cell j
    std::vector<Spectrum> W;       // running sums at knots
    Spectrum tail;
    std::uint64_t seed = 0, traj = 0;
    Field at(const TorusGrid& g, int j) const { return inverse(g, W[j]); }
    Field infinity(const TorusGrid& g) const;
};

PathState sample_path(const TorusGrid& g, const ScaleSchedule& s, std::uint64_t seed,
                      std::uint64_t traj);

// u[j] is the control on cell j (position space)
using DriftSignal = std::vector<Field>;

// I_{s,t}(u) = sum_{j in [from, to)} J_j u_j dt_j
Field integrate_drift(const TorusGrid& g, const ScaleSchedule& s, const DriftSignal& u,
                      int from_knot, int to_knot);
// 1/2 sum_j a^2 |u_j|^2 dt_j
double drift_energy(const TorusGrid& g, const ScaleSchedule& s, const DriftSignal& u);

// feedback g_j(Y); returns false when g_j vanishes identically (skips the transform)
using GainFn = std::function<bool(int, const Field&, Field&)>;

struct LoopOptions {
    bool record_knots = false;           // keep Y_{t_j} in position space
    bool record_drift = false;           // keep realized u_j
    bool drift_sup = false;              // sup_x |u_j(x)| per cell
    const std::vector<Spectrum>* open_loop = nullptr;   // extra additive drift h_j (spectral)
    const std::vector<char>* gain_mask = nullptr;       // cells where the gain may be nonzero
    std::function<void(int, const Field&)> observer;    // called with Y_{t_j} for j = 0..M
};

struct LoopResult {
    Field Y;                 // Y_inf
    double energy = 0;
    bool finite = true;
    std::vector<Field> knots;
    DriftSignal u;
    std::vector<double> sup;
};

// Y_{j+1} = Y_j - J_j^2 g_j(Y_j) dt_j + J_j h_j dt_j + dW_j with realized u_j = -J_j g_j + h_j.
// Gaussian increments are identical to sample_path for the same (seed, traj).
LoopResult closed_loop_simulate(const TorusGrid& g, const ScaleSchedule& s, const GainFn& gain,
                                std::uint64_t seed, std::uint64_t traj,
                                const LoopOptions& opt = {});

}  // namespace sg
