#pragma once
#include <vector>

#include "sg/stats.hpp"
#include "sg/torus.hpp"

namespace sg {

// chi = h(|k|), rho_j = h(|k|/2^{j+1}) - h(|k|/2^j), h = 1 on [0, 3/4], 0 on [1, inf).
// The top index is the first J with 2^J * 3/4 >= max |k|, so the sum telescopes to 1.
struct BlockPartition {
    int top = 0;                            // blocks are -1, 0, ..., top-1
    std::vector<std::vector<double>> w;     // w[j+1][mode]
    int count() const { return int(w.size()); }
    int resolved_max = -1;                  // last block whose annulus lies inside the lattice band
};

double lp_profile(double r);
BlockPartition make_partition(const TorusGrid& g);

// Delta_j f for j = -1..top-1 (index 0 holds the chi block)
std::vector<Field> lp_blocks(const TorusGrid& g, const BlockPartition& P, const Field& f);

struct BesovParams {
    double s = 0, p = 2, q = 2;
    bool weighted = false;
    WeightSpec weight;
};
double besov_norm(const TorusGrid& g, const BlockPartition& P, const Field& f,
                  const BesovParams& b);

struct BlockProfile {
    std::vector<int> j;
    std::vector<double> var, se;   // per block mean of |Delta_j f(x)|^2 over sites and samples
    LinFit fit;                    // log2 var vs j over resolved shells j >= 0
    double slope_boot_se = 0;
    int shells = 0;
};

// per-sample, per-block site averages of |Delta_j f|^2
std::vector<double> block_energies(const TorusGrid& g, const BlockPartition& P, const Field& f);
BlockProfile block_variance_profile(const TorusGrid& g, const BlockPartition& P,
                                    const std::vector<std::vector<double>>& energies,
                                    std::uint64_t boot_seed = 1);

}  // namespace sg
