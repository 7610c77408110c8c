#include "sg/stats.hpp"

#include <stdexcept>

namespace sg {

double mean(const std::vector<double>& x) {
    double s = 0;
    for (double v : x) s += v;
    return x.empty() ? 0 : s / double(x.size());
}

Estimate mean_se(const std::vector<double>& x) {
    Estimate e;
    size_t n = x.size();
    if (!n) return e;
    e.value = mean(x);
    if (n < 2) return e;
    double ss = 0;
    for (double v : x) ss += (v - e.value) * (v - e.value);
    e.se = std::sqrt(ss / double(n - 1) / double(n));
    return e;
}

double combined_se(double a, double b) { return std::sqrt(a * a + b * b); }

Estimate jackknife(std::size_t n, int blocks,
                   const std::function<double(const std::vector<char>&)>& stat) {
    if (blocks < 2 || n < size_t(blocks)) throw std::invalid_argument("jackknife needs >= 2 blocks");
    std::vector<char> keep(n, 1);
    Estimate e;
    e.value = stat(keep);
    std::vector<double> th(blocks);
    for (int b = 0; b < blocks; ++b) {
        for (size_t i = 0; i < n; ++i) keep[i] = (i * blocks / n) != size_t(b);
        th[b] = stat(keep);
    }
    double m = mean(th), ss = 0;
    for (double v : th) ss += (v - m) * (v - m);
    e.se = std::sqrt(double(blocks - 1) / blocks * ss);
    return e;
}

LinFit linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                  const std::vector<double>& sd) {
    size_t n = x.size();
    if (n < 2 || y.size() != n) throw std::invalid_argument("linear_fit needs >= 2 points");
    double S = 0, Sx = 0, Sy = 0, Sxx = 0, Sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        double w = sd.empty() ? 1.0 : 1.0 / (sd[i] * sd[i]);
        S += w; Sx += w * x[i]; Sy += w * y[i];
        Sxx += w * x[i] * x[i]; Sxy += w * x[i] * y[i];
    }
    double D = S * Sxx - Sx * Sx;
    LinFit f;
    f.slope = (S * Sxy - Sx * Sy) / D;
    f.intercept = (Sxx * Sy - Sx * Sxy) / D;
    if (!sd.empty()) {
        f.slope_se = std::sqrt(S / D);
        f.intercept_se = std::sqrt(Sxx / D);
    } else if (n > 2) {
        double rss = 0;
        for (size_t i = 0; i < n; ++i) {
            double r = y[i] - f.intercept - f.slope * x[i];
            rss += r * r;
        }
        double s2 = rss / double(n - 2);
        f.slope_se = std::sqrt(s2 * S / D);
        f.intercept_se = std::sqrt(s2 * Sxx / D);
    }
    return f;
}

int worker_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace sg
