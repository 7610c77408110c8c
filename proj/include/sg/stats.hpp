#pragma once
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sg {

struct Estimate {
    double value = 0, se = 0;
};

Estimate mean_se(const std::vector<double>& x);
double mean(const std::vector<double>& x);
double combined_se(double a, double b);   // sqrt(a^2 + b^2)

// delete-one-block jackknife of a statistic computed from per-sample rows
Estimate jackknife(std::size_t n, int blocks,
                   const std::function<double(const std::vector<char>& keep)>& stat);

struct LinFit {
    double slope = 0, intercept = 0, slope_se = 0, intercept_se = 0;
};
// ordinary least squares; optional per-point standard deviations give weights 1/sd^2
LinFit linear_fit(const std::vector<double>& x, const std::vector<double>& y,
                  const std::vector<double>& sd = {});

int worker_count();

// Evaluates fn(i) for every index and stores results by index, so any reduction done
// afterwards in index order is independent of the thread count.
template <class T, class F>
std::vector<T> ensemble(std::size_t n, F&& fn, bool parallel = true) {
    std::vector<T> out(n);
    if (parallel) {
#pragma omp parallel for schedule(dynamic, 2)
        for (long i = 0; i < long(n); ++i) out[i] = fn(std::size_t(i));
    } else {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    }
    return out;
}

}  // namespace sg
