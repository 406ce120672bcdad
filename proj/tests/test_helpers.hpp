#pragma once

#include <cmath>
#include <functional>

#include "mdre/core.hpp"
#include "mdre/rng.hpp"

namespace mdre::testing {

// central-difference oracle for d/dx_i of a scalar function
inline double central_diff(const std::function<double(const Vec&)>& f, Vec x, std::size_t i,
                           double h) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f(x);
    x[i] = saved - h;
    const double down = f(x);
    return (up - down) / (2.0 * h);
}

inline double rel_err(double a, double b, double floor = 1.0) {
    return std::fabs(a - b) / std::max({std::fabs(a), std::fabs(b), floor});
}

inline Vec log_uniform_vec(RngStream& rng, int n, double lo_log = -3.0, double hi_log = 3.0) {
    Vec v(n);
    for (double& x : v) x = std::exp(lo_log + (hi_log - lo_log) * rng.uniform());
    return v;
}

inline Vec simplex_vec(RngStream& rng, int k, double mix = 0.1) {
    Vec v(k);
    double s = 0.0;
    for (double& x : v) {
        x = -std::log(1.0 - rng.uniform());
        s += x;
    }
    for (double& x : v) x = (1.0 - mix) * (x / s) + mix / k;
    double t = 0.0;
    for (double x : v) t += x;
    for (double& x : v) x /= t;
    return v;
}

inline GroupedDataset random_dataset(RngStream& rng, int k, int dim, std::size_t n_per_group) {
    std::vector<Matrix> groups;
    for (int g = 0; g < k; ++g) {
        Matrix m(n_per_group, dim);
        for (double& x : m.data) x = rng.normal();
        groups.push_back(std::move(m));
    }
    return GroupedDataset(std::move(groups), dim);
}

}  // namespace mdre::testing
