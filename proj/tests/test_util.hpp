#pragma once

#include <random>
#include <vector>

#include "jkoflow/functionals.hpp"
#include "jkoflow/grid.hpp"

namespace testutil {

using jkoflow::Grid;
using jkoflow::GridMeasure;

// strictly positive random density, normalized
inline GridMeasure random_measure(const Grid& g, std::mt19937_64& rng, double floor = 0.05) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(g.n);
    for (double& x : v) x = floor + u(rng);
    return jkoflow::from_density(g, v, true);
}

// smooth positive bump with a floor, normalized
inline GridMeasure bump_measure(const Grid& g, double center, double width, double floor = 0.05) {
    std::vector<double> v(g.n);
    for (int i = 0; i < g.n; ++i) {
        double d = (g.center(i) - center) / width;
        v[i] = floor + std::exp(-0.5 * d * d);
    }
    return jkoflow::from_density(g, v, true);
}

inline GridMeasure point_column(const Grid& g, int cell) {
    std::vector<double> v(g.n, 0.0);
    v[cell] = g.n;
    return GridMeasure(g, v);
}

inline GridMeasure linear_density(const Grid& g, double at0, double at1) {
    std::vector<double> v(g.n);
    for (int i = 0; i < g.n; ++i) v[i] = at0 + (at1 - at0) * g.center(i);
    return jkoflow::from_density(g, v, true);
}

}  // namespace testutil
