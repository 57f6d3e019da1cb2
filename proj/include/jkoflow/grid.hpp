#pragma once

// Uniform 1-D grid on [0,1], discrete probability densities, time-discrete
// curves, and a Neumann heat flow. Domain measure is normalized to 1, so a
// density vector rho with sum(rho)*dx == 1 is a probability measure.
//
// A GridMeasure carries two consistent views: for transport it is the atomic
// measure  sum_i rho_i*dx * delta_{x_i},  for integral functionals it is the
// piecewise-constant density rho.

#include <cmath>
#include <cstddef>
#include <vector>

#include "errors.hpp"

namespace jkoflow {

inline constexpr double kMassTol = 1e-12;

struct Grid {
    int n = 0;
    double dx = 0.0;

    Grid() = default;
    explicit Grid(int cells) : n(cells), dx(1.0 / cells) {
        require(cells >= 2, Err::BadParameter, "grid needs at least 2 cells");
    }

    double center(int i) const { return (i + 0.5) * dx; }
    // right edge of cell i (mass breakpoint between cells i and i+1)
    double edge(int i) const { return (i + 1) * dx; }

    friend bool operator==(const Grid& a, const Grid& b) { return a.n == b.n; }
};

class GridMeasure {
  public:
    GridMeasure(const Grid& grid, std::vector<double> rho) : grid_(grid), rho_(std::move(rho)) {
        require(static_cast<int>(rho_.size()) == grid_.n, Err::BadParameter,
                "density length does not match grid");
        double mass = 0.0;
        for (double v : rho_) {
            require(v >= 0.0, Err::NegativeDensity, "density entries must be nonnegative");
            mass += v;
        }
        mass *= grid_.dx;
        require(std::abs(mass - 1.0) <= 1e-9, Err::MassMismatch,
                "total mass " + std::to_string(mass) + " != 1");
        // snap to unit mass so downstream cumulative sums terminate at exactly 1
        if (mass != 1.0) {
            for (double& v : rho_) v /= mass;
        }
    }

    const Grid& grid() const { return grid_; }
    int n() const { return grid_.n; }
    double dx() const { return grid_.dx; }
    const std::vector<double>& rho() const { return rho_; }
    double rho(int i) const { return rho_[i]; }
    double mass(int i) const { return rho_[i] * grid_.dx; }

    double total_mass() const {
        double m = 0.0;
        for (double v : rho_) m += v;
        return m * grid_.dx;
    }

    double max_density() const {
        double m = 0.0;
        for (double v : rho_) m = std::max(m, v);
        return m;
    }

    bool strictly_positive() const {
        for (double v : rho_) {
            if (v <= 0.0) return false;
        }
        return true;
    }

    // cumulative cell masses; entry i is the mass of cells 0..i, last entry == 1
    std::vector<double> cumulative() const {
        std::vector<double> s(rho_.size());
        double acc = 0.0;
        for (std::size_t i = 0; i < rho_.size(); ++i) {
            acc += rho_[i] * grid_.dx;
            s[i] = acc;
        }
        s.back() = 1.0;
        return s;
    }

    friend bool operator==(const GridMeasure& a, const GridMeasure& b) {
        return a.grid_ == b.grid_ && a.rho_ == b.rho_;
    }

  private:
    Grid grid_;
    std::vector<double> rho_;
};

inline GridMeasure uniform_measure(const Grid& g) {
    return GridMeasure(g, std::vector<double>(g.n, 1.0));
}

inline GridMeasure from_density(const Grid& grid, const std::vector<double>& values,
                                bool normalize) {
    require(static_cast<int>(values.size()) == grid.n, Err::BadParameter,
            "value count does not match grid");
    double mass = 0.0;
    for (double v : values) {
        require(v >= 0.0, Err::NegativeDensity, "negative density value");
        mass += v;
    }
    mass *= grid.dx;
    if (normalize) {
        require(mass > 0.0, Err::ZeroMass, "cannot normalize the zero vector");
        std::vector<double> scaled(values);
        for (double& v : scaled) v /= mass;
        return GridMeasure(grid, scaled);
    }
    require(std::abs(mass - 1.0) <= 1e-9, Err::MassMismatch,
            "total mass " + std::to_string(mass) + " != 1");
    return GridMeasure(grid, values);
}

struct Atom {
    double position = 0.0;
    double mass = 0.0;
};

class AtomList {
  public:
    AtomList() = default;
    explicit AtomList(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
        double mass = 0.0;
        for (const Atom& a : atoms_) {
            require(a.mass >= 0.0, Err::NegativeDensity, "atom masses must be nonnegative");
            require(a.position >= 0.0 && a.position <= 1.0, Err::BadParameter,
                    "atom positions must lie in [0,1]");
            mass += a.mass;
        }
        require(std::abs(mass - 1.0) <= 1e-9, Err::MassMismatch, "atom masses must sum to 1");
    }

    const std::vector<Atom>& atoms() const { return atoms_; }
    std::size_t size() const { return atoms_.size(); }

    double mean() const {
        double m = 0.0;
        for (const Atom& a : atoms_) m += a.position * a.mass;
        return m;
    }

  private:
    std::vector<Atom> atoms_;
};

// Splits each atom between the two nearest cell centers so that total mass and
// first moment are preserved; atoms outside [center_0, center_{n-1}] give all
// mass to the nearest center.
inline GridMeasure rebin_atoms(const AtomList& atoms, const Grid& grid) {
    std::vector<double> rho(grid.n, 0.0);
    const double x0 = grid.center(0);
    const double xn = grid.center(grid.n - 1);
    for (const Atom& a : atoms.atoms()) {
        if (a.position <= x0) {
            rho[0] += a.mass;
        } else if (a.position >= xn) {
            rho[grid.n - 1] += a.mass;
        } else {
            int i = static_cast<int>(std::floor(a.position / grid.dx - 0.5));
            i = std::min(std::max(i, 0), grid.n - 2);
            double w = (a.position - grid.center(i)) / grid.dx;  // in [0,1]
            rho[i] += a.mass * (1.0 - w);
            rho[i + 1] += a.mass * w;
        }
    }
    for (double& v : rho) v /= grid.dx;
    return GridMeasure(grid, rho);
}

namespace detail {

// Thomas algorithm for a symmetric tridiagonal system with constant
// off-diagonal `off` and diagonal `diag`.
inline void solve_tridiagonal(const std::vector<double>& diag, double off,
                              std::vector<double>& rhs) {
    const std::size_t n = rhs.size();
    std::vector<double> c(n, 0.0);
    c[0] = off / diag[0];
    rhs[0] /= diag[0];
    for (std::size_t i = 1; i < n; ++i) {
        double m = diag[i] - off * c[i - 1];
        c[i] = off / m;
        rhs[i] = (rhs[i] - off * rhs[i - 1]) / m;
    }
    for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
}

}  // namespace detail

// Heat semigroup with reflecting boundaries, by implicit Euler substeps. The
// substep matrix is doubly stochastic, so every functional sum u(rho)*dx with
// u convex is non-increasing and the maximum principle holds step by step.
inline GridMeasure heat_flow(const GridMeasure& mu, double s, double ds) {
    require(s >= 0.0, Err::BadParameter, "duration must be nonnegative");
    if (s == 0.0) return mu;
    require(ds > 0.0, Err::InvalidStep, "substep must be positive when s > 0");
    ds = std::min(ds, s);
    const int steps = std::max(1, static_cast<int>(std::ceil(s / ds - 1e-12)));
    const double dt = s / steps;
    const Grid& g = mu.grid();
    const double r = dt / (g.dx * g.dx);

    std::vector<double> diag(g.n, 1.0 + 2.0 * r);
    diag.front() = 1.0 + r;
    diag.back() = 1.0 + r;

    std::vector<double> rho = mu.rho();
    for (int k = 0; k < steps; ++k) {
        detail::solve_tridiagonal(diag, -r, rho);
        double mass = 0.0;
        for (double v : rho) mass += v;
        mass *= g.dx;
        for (double& v : rho) v /= mass;
    }
    return GridMeasure(g, rho);
}

class DiscreteCurve {
  public:
    DiscreteCurve(const Grid& grid, double horizon, int steps, std::vector<GridMeasure> slices)
        : grid_(grid), T_(horizon), N_(steps), slices_(std::move(slices)) {
        require(horizon > 0.0, Err::BadParameter, "horizon must be positive");
        require(steps >= 1, Err::BadParameter, "need at least one time step");
        require(static_cast<int>(slices_.size()) == N_ + 1, Err::BadParameter,
                "curve needs N+1 slices");
        for (const GridMeasure& m : slices_)
            require(m.grid() == grid_, Err::GridMismatch, "curve slices must share a grid");
    }

    const Grid& grid() const { return grid_; }
    double horizon() const { return T_; }
    int steps() const { return N_; }
    double tau() const { return T_ / N_; }
    double time(int k) const { return k * tau(); }
    const GridMeasure& slice(int k) const { return slices_.at(k); }
    const std::vector<GridMeasure>& slices() const { return slices_; }

    void set_slice(int k, GridMeasure m) {
        require(m.grid() == grid_, Err::GridMismatch, "slice grid mismatch");
        slices_.at(k) = std::move(m);
    }

  private:
    Grid grid_;
    double T_;
    int N_;
    std::vector<GridMeasure> slices_;
};

inline DiscreteCurve constant_curve(const GridMeasure& m, double horizon, int steps) {
    return DiscreteCurve(m.grid(), horizon, steps,
                         std::vector<GridMeasure>(static_cast<std::size_t>(steps) + 1, m));
}

}  // namespace jkoflow
