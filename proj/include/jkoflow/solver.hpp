#pragma once

// Solves the time-discrete density evolution problem by Gauss-Seidel sweeps
// over time slices. Each slice is driven to its first-order condition
//
//   G(rho) + (phi_mu + phi_nu)/(2 tau^2) + V = C,    G = f' + lambda ln,
//
// by a damped fixed point: invert G at C + psi, normalize the constant C by
// bisection/Newton so the slice keeps unit mass, and mix with the current
// iterate. The terminal slice under a g+W penalization is one implicit
// (JKO-type) step with G = g' + lambda_N ln and psi = -phi_mu/(2 tau) - W.

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "functionals.hpp"
#include "grid.hpp"
#include "transport.hpp"

namespace jkoflow {

struct SolverParams {
    int max_sweeps = 2000;
    double sweep_tol = 1e-11;       // action-decrease stopping threshold
    double slice_tol = 1e-8;        // sup-norm optimality-residual threshold
    double damping = 0.5;           // theta in (0,1]
    double bisect_tol = 1e-13;      // mass tolerance for the normalization constant
    double density_floor = 1e-300;  // used only inside logarithms
    int slice_iters_per_sweep = 250;
    int slice_max_iters = 40000;

    void validate() const {
        require(max_sweeps >= 1, Err::BadParameter, "max_sweeps must be positive");
        require(sweep_tol > 0.0 && slice_tol > 0.0 && bisect_tol > 0.0, Err::BadParameter,
                "solver tolerances must be positive");
        require(damping > 0.0 && damping <= 1.0, Err::BadParameter, "damping must be in (0,1]");
        require(density_floor > 0.0, Err::BadParameter, "density floor must be positive");
    }
};

struct SolveReport {
    std::vector<double> action_history;   // per sweep, starting with the initialization
    std::vector<double> slice_residuals;  // final residual per slice index 0..N
    int sweeps_used = 0;
    bool converged = false;
};

namespace detail {

// G = base' + weight*ln, strictly increasing from -inf to +inf on (0, inf).
struct MonotoneLink {
    const CongestionFunction* f = nullptr;
    double log_weight = 0.0;
    double floor = 1e-300;

    double operator()(double t) const {
        return f->fp(t) + log_weight * std::log(std::max(t, floor));
    }
    double slope(double t) const { return f->fpp(t) + log_weight / t; }

    // safeguarded Newton/bisection inverse
    double invert(double y, double guess) const {
        double hi = std::max(guess, 1e-12);
        int guard = 0;
        while ((*this)(hi) < y) {
            hi *= 2.0;
            require(++guard < 4200, Err::InversionFailure, "no upper bracket for G^{-1}");
        }
        double lo = std::min(guess, hi);
        guard = 0;
        while (lo > 0.0 && (*this)(lo) > y) {
            lo *= 0.5;
            require(++guard < 4200, Err::InversionFailure, "no lower bracket for G^{-1}");
        }
        double t = std::min(std::max(guess, lo), hi);
        for (int it = 0; it < 200; ++it) {
            double g = (*this)(t) - y;
            if (g > 0.0)
                hi = t;
            else
                lo = t;
            double step = g / slope(t);
            double tn = t - step;
            if (!(tn > lo && tn < hi)) tn = 0.5 * (lo + hi);
            if (std::abs(tn - t) <= 1e-16 * t) return tn;
            t = tn;
        }
        return t;
    }

    // one guarded Newton refinement of G(t) = y
    double refine(double t, double y) const {
        double tn = t - ((*this)(t) - y) / slope(t);
        if (!(tn > 0.25 * t)) tn = 0.25 * t;
        if (!(tn < 4.0 * t)) tn = 4.0 * t;
        return tn;
    }
};

// Finds C with sum_i Ginv(C + psi_i) dx = 1 and fills t with the inverses.
inline double normalize_mass(const MonotoneLink& G, const std::vector<double>& psi, double dx,
                             double bisect_tol, std::vector<double>& t, double C_guess) {
    const std::size_t n = psi.size();
    auto mass_at = [&](double C, int refinements) {
        double mass = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (int r = 0; r < refinements; ++r) t[i] = G.refine(t[i], C + psi[i]);
            mass += t[i];
        }
        return mass * dx;
    };

    double C = C_guess;
    for (std::size_t i = 0; i < n; ++i) t[i] = G.invert(C + psi[i], t[i] > 0.0 ? t[i] : 1.0);
    double m = mass_at(C, 0);

    // bracket the root of mass(C) - 1
    double lo = C, hi = C, mlo = m, mhi = m, step = 1.0;
    int guard = 0;
    while (mlo > 1.0) {
        lo -= step;
        step *= 2.0;
        mlo = mass_at(lo, 3);
        require(++guard < 300, Err::InversionFailure, "no lower bracket for the mass constant");
    }
    step = 1.0;
    guard = 0;
    while (mhi < 1.0) {
        hi += step;
        step *= 2.0;
        mhi = mass_at(hi, 3);
        require(++guard < 300, Err::InversionFailure, "no upper bracket for the mass constant");
    }

    C = 0.5 * (lo + hi);
    for (int it = 0; it < 300; ++it) {
        m = mass_at(C, 2);
        if (std::abs(m - 1.0) <= bisect_tol) break;
        if (m > 1.0)
            hi = C;
        else
            lo = C;
        double dm = 0.0;
        for (std::size_t i = 0; i < n; ++i) dm += 1.0 / G.slope(t[i]);
        dm *= dx;
        double Cn = C - (m - 1.0) / dm;
        if (!(Cn > lo && Cn < hi)) Cn = 0.5 * (lo + hi);
        C = Cn;
    }
    // polish the inverses at the settled constant
    for (std::size_t i = 0; i < n; ++i) {
        double y = C + psi[i];
        if (std::abs(G(t[i]) - y) > 1e-11 * (1.0 + std::abs(y))) t[i] = G.invert(y, t[i]);
    }
    return C;
}

struct SliceContext {
    const GridMeasure* mu = nullptr;        // previous-time neighbor
    const GridMeasure* nu = nullptr;        // next-time neighbor (absent: terminal)
    const ProblemSpec* spec = nullptr;
    bool terminal = false;

    MonotoneLink link(const SolverParams& p) const {
        MonotoneLink G;
        if (terminal) {
            G.f = &std::get<GPlusW>(spec->psi).g;
            G.log_weight = spec->lambda_N();
        } else {
            G.f = &spec->congestion;
            G.log_weight = spec->lambda;
        }
        G.floor = p.density_floor;
        return G;
    }

    // psi = -(phi_mu + phi_nu)/(2 tau^2) - V, resp. -phi_mu/(2 tau) - W, with
    // the density-view potentials (exact mass gradients of the kinetic terms)
    std::vector<double> psi(const GridMeasure& rho) const {
        const double tau = spec->tau();
        std::vector<double> out(rho.n());
        std::vector<double> pmu = density_potential(rho, *mu);
        if (terminal) {
            const Potential& W = std::get<GPlusW>(spec->psi).W;
            for (int i = 0; i < rho.n(); ++i) out[i] = -pmu[i] / (2.0 * tau) - W.values[i];
        } else {
            std::vector<double> pnu = density_potential(rho, *nu);
            for (int i = 0; i < rho.n(); ++i)
                out[i] = -(pmu[i] + pnu[i]) / (2.0 * tau * tau) - spec->V.values[i];
        }
        return out;
    }

    // sup-norm distance of G(rho) - psi to the nearest constant
    double residual(const GridMeasure& rho, const MonotoneLink& G,
                    const std::vector<double>& psi_vec) const {
        double lo = kInfinity, hi = -kInfinity;
        for (int i = 0; i < rho.n(); ++i) {
            double h = G(rho.rho(i)) - psi_vec[i];
            lo = std::min(lo, h);
            hi = std::max(hi, h);
        }
        return 0.5 * (hi - lo);
    }

    double objective(const GridMeasure& rho) const {
        const double tau = spec->tau();
        if (terminal)
            return w2_density_squared(*mu, rho) / (2.0 * tau) +
                   final_energy(rho, spec->psi, spec->lambda_N());
        return (w2_density_squared(*mu, rho) + w2_density_squared(rho, *nu)) / (2.0 * tau) +
               tau * spec->running_energy(rho);
    }
};

struct SliceResult {
    GridMeasure rho;
    double residual = kInfinity;
    double theta = 0.0;  // adapted damping at exit
    bool hit_budget = false;
};

inline SliceResult slice_fixed_point(const SliceContext& ctx, const SolverParams& params,
                                     const GridMeasure& init, int budget, double theta0) {
    const MonotoneLink G = ctx.link(params);
    const Grid& g = init.grid();
    std::vector<double> cur = init.rho();
    // the fixed point needs strictly positive iterates for the potentials
    for (double& v : cur) v = std::max(v, 1e-14);
    double theta = theta0;
    std::vector<double> t(g.n, 1.0);
    double C = 0.0;
    double best_res = kInfinity;

    GridMeasure best(g, cur);
    for (int it = 0; it < budget; ++it) {
        GridMeasure rho(g, cur);
        std::vector<double> psi = ctx.psi(rho);
        double res = ctx.residual(rho, G, psi);
        if (res < best_res) {
            best = rho;
            best_res = res;
        } else if (res > 2.0 * best_res) {
            theta = std::max(theta * 0.5, 1e-3);
            best_res = res;
        }
        if (res <= params.slice_tol)
            return {std::move(rho), res, theta, false};

        C = normalize_mass(G, psi, g.dx, params.bisect_tol, t, C);
        double mass = 0.0;
        for (int i = 0; i < g.n; ++i) {
            cur[i] = (1.0 - theta) * cur[i] + theta * t[i];
            mass += cur[i];
        }
        mass *= g.dx;
        for (double& v : cur) v /= mass;
    }
    return {std::move(best), best_res, theta, true};
}

}  // namespace detail

// One two-sided (or terminal one-sided) slice minimization. Returns the slice
// with optimality residual at most params.slice_tol; NoConvergence otherwise.
inline GridMeasure solve_slice(const GridMeasure& mu, const std::optional<GridMeasure>& nu,
                               const ProblemSpec& spec, const SolverParams& params,
                               const GridMeasure& init, bool terminal = false) {
    params.validate();
    if (terminal) {
        require(!nu.has_value(), Err::BadParameter, "terminal slice takes no next neighbor");
        require(is_gplusw(spec.psi), Err::WrongPenalization,
                "terminal slice solve needs a g+W penalization");
    } else {
        require(nu.has_value(), Err::BadParameter, "interior slice needs both neighbors");
        require(spec.lambda > 0.0, Err::BadParameter,
                "interior slices require a positive entropic weight");
    }
    detail::SliceContext ctx{&mu, nu ? &*nu : nullptr, &spec, terminal};
    detail::SliceResult r =
        detail::slice_fixed_point(ctx, params, init, params.slice_max_iters, params.damping);
    require(r.residual <= params.slice_tol, Err::NoConvergence,
            "slice residual " + std::to_string(r.residual) + " above tolerance");
    return r.rho;
}

// Sup-norm deviation of slice k from its first-order condition, with freshly
// derived Kantorovich potentials.
inline double optimality_residual(const DiscreteCurve& curve, const ProblemSpec& spec, int k) {
    const bool terminal_ok = is_gplusw(spec.psi);
    require(k >= 1 && (k <= spec.N - 1 || (k == spec.N && terminal_ok)), Err::BadParameter,
            "slice index outside the movable range");
    SolverParams params;
    detail::SliceContext ctx;
    ctx.spec = &spec;
    ctx.mu = &curve.slice(k - 1);
    ctx.terminal = (k == spec.N);
    if (!ctx.terminal) ctx.nu = &curve.slice(k + 1);
    detail::MonotoneLink G = ctx.link(params);
    const GridMeasure& rho = curve.slice(k);
    return ctx.residual(rho, G, ctx.psi(rho));
}

inline DiscreteCurve default_initial_curve(const ProblemSpec& spec) {
    GridMeasure uni = uniform_measure(spec.grid);
    auto mix = [&](const GridMeasure& m) {
        std::vector<double> v(m.n());
        for (int i = 0; i < m.n(); ++i) v[i] = 0.99 * m.rho(i) + 0.01;
        return GridMeasure(spec.grid, v);
    };
    const PrescribedTarget* pt = std::get_if<PrescribedTarget>(&spec.psi);
    GridMeasure start = mix(spec.rho0);
    GridMeasure end = pt ? mix(pt->target) : uni;
    std::vector<GridMeasure> slices;
    slices.reserve(spec.N + 1);
    slices.push_back(spec.rho0);
    for (int k = 1; k <= spec.N - 1; ++k)
        slices.push_back(
            displacement_interpolate_density(start, end, static_cast<double>(k) / spec.N));
    slices.push_back(pt ? pt->target : end);
    return DiscreteCurve(spec.grid, spec.T, spec.N, std::move(slices));
}

inline std::pair<DiscreteCurve, SolveReport> solve(
    const ProblemSpec& spec, const SolverParams& params,
    const std::optional<DiscreteCurve>& warm_start = std::nullopt) {
    params.validate();
    require(spec.lambda > 0.0, Err::BadParameter, "solve requires lambda > 0");
    if (const PrescribedTarget* pt = std::get_if<PrescribedTarget>(&spec.psi)) {
        require(final_energy(pt->target, spec.psi, 0.0) == 0.0, Err::Infeasible,
                "prescribed target is not attainable");
    }

    DiscreteCurve curve = warm_start ? *warm_start : default_initial_curve(spec);
    require(curve.grid() == spec.grid && curve.steps() == spec.N, Err::GridMismatch,
            "warm start does not match the problem discretization");

    std::vector<int> movable;
    for (int k = 1; k <= spec.N - 1; ++k) movable.push_back(k);
    if (is_gplusw(spec.psi)) movable.push_back(spec.N);

    SolveReport report;
    report.action_history.push_back(discrete_action(curve, spec));
    std::vector<double> theta(spec.N + 1, params.damping);

    int sweep = 0;
    for (; sweep < params.max_sweeps && !movable.empty(); ++sweep) {
        std::vector<int> order = movable;
        if (sweep % 2 == 1) std::reverse(order.begin(), order.end());
        for (int k : order) {
            detail::SliceContext ctx;
            ctx.spec = &spec;
            ctx.mu = &curve.slice(k - 1);
            ctx.terminal = (k == spec.N);
            if (!ctx.terminal) ctx.nu = &curve.slice(k + 1);
            detail::SliceResult r = detail::slice_fixed_point(
                ctx, params, curve.slice(k), params.slice_iters_per_sweep, theta[k]);
            theta[k] = r.theta;
            // keep the previous slice if the refit did not lower its objective
            if (ctx.objective(r.rho) <= ctx.objective(curve.slice(k)))
                curve.set_slice(k, std::move(r.rho));
        }
        double action = discrete_action(curve, spec);
        double decrease = report.action_history.back() - action;
        report.action_history.push_back(action);
        if (decrease < params.sweep_tol) {
            double worst = 0.0;
            for (int k : movable) worst = std::max(worst, optimality_residual(curve, spec, k));
            if (worst <= params.slice_tol) {
                ++sweep;
                break;
            }
        }
    }
    report.sweeps_used = sweep;
    report.slice_residuals.assign(spec.N + 1, 0.0);
    double worst = 0.0;
    for (int k : movable) {
        report.slice_residuals[k] = optimality_residual(curve, spec, k);
        worst = std::max(worst, report.slice_residuals[k]);
    }
    report.converged = movable.empty() || worst <= params.slice_tol;
    return {std::move(curve), std::move(report)};
}

}  // namespace jkoflow
