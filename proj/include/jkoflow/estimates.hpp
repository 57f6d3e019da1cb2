#pragma once

// Numerical verification of the inequalities satisfied by solved curves:
// flow-interchange rows, the boundary (one-sided) estimate, discrete
// almost-convexity frequencies, windowed L^m statistics and the Moser-style
// exponent ladders that bootstrap them towards the sup norm.

#include <cmath>
#include <optional>
#include <vector>

#include "functionals.hpp"
#include "solver.hpp"

namespace jkoflow {

struct FlowInterchangeRow {
    int k = 0;
    double m = 0.0;
    double lhs = 0.0;       // dissipation integrals at slice k
    double rhs = 0.0;       // second difference of U_m over tau^2
    double residual = 0.0;  // rhs - lhs, nonnegative up to discretization
};

namespace detail {

// central differences with reflected ghost cells (no-flux data)
inline std::vector<double> reflected_gradient(const std::vector<double>& v, double dx) {
    const int n = static_cast<int>(v.size());
    std::vector<double> g(n);
    for (int i = 0; i < n; ++i) {
        double left = (i == 0) ? v[0] : v[i - 1];
        double right = (i == n - 1) ? v[n - 1] : v[i + 1];
        g[i] = (right - left) / (2.0 * dx);
    }
    return g;
}

}  // namespace detail

// (sum_{T1 <= k tau <= T2} tau U_m)^(1/m), evaluated in log space so that
// large exponents stay finite; 0 on an empty window.
inline double lm_stat(const DiscreteCurve& curve, double m, double T1, double T2) {
    require(m > 1.0, Err::BadParameter, "lm_stat needs m > 1");
    require(T1 >= -1e-12 && T2 <= curve.horizon() + 1e-12 && T1 <= T2 + 1e-12,
            Err::BadParameter, "window outside [0, T]");
    const double tau = curve.tau();
    const double ltau = std::log(tau);
    std::vector<double> terms;
    for (int k = 0; k <= curve.steps(); ++k) {
        double t = curve.time(k);
        if (t >= T1 - 1e-12 && t <= T2 + 1e-12)
            terms.push_back(ltau + log_internal_energy(curve.slice(k), m));
    }
    if (terms.empty()) return 0.0;
    double lmax = -kInfinity;
    for (double t : terms) lmax = std::max(lmax, t);
    double acc = 0.0;
    for (double t : terms) acc += std::exp(t - lmax);
    return std::exp((lmax + std::log(acc)) / m);
}

inline double sup_density(const DiscreteCurve& curve, double T1, double T2) {
    require(T1 >= -1e-12 && T2 <= curve.horizon() + 1e-12 && T1 <= T2 + 1e-12,
            Err::BadParameter, "window outside [0, T]");
    double sup = 0.0;
    for (int k = 0; k <= curve.steps(); ++k) {
        double t = curve.time(k);
        if (t >= T1 - 1e-12 && t <= T2 + 1e-12) sup = std::max(sup, curve.slice(k).max_density());
    }
    return sup;
}

inline std::vector<FlowInterchangeRow> flow_interchange_report(const DiscreteCurve& curve,
                                                               const ProblemSpec& spec,
                                                               const std::vector<double>& m_list,
                                                               double residual_tol = 1e-6) {
    for (double m : m_list) require(m >= 1.0, Err::BadParameter, "exponents must be >= 1");
    for (int k = 1; k <= spec.N - 1; ++k)
        require(optimality_residual(curve, spec, k) <= residual_tol, Err::NotConverged,
                "curve is not converged at slice " + std::to_string(k));

    const Grid& g = curve.grid();
    const double tau = curve.tau();
    std::vector<double> gradV = detail::reflected_gradient(spec.V.values, g.dx);
    std::vector<FlowInterchangeRow> rows;
    rows.reserve(static_cast<std::size_t>(std::max(spec.N - 1, 0)) * m_list.size());
    for (int k = 1; k <= spec.N - 1; ++k) {
        const GridMeasure& rho = curve.slice(k);
        std::vector<double> grad = detail::reflected_gradient(rho.rho(), g.dx);
        for (double m : m_list) {
            FlowInterchangeRow row;
            row.k = k;
            row.m = m;
            double lhs = 0.0;
            for (int i = 0; i < g.n; ++i) {
                double w = std::pow(rho.rho(i), m - 1.0);
                lhs += (grad[i] * grad[i] * spec.congestion.fpp(rho.rho(i)) +
                        grad[i] * gradV[i]) *
                       w;
            }
            row.lhs = lhs * g.dx;
            row.rhs = (internal_energy(curve.slice(k - 1), m) +
                       internal_energy(curve.slice(k + 1), m) -
                       2.0 * internal_energy(rho, m)) /
                      (tau * tau);
            row.residual = row.rhs - row.lhs;
            rows.push_back(row);
        }
    }
    return rows;
}

// (U_m(rho_{N-1}) - U_m(rho_N))/tau + (m-1) ||lap W||_inf U_m(rho_N);
// nonnegative up to discretization under a g+W final penalization.
inline double boundary_flow_check(const DiscreteCurve& curve, const ProblemSpec& spec, double m) {
    require(m >= 1.0, Err::BadParameter, "exponent must be >= 1");
    const GPlusW* gw = std::get_if<GPlusW>(&spec.psi);
    require(gw != nullptr, Err::WrongPenalization,
            "boundary check needs a g+W final penalization");
    const double tau = curve.tau();
    double um_prev = internal_energy(curve.slice(spec.N - 1), m);
    double um_last = internal_energy(curve.slice(spec.N), m);
    return (um_prev - um_last) / tau + (m - 1.0) * gw->W.lap_sup * um_last;
}

// smallest omega^2 >= 0 with (u_{k+1} + u_{k-1} - 2u_k)/tau^2 + omega^2 u_k >= 0
// for all interior k, where u_k = U_m(slice k); zero iff discretely convex
inline double omega_estimate(const DiscreteCurve& curve, double m) {
    require(curve.steps() >= 2, Err::BadParameter, "need at least two steps");
    const double tau = curve.tau();
    std::vector<double> u(curve.steps() + 1);
    for (int k = 0; k <= curve.steps(); ++k) u[k] = internal_energy(curve.slice(k), m);
    double omega_sq = 0.0;
    for (int k = 1; k < curve.steps(); ++k) {
        double second = (u[k + 1] + u[k - 1] - 2.0 * u[k]) / (tau * tau);
        omega_sq = std::max(omega_sq, -second / u[k]);
    }
    return std::max(omega_sq, 0.0);
}

enum class MoserSchedule { Strong, Weak };

struct MoserTrace {
    MoserSchedule schedule = MoserSchedule::Strong;
    std::vector<double> m_values;
    std::vector<double> window_starts;
    std::vector<double> window_ends;
    std::vector<double> eps_values;
    std::vector<double> L_values;
    double sup_estimate = 0.0;
};

// Exponent ladder of the iteration: m_n = (alpha+2) beta^n on the strong
// schedule, m_{n+1} = beta (m_n + 1 + alpha) on the weak one. Windows shrink
// onto [T1, T2] (or [T1, T] when T2 is absent) like the cutoff cascade.
inline MoserTrace moser_trace(const DiscreteCurve& curve, const ProblemSpec& spec,
                              MoserSchedule schedule, double beta, double eps0, double T1,
                              std::optional<double> T2, int n_max, double m_start = 0.0) {
    require(beta > 1.0, Err::BadParameter, "beta must exceed 1");
    require(eps0 > 0.0, Err::BadParameter, "eps0 must be positive");
    require(n_max >= 0, Err::BadParameter, "n_max must be nonnegative");
    const double alpha = spec.congestion.alpha;
    const double T = curve.horizon();

    std::vector<double> ms;
    if (schedule == MoserSchedule::Strong) {
        require(spec.congestion.assumption != AssumptionClass::Weak, Err::AssumptionViolated,
                "strong schedule needs a strong congestion class");
        double m0 = alpha + 2.0;
        require(m0 > 1.0, Err::BadParameter, "strong schedule needs alpha > -1");
        for (int n = 0; n <= n_max; ++n) ms.push_back(m0 * std::pow(beta, n));
    } else {
        require(spec.congestion.assumption == AssumptionClass::Weak, Err::AssumptionViolated,
                "weak schedule needs a weak congestion class");
        require(m_start > 1.0, Err::BadParameter, "weak schedule needs an m-start > 1");
        require(beta / (beta - 1.0) * m_start > std::abs(alpha + 1.0), Err::AssumptionViolated,
                "weak schedule violates the beta/m0 compatibility condition");
        double m = m_start;
        for (int n = 0; n <= n_max; ++n) {
            require(m > 1.0, Err::BadParameter, "weak exponent ladder left (1, inf)");
            ms.push_back(m);
            m = beta * (m + 1.0 + alpha);
        }
    }

    MoserTrace trace;
    trace.schedule = schedule;
    const double tail0 = eps0 * beta / (beta - 1.0);
    require(T1 - tail0 >= -1e-12, Err::BadParameter, "shrunken window start escapes [0, T]");
    if (T2) require(*T2 + tail0 <= T + 1e-12, Err::BadParameter, "shrunken window end escapes [0, T]");

    for (int n = 0; n <= n_max; ++n) {
        double tail = eps0 * std::pow(beta, -n) * beta / (beta - 1.0);
        double a = std::max(T1 - tail, 0.0);
        double b = T2 ? std::min(*T2 + tail, T) : T;
        trace.m_values.push_back(ms[n]);
        trace.window_starts.push_back(a);
        trace.window_ends.push_back(b);
        trace.eps_values.push_back(eps0 * std::pow(beta, -n));
        trace.L_values.push_back(lm_stat(curve, ms[n], a, b));
    }
    for (double L : trace.L_values) trace.sup_estimate = std::max(trace.sup_estimate, L);
    return trace;
}

// Extrapolated violation floor from a two-resolution pair: a violation at the
// finer grid counts only when it exceeds half the coarse one (first-order
// shrinkage) plus a roundoff guard.
inline double extrapolated_floor(double coarse_violation, double guard = 1e-10) {
    return std::max(0.5 * coarse_violation, guard);
}

}  // namespace jkoflow
