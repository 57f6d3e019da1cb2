#pragma once

// Internal energies U_m, congestion functionals, potentials, final
// penalizations and the discrete action of a time-discrete curve.

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "grid.hpp"
#include "transport.hpp"

namespace jkoflow {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// u_m(t): t ln t + 1 for m = 1 (with 0 ln 0 := 0), t^m / (m(m-1)) for m > 1.
inline double u_m(double t, double m) {
    require(m >= 1.0, Err::BadParameter, "u_m needs m >= 1");
    if (m == 1.0) return (t > 0.0) ? t * std::log(t) + 1.0 : 1.0;
    return std::pow(t, m) / (m * (m - 1.0));
}

inline double internal_energy(const GridMeasure& rho, double m) {
    require(m >= 1.0, Err::BadParameter, "internal energy needs m >= 1");
    double sum = 0.0;
    for (double v : rho.rho()) sum += u_m(v, m);
    return sum * rho.dx();
}

// ln U_m for m > 1, evaluated in log space so that large exponents do not
// overflow: ln U_m = logsumexp_i(m ln rho_i + ln dx) - ln(m(m-1)).
inline double log_internal_energy(const GridMeasure& rho, double m) {
    require(m > 1.0, Err::BadParameter, "log internal energy needs m > 1");
    const double ldx = std::log(rho.dx());
    double lmax = -kInfinity;
    for (double v : rho.rho())
        if (v > 0.0) lmax = std::max(lmax, m * std::log(v) + ldx);
    if (lmax == -kInfinity) return -kInfinity;
    double acc = 0.0;
    for (double v : rho.rho())
        if (v > 0.0) acc += std::exp(m * std::log(v) + ldx - lmax);
    return lmax + std::log(acc) - std::log(m) - std::log(m - 1.0);
}

enum class AssumptionClass { Strong, StrongVariant, Weak };

inline const char* assumption_name(AssumptionClass c) {
    switch (c) {
        case AssumptionClass::Strong: return "strong";
        case AssumptionClass::StrongVariant: return "strong-variant";
        case AssumptionClass::Weak: return "weak";
    }
    return "?";
}

// Convex congestion integrand f with derivatives and its lower-bound class:
// f''(t) >= C_f t^alpha for t > 0 (strong, alpha >= -1), for t >= t0
// (strong-variant, alpha >= -1), or for t >= t0 with alpha < -1 (weak).
struct CongestionFunction {
    std::string name;
    std::function<double(double)> f;
    std::function<double(double)> fp;
    std::function<double(double)> fpp;
    double f_prime_inf = kInfinity;
    AssumptionClass assumption = AssumptionClass::Strong;
    double alpha = 0.0;
    double t0 = 0.0;
    double C_f = 1.0;

    // largest violation of the declared class inequality over a log-spaced
    // sample (negative or zero when the declaration holds)
    double class_violation(int samples = 200) const {
        double lo = (assumption == AssumptionClass::Strong) ? 1e-6 : std::max(t0, 1e-12);
        double hi = 1e6;
        double worst = -kInfinity;
        for (int s = 0; s < samples; ++s) {
            double t = lo * std::pow(hi / lo, static_cast<double>(s) / (samples - 1));
            worst = std::max(worst, C_f * std::pow(t, alpha) - fpp(t));
        }
        return worst;
    }

    void validate() const {
        if (assumption == AssumptionClass::Weak)
            require(alpha < -1.0, Err::BadParameter, "weak congestion needs alpha < -1");
        else
            require(alpha >= -1.0, Err::BadParameter, "strong congestion needs alpha >= -1");
        require(C_f > 0.0, Err::BadParameter, "C_f must be positive");
        require(t0 >= 0.0, Err::BadParameter, "t0 must be nonnegative");
        require(class_violation() <= 1e-9, Err::AssumptionViolated,
                name + " does not satisfy its declared congestion class");
    }
};

inline CongestionFunction congestion_um(double m) {
    require(m >= 1.0, Err::BadParameter, "congestion u_m needs m >= 1");
    CongestionFunction c;
    c.name = "um:" + std::to_string(m);
    c.f = [m](double t) { return u_m(t, m); };
    if (m == 1.0) {
        c.fp = [](double t) { return std::log(std::max(t, 1e-300)) + 1.0; };
        c.fpp = [](double t) { return 1.0 / t; };
    } else {
        c.fp = [m](double t) { return std::pow(t, m - 1.0) / (m - 1.0); };
        c.fpp = [m](double t) { return std::pow(t, m - 2.0); };
    }
    c.f_prime_inf = kInfinity;
    c.assumption = AssumptionClass::Strong;
    c.alpha = m - 2.0;
    c.t0 = 0.0;
    c.C_f = 1.0;
    return c;
}

inline CongestionFunction congestion_sqrt1p2() {
    CongestionFunction c;
    c.name = "sqrt1p2";
    c.f = [](double t) { return std::sqrt(1.0 + t * t); };
    c.fp = [](double t) { return t / std::sqrt(1.0 + t * t); };
    c.fpp = [](double t) { return 1.0 / std::pow(1.0 + t * t, 1.5); };
    c.f_prime_inf = 1.0;
    c.assumption = AssumptionClass::Weak;
    c.alpha = -3.0;
    c.t0 = 1.0;
    c.C_f = std::pow(2.0, -1.5);
    return c;
}

inline CongestionFunction congestion_sqrt1p4() {
    CongestionFunction c;
    c.name = "sqrt1p4";
    c.f = [](double t) { return std::sqrt(1.0 + t * t * t * t); };
    c.fp = [](double t) {
        double t3 = t * t * t;
        return 2.0 * t3 / std::sqrt(1.0 + t * t3);
    };
    c.fpp = [](double t) {
        double t2 = t * t, t4 = t2 * t2;
        return (6.0 * t2 + 2.0 * t4 * t2) / std::pow(1.0 + t4, 1.5);
    };
    c.f_prime_inf = kInfinity;
    c.assumption = AssumptionClass::StrongVariant;
    c.alpha = 0.0;
    c.t0 = 1.0;
    c.C_f = std::pow(2.0, -0.5);
    return c;
}

inline CongestionFunction congestion_hinge2() {
    CongestionFunction c;
    c.name = "hinge2";
    c.f = [](double t) { double p = std::max(t - 1.0, 0.0); return p * p; };
    c.fp = [](double t) { return 2.0 * std::max(t - 1.0, 0.0); };
    c.fpp = [](double t) { return t >= 1.0 ? 2.0 : 0.0; };
    c.f_prime_inf = kInfinity;
    c.assumption = AssumptionClass::StrongVariant;
    c.alpha = 0.0;
    c.t0 = 1.0;
    c.C_f = 2.0;
    return c;
}

inline double congestion_energy(const GridMeasure& rho, const CongestionFunction& f) {
    double sum = 0.0;
    for (double v : rho.rho()) sum += f.f(v);
    return sum * rho.dx();
}

// Spatial potential sampled at cell centers, with the discrete sup norms of
// its gradient and Laplacian and the outward-slope sign flag used by the
// boundary assumption.
struct Potential {
    std::string name;
    std::vector<double> values;
    double grad_sup = 0.0;
    double lap_sup = 0.0;
    bool boundary_flag = false;

    Potential() = default;
    Potential(std::string label, const Grid& g, std::vector<double> vals)
        : name(std::move(label)), values(std::move(vals)) {
        require(static_cast<int>(values.size()) == g.n, Err::BadParameter,
                "potential length does not match grid");
        for (int i = 0; i + 1 < g.n; ++i)
            grad_sup = std::max(grad_sup, std::abs(values[i + 1] - values[i]) / g.dx);
        for (int i = 1; i + 1 < g.n; ++i)
            lap_sup = std::max(lap_sup, std::abs(values[i + 1] - 2.0 * values[i] + values[i - 1]) /
                                            (g.dx * g.dx));
        boundary_flag = values.front() >= values[1] - 1e-12 &&
                        values.back() >= values[g.n - 2] - 1e-12;
    }
};

inline Potential zero_potential(const Grid& g) {
    return Potential("zero", g, std::vector<double>(g.n, 0.0));
}

inline Potential quadratic_well(const Grid& g, double scale = 1.0) {
    std::vector<double> v(g.n);
    for (int i = 0; i < g.n; ++i) {
        double d = g.center(i) - 0.5;
        v[i] = scale * d * d;
    }
    return Potential("quadratic_well", g, std::move(v));
}

inline double potential_energy(const GridMeasure& rho, const Potential& V) {
    double sum = 0.0;
    for (int i = 0; i < rho.n(); ++i) sum += V.values[i] * rho.rho(i);
    return sum * rho.dx();
}

struct PrescribedTarget {
    GridMeasure target;
};

struct GPlusW {
    CongestionFunction g;  // convex, superlinear
    Potential W;
};

using FinalPenalization = std::variant<PrescribedTarget, GPlusW>;

inline bool is_gplusw(const FinalPenalization& psi) {
    return std::holds_alternative<GPlusW>(psi);
}

inline bool superlinear(const CongestionFunction& g) {
    double g2 = g.fp(1e2), g4 = g.fp(1e4), g6 = g.fp(1e6);
    return g6 >= 10.0 && g6 >= 2.0 * g4 && g4 >= 2.0 * g2;
}

inline void validate_final(const FinalPenalization& psi) {
    if (const GPlusW* gw = std::get_if<GPlusW>(&psi)) {
        require(superlinear(gw->g), Err::AssumptionViolated,
                "final congestion term must be superlinear");
        require(gw->W.boundary_flag, Err::AssumptionViolated,
                "final potential must have nonnegative outward slopes");
    }
}

inline double final_energy(const GridMeasure& rhoT, const FinalPenalization& psi,
                           double lambda_N) {
    if (const PrescribedTarget* pt = std::get_if<PrescribedTarget>(&psi)) {
        require(rhoT.grid() == pt->target.grid(), Err::GridMismatch,
                "prescribed target grid mismatch");
        for (int i = 0; i < rhoT.n(); ++i)
            if (std::abs(rhoT.rho(i) - pt->target.rho(i)) > 1e-9) return kInfinity;
        return 0.0;
    }
    const GPlusW& gw = std::get<GPlusW>(psi);
    double e = congestion_energy(rhoT, gw.g) + potential_energy(rhoT, gw.W);
    if (lambda_N > 0.0) e += lambda_N * internal_energy(rhoT, 1.0);
    return e;
}

struct ProblemSpec {
    Grid grid;
    double T = 1.0;
    int N = 1;
    double lambda = 0.0;
    GridMeasure rho0;
    CongestionFunction congestion;
    Potential V;
    FinalPenalization psi;

    ProblemSpec(Grid grid_, double T_, int N_, double lambda_, GridMeasure rho0_,
                CongestionFunction f, Potential V_, FinalPenalization psi_)
        : grid(grid_), T(T_), N(N_), lambda(lambda_), rho0(std::move(rho0_)),
          congestion(std::move(f)), V(std::move(V_)), psi(std::move(psi_)) {
        require(T > 0.0, Err::BadParameter, "horizon must be positive");
        require(N >= 1, Err::BadParameter, "need at least one time step");
        require(lambda >= 0.0, Err::BadParameter, "entropic weight must be nonnegative");
        require(rho0.grid() == grid, Err::GridMismatch, "rho0 grid mismatch");
        congestion.validate();
        if (congestion.assumption != AssumptionClass::Strong)
            require(V.boundary_flag, Err::AssumptionViolated,
                    "non-strong congestion requires nonnegative outward potential slopes");
        validate_final(psi);
    }

    double tau() const { return T / N; }
    // lambda_N = lambda when the final penalization is g + W, else 0
    double lambda_N() const { return is_gplusw(psi) ? lambda : 0.0; }

    double running_energy(const GridMeasure& rho) const {
        double e = congestion_energy(rho, congestion) + potential_energy(rho, V);
        if (lambda > 0.0) e += lambda * internal_energy(rho, 1.0);
        return e;
    }
};

// Discrete action of a curve. Kinetic terms use the density-view distance,
// the same convention the solver differentiates; it matches the atomic view
// up to O(dx) and exactly on translates.
inline double discrete_action(const DiscreteCurve& curve, const ProblemSpec& spec) {
    require(curve.grid() == spec.grid, Err::GridMismatch, "curve grid mismatch");
    require(curve.steps() == spec.N && std::abs(curve.horizon() - spec.T) <= 1e-12,
            Err::BadParameter, "curve discretization does not match the problem");
    for (int i = 0; i < spec.grid.n; ++i)
        require(std::abs(curve.slice(0).rho(i) - spec.rho0.rho(i)) <= 1e-9,
                Err::InitialConditionViolated, "curve does not start at rho0");
    const double tau = spec.tau();
    double action = 0.0;
    for (int k = 1; k <= spec.N; ++k)
        action += w2_density_squared(curve.slice(k - 1), curve.slice(k)) / (2.0 * tau);
    for (int k = 1; k <= spec.N - 1; ++k) action += tau * spec.running_energy(curve.slice(k));
    action += final_energy(curve.slice(spec.N), spec.psi, spec.lambda_N());
    return action;
}

}  // namespace jkoflow
