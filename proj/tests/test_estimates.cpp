#include <catch2/catch_amalgamated.hpp>

#include "jkoflow/estimates.hpp"
#include "test_util.hpp"

using namespace jkoflow;

namespace {

ProblemSpec bump_problem(const Grid& g, int N, double lambda,
                         CongestionFunction f = congestion_um(2.0),
                         Potential V = Potential()) {
    if (V.values.empty()) V = zero_potential(g);
    GridMeasure a = testutil::bump_measure(g, 0.35, 0.12);
    GridMeasure b = testutil::bump_measure(g, 0.65, 0.12);
    return ProblemSpec(g, 1.0, N, lambda, a, std::move(f), std::move(V), PrescribedTarget{b});
}

}  // namespace

TEST_CASE("lm_stat on constant curves and empty windows", "[estimates]") {
    Grid g(8);
    const int N = 4;
    DiscreteCurve flat = constant_curve(uniform_measure(g), 1.0, N);
    double expected = std::sqrt((N + 1) * flat.tau() * 0.5);
    CHECK(lm_stat(flat, 2.0, 0.0, 1.0) == Catch::Approx(expected).margin(1e-12));
    CHECK(lm_stat(flat, 2.0, 0.3, 0.4) == 0.0);  // no k tau inside
    try {
        lm_stat(flat, 2.0, 0.8, 0.2);
        FAIL("expected BadParameter");
    } catch (const Error& e) {
        CHECK(e.code() == Err::BadParameter);
    }
}

TEST_CASE("lm_stat handles exponents far beyond double overflow", "[estimates]") {
    Grid g(8);
    std::mt19937_64 rng(2);
    DiscreteCurve c(g, 1.0, 2,
                    {testutil::random_measure(g, rng), testutil::random_measure(g, rng),
                     testutil::random_measure(g, rng)});
    double v = lm_stat(c, 1500.0, 0.0, 1.0);
    CHECK(std::isfinite(v));
    CHECK(v > 0.0);
}

TEST_CASE("sup_density scans the window", "[estimates]") {
    Grid g(2);
    DiscreteCurve flat = constant_curve(uniform_measure(g), 1.0, 2);
    CHECK(sup_density(flat, 0.0, 1.0) == 1.0);
    DiscreteCurve mixed(g, 1.0, 2,
                        {uniform_measure(g), GridMeasure(g, {2.0, 0.0}), uniform_measure(g)});
    CHECK(sup_density(mixed, 0.0, 1.0) == 2.0);
    CHECK(sup_density(mixed, 0.9, 1.0) == 1.0);
}

TEST_CASE("flow interchange rows vanish on a stationary uniform curve", "[estimates]") {
    Grid g(8);
    GridMeasure uni = uniform_measure(g);
    ProblemSpec spec(g, 1.0, 4, 0.01, uni, congestion_um(2.0), zero_potential(g),
                     PrescribedTarget{uni});
    DiscreteCurve flat = constant_curve(uni, 1.0, 4);
    auto rows = flow_interchange_report(flat, spec, {1.0, 2.0, 4.0});
    CHECK(rows.size() == 9);
    for (const auto& row : rows) {
        CHECK(row.lhs == Catch::Approx(0.0).margin(1e-12));
        CHECK(row.rhs == Catch::Approx(0.0).margin(1e-12));
    }
    // m = 1 rows are present (entropy case)
    int m1 = 0;
    for (const auto& row : rows) m1 += (row.m == 1.0);
    CHECK(m1 == 3);
}

TEST_CASE("flow interchange rejects unconverged curves", "[estimates]") {
    Grid g(8);
    std::mt19937_64 rng(27);
    ProblemSpec spec = bump_problem(g, 4, 0.05);
    std::vector<GridMeasure> slices{spec.rho0};
    for (int k = 1; k < 4; ++k) slices.push_back(testutil::random_measure(g, rng));
    slices.push_back(std::get<PrescribedTarget>(spec.psi).target);
    DiscreteCurve junk(g, 1.0, 4, slices);
    try {
        flow_interchange_report(junk, spec, {2.0});
        FAIL("expected NotConverged");
    } catch (const Error& e) {
        CHECK(e.code() == Err::NotConverged);
    }
}

TEST_CASE("flow interchange residuals are nonnegative on solved curves", "[estimates]") {
    Grid g(48);
    ProblemSpec spec = bump_problem(g, 8, 0.02);
    SolverParams params;
    params.slice_tol = 1e-9;
    auto [curve, report] = solve(spec, params);
    REQUIRE(report.converged);
    auto rows = flow_interchange_report(curve, spec, {1.0, 2.0, 4.0}, 1e-8);
    double min_residual = kInfinity;
    for (const auto& row : rows) min_residual = std::min(min_residual, row.residual);
    CHECK(min_residual >= -1e-3);  // discretization floor at this resolution
}

TEST_CASE("boundary flow check on uniform and solved curves", "[estimates]") {
    Grid g(16);
    GridMeasure uni = uniform_measure(g);
    ProblemSpec gw(g, 1.0, 4, 0.01, uni, congestion_um(2.0), zero_potential(g),
                   GPlusW{congestion_um(2.0), zero_potential(g)});
    DiscreteCurve flat = constant_curve(uni, 1.0, 4);
    CHECK(boundary_flow_check(flat, gw, 2.0) == Catch::Approx(0.0).margin(1e-12));

    ProblemSpec pres(g, 1.0, 4, 0.01, uni, congestion_um(2.0), zero_potential(g),
                     PrescribedTarget{uni});
    try {
        boundary_flow_check(flat, pres, 2.0);
        FAIL("expected WrongPenalization");
    } catch (const Error& e) {
        CHECK(e.code() == Err::WrongPenalization);
    }

    GridMeasure start = testutil::bump_measure(g, 0.4, 0.15);
    for (Potential W : {zero_potential(g), quadratic_well(g)}) {
        double lap = W.lap_sup;
        ProblemSpec spec(g, 0.5, 4, 0.02, start, congestion_um(2.0), zero_potential(g),
                         GPlusW{congestion_um(2.0), W});
        SolverParams params;
        params.slice_tol = 1e-9;
        auto [curve, report] = solve(spec, params);
        REQUIRE(report.converged);
        for (double m : {2.0, 4.0}) CHECK(boundary_flow_check(curve, spec, m) >= -1e-3);
        CHECK(lap == Catch::Approx(W.name == "zero" ? 0.0 : 2.0).margin(1e-9));
    }
}

TEST_CASE("omega estimate vanishes on uniform curves and potential-free solves", "[estimates]") {
    Grid g(16);
    DiscreteCurve flat = constant_curve(uniform_measure(g), 1.0, 4);
    for (double m : {1.0, 2.0, 5.0}) CHECK(omega_estimate(flat, m) == 0.0);

    ProblemSpec spec = bump_problem(Grid(32), 8, 0.02);
    SolverParams params;
    params.slice_tol = 1e-10;
    auto [curve, report] = solve(spec, params);
    REQUIRE(report.converged);
    for (double m : {1.0, 2.0, 3.0}) CHECK(omega_estimate(curve, m) <= 0.05);
}

TEST_CASE("omega growth against the m^2 reference is reported", "[estimates]") {
    Grid g(32);
    ProblemSpec spec = bump_problem(g, 8, 0.05, congestion_um(2.0), quadratic_well(g, 4.0));
    SolverParams params;
    params.slice_tol = 1e-9;
    auto [curve, report] = solve(spec, params);
    REQUIRE(report.converged);
    std::vector<double> ms{2.0, 4.0, 8.0}, omegas;
    for (double m : ms) omegas.push_back(omega_estimate(curve, m));
    // least-squares slope of log(omega^2) against log(m), when all positive
    if (omegas[0] > 0.0 && omegas[1] > 0.0 && omegas[2] > 0.0) {
        double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < ms.size(); ++i) {
            double x = std::log(ms[i]), y = std::log(omegas[i]);
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        double slope = (3.0 * sxy - sx * sy) / (3.0 * sxx - sx * sx);
        INFO("fitted omega^2 growth exponent " << slope << " (reference m^2)");
        CHECK(std::isfinite(slope));
    }
    SUCCEED();
}

TEST_CASE("moser exponent ladders", "[estimates]") {
    Grid g(16);
    GridMeasure uni = uniform_measure(g);
    ProblemSpec strong(g, 1.0, 8, 0.01, uni, congestion_um(2.0), zero_potential(g),
                       PrescribedTarget{uni});
    DiscreteCurve flat = constant_curve(uni, 1.0, 8);
    MoserTrace t = moser_trace(flat, strong, MoserSchedule::Strong, 2.0, 0.05, 0.3, 0.7, 4);
    REQUIRE(t.m_values.size() == 5);
    CHECK(t.m_values[0] == 2.0);
    CHECK(t.m_values[1] == 4.0);
    CHECK(t.m_values[2] == 8.0);
    CHECK(t.m_values[3] == 16.0);
    // constant curve: L -> 1 = sup density as the exponent grows
    double last = t.L_values.back();
    double expect = std::pow(1.0 / (32.0 * 31.0), 1.0 / 32.0);
    CHECK(last >= expect * 0.5);
    CHECK(t.L_values.front() <= 1.0);
    CHECK(t.sup_estimate <= 1.0);

    // windows escape [0, T]
    try {
        moser_trace(flat, strong, MoserSchedule::Strong, 2.0, 0.4, 0.3, 0.7, 2);
        FAIL("expected BadParameter");
    } catch (const Error& e) {
        CHECK(e.code() == Err::BadParameter);
    }

    ProblemSpec weak(g, 1.0, 8, 0.01, uni, congestion_sqrt1p2(), zero_potential(g),
                     GPlusW{congestion_um(2.0), zero_potential(g)});
    MoserTrace wt = moser_trace(flat, weak, MoserSchedule::Weak, 2.0, 0.05, 0.3, std::nullopt, 3,
                                5.0);
    CHECK(wt.m_values[0] == 5.0);
    CHECK(wt.m_values[1] == 6.0);   // 2 (5 + 1 - 3)
    CHECK(wt.m_values[2] == 8.0);
    CHECK(wt.m_values[3] == 12.0);
    CHECK(wt.window_ends.back() == 1.0);

    // weak schedule must satisfy the compatibility condition
    try {
        moser_trace(flat, weak, MoserSchedule::Weak, 1.2, 0.05, 0.3, std::nullopt, 3, 0.9);
        FAIL("expected violation");
    } catch (const Error& e) {
        CHECK((e.code() == Err::AssumptionViolated || e.code() == Err::BadParameter));
    }
}

TEST_CASE("lm_stat tabulates across refinement without asserting a limit", "[estimates]") {
    std::vector<double> values;
    for (int N : {4, 8, 16}) {
        ProblemSpec spec = bump_problem(Grid(16), N, 0.05);
        SolverParams params;
        auto [curve, report] = solve(spec, params);
        REQUIRE(report.converged);
        values.push_back(lm_stat(curve, 2.0, 0.0, 1.0));
    }
    for (double v : values) {
        INFO("L^2 across N refinement: " << v);
        CHECK(std::isfinite(v));
    }
}

TEST_CASE("sup density is approached by the normalized L^m statistic", "[estimates]") {
    Grid g(32);
    ProblemSpec spec = bump_problem(g, 8, 0.02);
    SolverParams params;
    auto [curve, report] = solve(spec, params);
    REQUIRE(report.converged);
    double m = 64.0;
    double lnorm = std::pow(m * (m - 1.0), 1.0 / m) * lm_stat(curve, m, 0.0, 1.0);
    double sup = sup_density(curve, 0.0, 1.0);
    CHECK(sup <= lnorm * 1.05);
}

TEST_CASE("extrapolated floor halves coarse violations", "[estimates]") {
    CHECK(extrapolated_floor(1e-3) == Catch::Approx(5e-4));
    CHECK(extrapolated_floor(0.0) == Catch::Approx(1e-10));
}
