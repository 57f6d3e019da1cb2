#include <catch2/catch_amalgamated.hpp>

#include "jkoflow/functionals.hpp"
#include "jkoflow/transport.hpp"
#include "test_util.hpp"

using namespace jkoflow;

TEST_CASE("internal energies at reference points", "[functionals]") {
    Grid g2(2), g4(4);
    CHECK(internal_energy(uniform_measure(g4), 1.0) == Catch::Approx(1.0).margin(1e-15));
    GridMeasure spike(g2, {2.0, 0.0});
    CHECK(internal_energy(spike, 2.0) == Catch::Approx(1.0).margin(1e-15));
    try {
        internal_energy(spike, 0.5);
        FAIL("expected BadParameter");
    } catch (const Error& e) {
        CHECK(e.code() == Err::BadParameter);
    }

    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        GridMeasure rho = testutil::random_measure(Grid(16), rng, 0.0);
        CHECK(9.0 * internal_energy(rho, 3.0) >= 1.0 - 1e-12);  // m^2 U_m >= 1
        double viaLog = std::exp(log_internal_energy(rho, 3.0));
        CHECK(viaLog == Catch::Approx(internal_energy(rho, 3.0)).epsilon(1e-12));
    }
}

TEST_CASE("u_m second derivative is t^(m-2)", "[functionals]") {
    for (double m : {1.0, 1.5, 2.0, 3.0, 5.0}) {
        for (double t : {0.2, 0.7, 1.0, 2.5, 10.0}) {
            double h = 1e-5 * t;
            double second = (u_m(t + h, m) + u_m(t - h, m) - 2.0 * u_m(t, m)) / (h * h);
            CHECK(second == Catch::Approx(std::pow(t, m - 2.0)).epsilon(1e-5));
        }
    }
}

TEST_CASE("U_m is midpoint convex", "[functionals]") {
    Grid g(16);
    std::mt19937_64 rng(5);
    for (double m : {1.0, 2.0, 3.0, 5.0}) {
        for (int trial = 0; trial < 10; ++trial) {
            GridMeasure a = testutil::random_measure(g, rng, 0.0);
            GridMeasure b = testutil::random_measure(g, rng, 0.0);
            std::vector<double> mid(g.n);
            for (int i = 0; i < g.n; ++i) mid[i] = 0.5 * (a.rho(i) + b.rho(i));
            CHECK(internal_energy(GridMeasure(g, mid), m) <=
                  0.5 * (internal_energy(a, m) + internal_energy(b, m)) + 1e-12);
        }
    }
}

TEST_CASE("congestion energies at reference points", "[functionals]") {
    Grid g2(2), g4(4);
    CHECK(congestion_energy(uniform_measure(g4), congestion_sqrt1p2()) ==
          Catch::Approx(std::sqrt(2.0)).margin(1e-15));
    GridMeasure spike(g2, {2.0, 0.0});
    CHECK(congestion_energy(spike, congestion_um(3.0)) == Catch::Approx(2.0 / 3.0).margin(1e-15));
}

TEST_CASE("shipped congestion functions satisfy their declared classes", "[functionals]") {
    CongestionFunction w = congestion_sqrt1p2();
    CHECK(w.assumption == AssumptionClass::Weak);
    CHECK(w.alpha == -3.0);
    CHECK(w.t0 == 1.0);
    for (const CongestionFunction& f :
         {congestion_um(1.0), congestion_um(2.0), congestion_um(3.0), congestion_sqrt1p2(),
          congestion_sqrt1p4(), congestion_hinge2()}) {
        CHECK_NOTHROW(f.validate());
        CHECK(f.class_violation() <= 1e-9);
    }
    for (double m : {1.0, 2.0, 3.0}) CHECK(congestion_um(m).alpha == m - 2.0);
    for (const CongestionFunction& f :
         {congestion_um(2.0), congestion_sqrt1p2(), congestion_sqrt1p4(), congestion_hinge2()}) {
        for (double t : {0.1, 0.5, 1.0, 2.0, 10.0, 100.0}) CHECK(f.fpp(t) >= 0.0);
    }
}

TEST_CASE("potentials expose discrete norms and the boundary flag", "[functionals]") {
    Grid g(64);
    Potential well = quadratic_well(g);
    CHECK(well.boundary_flag);
    CHECK(well.lap_sup == Catch::Approx(2.0).margin(1e-9));
    CHECK(well.grad_sup <= 1.0 + 1e-12);
    Potential z = zero_potential(g);
    CHECK(z.boundary_flag);
    CHECK(z.lap_sup == 0.0);

    std::vector<double> slope(g.n);
    for (int i = 0; i < g.n; ++i) slope[i] = g.center(i);
    CHECK_FALSE(Potential("x", g, slope).boundary_flag);
}

TEST_CASE("final penalizations evaluate both variants", "[functionals]") {
    Grid g(8);
    GridMeasure uni = uniform_measure(g);
    FinalPenalization gw = GPlusW{congestion_um(2.0), zero_potential(g)};
    CHECK(final_energy(uni, gw, 0.0) == Catch::Approx(0.5).margin(1e-15));

    FinalPenalization pt = PrescribedTarget{uni};
    CHECK(final_energy(uni, pt, 0.0) == 0.0);
    std::mt19937_64 rng(9);
    GridMeasure other = testutil::random_measure(g, rng);
    CHECK(final_energy(other, pt, 0.0) == kInfinity);

    // a non-superlinear congestion term is rejected as a final penalization
    FinalPenalization bad = GPlusW{congestion_sqrt1p2(), zero_potential(g)};
    try {
        validate_final(bad);
        FAIL("expected AssumptionViolated");
    } catch (const Error& e) {
        CHECK(e.code() == Err::AssumptionViolated);
    }
}

static ProblemSpec make_spec(const Grid& g, int N, double lambda, FinalPenalization psi) {
    return ProblemSpec(g, 1.0, N, lambda, uniform_measure(g), congestion_um(2.0),
                       zero_potential(g), std::move(psi));
}

TEST_CASE("discrete action on reference curves", "[functionals]") {
    Grid g(4);
    GridMeasure uni = uniform_measure(g);
    ProblemSpec spec = make_spec(g, 4, 0.0, PrescribedTarget{uni});
    DiscreteCurve flat = constant_curve(uni, 1.0, 4);
    CHECK(discrete_action(flat, spec) == Catch::Approx(0.375).margin(1e-15));

    // one kinetic term: point masses 0.75 apart, tau = 1
    GridMeasure a = testutil::point_column(g, 0);
    GridMeasure b = testutil::point_column(g, 3);
    ProblemSpec one(g, 1.0, 1, 0.0, a, congestion_um(2.0), zero_potential(g),
                    PrescribedTarget{b});
    DiscreteCurve hop(g, 1.0, 1, {a, b});
    CHECK(discrete_action(hop, one) == Catch::Approx(0.28125).margin(1e-15));

    DiscreteCurve wrong = constant_curve(uni, 1.0, 4);
    ProblemSpec off = make_spec(g, 4, 0.0, PrescribedTarget{a});
    CHECK(discrete_action(wrong, off) == kInfinity);

    ProblemSpec shifted(g, 1.0, 4, 0.0, a, congestion_um(2.0), zero_potential(g),
                        PrescribedTarget{uni});
    try {
        discrete_action(flat, shifted);
        FAIL("expected InitialConditionViolated");
    } catch (const Error& e) {
        CHECK(e.code() == Err::InitialConditionViolated);
    }
}

TEST_CASE("lambda_N follows the penalization variant", "[functionals]") {
    Grid g(8);
    ProblemSpec pres = make_spec(g, 2, 0.3, PrescribedTarget{uniform_measure(g)});
    CHECK(pres.lambda_N() == 0.0);
    ProblemSpec gw = make_spec(g, 2, 0.3, GPlusW{congestion_um(2.0), zero_potential(g)});
    CHECK(gw.lambda_N() == 0.3);
}

TEST_CASE("geodesic interpolation reproduces the discrete kinetic sum", "[functionals]") {
    Grid g(16);
    std::mt19937_64 rng(13);
    const int N = 4;
    std::vector<GridMeasure> slices;
    for (int k = 0; k <= N; ++k) slices.push_back(testutil::random_measure(g, rng));
    DiscreteCurve curve(g, 1.0, N, slices);
    const double tau = curve.tau();

    double discrete = 0.0;
    for (int k = 1; k <= N; ++k)
        discrete += w2_squared(curve.slice(k - 1), curve.slice(k)) / (2.0 * tau);

    // refine each geodesic segment; the refined kinetic sum telescopes exactly
    const int M = 8;
    double refined = 0.0;
    for (int k = 0; k < N; ++k) {
        AtomList prev = displacement_interpolate_atoms(curve.slice(k), curve.slice(k + 1), 0.0);
        for (int j = 1; j <= M; ++j) {
            AtomList next = displacement_interpolate_atoms(curve.slice(k), curve.slice(k + 1),
                                                           static_cast<double>(j) / M);
            double d = w2_atoms(prev, next);
            refined += d * d / (2.0 * tau / M);
            prev = next;
        }
    }
    CHECK(refined == Catch::Approx(discrete).margin(1e-8));
}

TEST_CASE("discrete action is convex between curves with common endpoints", "[functionals]") {
    Grid g(8);
    std::mt19937_64 rng(15);
    ProblemSpec spec(g, 1.0, 4, 0.1, testutil::random_measure(g, rng), congestion_um(2.0),
                     quadratic_well(g), GPlusW{congestion_um(2.0), zero_potential(g)});
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<GridMeasure> a{spec.rho0}, b{spec.rho0};
        for (int k = 1; k <= 4; ++k) {
            a.push_back(testutil::random_measure(g, rng));
            b.push_back(testutil::random_measure(g, rng));
        }
        b.back() = a.back();
        DiscreteCurve ca(g, 1.0, 4, a), cb(g, 1.0, 4, b);
        std::vector<GridMeasure> m;
        for (int k = 0; k <= 4; ++k) {
            std::vector<double> v(g.n);
            for (int i = 0; i < g.n; ++i) v[i] = 0.5 * (ca.slice(k).rho(i) + cb.slice(k).rho(i));
            m.push_back(GridMeasure(g, v));
        }
        DiscreteCurve cm(g, 1.0, 4, m);
        CHECK(discrete_action(cm, spec) <=
              0.5 * (discrete_action(ca, spec) + discrete_action(cb, spec)) + 1e-10);
    }
}
