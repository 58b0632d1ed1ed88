#include "oracles.hpp"

#include <chb/chsolver.hpp>
#include <chb/errors.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace chb;

namespace {

MaterialModel validated(Potential p, Mobility m, double a_min, double a_max, double theta_c = 0.0) {
    MaterialModel model;
    model.potential.variant = p;
    model.potential.theta_c = theta_c;
    model.mobility.variant = m;
    return with_measured_constants(model, validate_assumptions(model, a_min, a_max, 4000));
}

StaggeredVectorField random_div_free(const Grid2D& g, std::mt19937_64& rng, double amp) {
    // u = curl of a random nodal stream function vanishing on the walls.
    std::uniform_real_distribution<double> d(-1, 1);
    std::vector<double> psi(static_cast<std::size_t>(g.nx() + 1) * (g.ny() + 1), 0.0);
    auto P = [&](int i, int j) -> double& { return psi[static_cast<std::size_t>(j) * (g.nx() + 1) + i]; };
    for (int j = 1; j < g.ny(); ++j) {
        for (int i = 1; i < g.nx(); ++i) P(i, j) = amp * d(rng);
    }
    StaggeredVectorField u(g);
    for (int j = 0; j < g.ny(); ++j) {
        for (int i = 0; i <= g.nx(); ++i) u.x(i, j) = (P(i, j + 1) - P(i, j)) / g.h();
    }
    for (int j = 0; j <= g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) u.y(i, j) = -(P(i + 1, j) - P(i, j)) / g.h();
    }
    return u;
}

} // namespace

TEST(ChemicalPotential, ConstantStateGivesFPrime) {
    const Grid2D g(16, 16, 1.0, 1.0);
    const Kernel k = build_gaussian(g, 20.0, 0.2);
    const auto model = validated(Potential::Logarithmic, Mobility::DegenerateQuadratic, 0.0, 100.0);
    const ScalarField mu = chemical_potential(ScalarField(g, 0.3), k, model);
    for (double v : mu.values()) EXPECT_NEAR(v, f_prime(model, 0.3), 1e-13);
    EXPECT_EQ(max_abs(chemical_potential(ScalarField(g, 0.0), k, model)), 0.0);
}

TEST(ChemicalPotential, MatchesTermByTermOracle) {
    const Grid2D g(8, 8, 1.0, 1.0);
    const Kernel k = build_gaussian(g, 7.0, 0.3);
    const auto model = validated(Potential::Logarithmic, Mobility::DegenerateQuadratic, 0.0, 100.0);
    std::mt19937_64 rng(11);
    const ScalarField phi = oracle::random_field(g, rng, -0.9, 0.9);
    const ScalarField a = oracle::direct_convolution(ScalarField(g, 1.0), oracle::gaussian(7.0, 0.3));
    const ScalarField jphi = oracle::direct_convolution(phi, oracle::gaussian(7.0, 0.3));
    const ScalarField mu = chemical_potential(phi, k, model);
    for (std::size_t c = 0; c < phi.size(); ++c) {
        EXPECT_NEAR(mu[c], a[c] * phi[c] - jphi[c] + f_prime(model, phi[c]), 1e-12);
    }
}

TEST(Flux, ConstantStateHasZeroFlux) {
    const Grid2D g(16, 16, 1.0, 1.0);
    const Kernel k = build_gaussian(g, 20.0, 0.2);
    const auto model = validated(Potential::Logarithmic, Mobility::DegenerateQuadratic, 0.0, 100.0);
    EXPECT_EQ(regularized_flux(ScalarField(g, -0.4), StaggeredVectorField(g), k, model).max_abs(), 0.0);
}

TEST(Flux, ChainRuleWithoutKernel) {
    // Constant mobility, zero kernel: flux = F''(phi) grad phi ~ grad F'(phi).
    auto err = [](int n) {
        const Grid2D g(n, n, 1.0, 1.0);
        const Kernel k = build_gaussian(g, 0.0, 0.1);
        MaterialModel model;
        model.mobility.variant = Mobility::Constant;
        model.alpha1 = 2.0;
        const ScalarField phi = ScalarField::from_function(
            g, [](double x, double y) { return 0.6 * std::sin(2.0 * x + 0.5) * std::cos(1.5 * y); });
        StaggeredVectorField d = regularized_flux(phi, StaggeredVectorField(g), k, model);
        d -= grad_cc_to_face(map(phi, [&](double r) { return f_prime(model, r); }));
        return d.max_abs();
    };
    const double e32 = err(32), e64 = err(64);
    EXPECT_LT(e64, 1e-3);
    EXPECT_NEAR(e32 / e64, 4.0, 0.8);
}

TEST(Flux, RegularizedFormMatchesMobilityTimesGradMu) {
    auto err = [](int n) {
        const Grid2D g(n, n, 1.0, 1.0);
        const Kernel k = build_gaussian(g, 10.0, 0.2);
        const ScalarField a = k.a_field();
        const auto model = validated(Potential::Logarithmic, Mobility::DegenerateQuadratic, 0.0, max_abs(a));
        const ScalarField phi = ScalarField::from_function(
            g, [](double x, double y) { return 0.8 * std::sin(2.5 * x + 0.3) * std::cos(2.0 * y - 0.2); });
        StaggeredVectorField d = regularized_flux(phi, StaggeredVectorField(g), k, model);
        d -= hadamard(face_average(map(phi, [&](double r) { return mobility(model, r); })),
                      grad_cc_to_face(chemical_potential(phi, k, model)));
        return d.max_abs();
    };
    const double e32 = err(32), e64 = err(64), e128 = err(128);
    EXPECT_NEAR(e32 / e64, 4.0, 0.8);
    EXPECT_NEAR(e64 / e128, 4.0, 0.8);
}

TEST(Flux, RejectsUnvalidatedModel) {
    const Grid2D g(8, 8, 1.0, 1.0);
    const Kernel k = build_gaussian(g, 0.0, 0.1);
    MaterialModel model; // alpha1 = 0: never validated
    EXPECT_THROW(regularized_flux(ScalarField(g, 0.1), StaggeredVectorField(g), k, model), AssumptionError);
}

TEST(Flux, CoefficientBelowAlpha1IsAnAssumptionError) {
    const Grid2D g(8, 8, 1.0, 1.0);
    const Kernel k = build_gaussian(g, 0.0, 0.1);
    MaterialModel model;
    model.potential.theta_c = 1.0; // lowers m(F''+a) below the claimed alpha1
    model.alpha1 = 2.0;
    EXPECT_THROW(regularized_flux(ScalarField(g, 0.1), StaggeredVectorField(g), k, model), AssumptionError);
}

TEST(Step, ConstantStateIsSteady) {
    const Grid2D g(16, 16, 1.0, 1.0);
    const Kernel k = build_gaussian(g, 50.0, 0.15);
    for (auto p : {Potential::Logarithmic, Potential::FloryType}) {
        for (auto m : {Mobility::DegenerateQuadratic, Mobility::LogisticCorrected, Mobility::Constant}) {
            MaterialModel model;
            model.potential.variant = p;
            model.mobility.variant = m;
            model.alpha1 = 1e-3;
            const double c = p == Potential::Logarithmic ? 0.2 : 0.6;
            StepControl ctl;
            ctl.dt = 0.01;
            ChState st{ScalarField(g, c), 0.0};
            for (int s = 0; s < 20; ++s) st = step(st, StaggeredVectorField(g), k, model, ctl);
            EXPECT_EQ(max_abs(map(st.phi, [c](double v) { return v - c; })), 0.0);
            EXPECT_NEAR(st.t, 0.2, 1e-14);
        }
    }
}

TEST(Step, ConservesMassWithFlowAndKernel) {
    const Grid2D g(32, 32, 1.0, 1.0);
    const Kernel k = build_gaussian(g, 30.0, 0.15);
    const auto model = validated(Potential::Logarithmic, Mobility::DegenerateQuadratic, 0.0, max_abs(k.a_field()));
    std::mt19937_64 rng(12);
    const StaggeredVectorField u = random_div_free(g, rng, 0.01);
    EXPECT_LT(max_abs(div_face_to_cc(u)), 1e-12);
    ChState st{oracle::smooth_random_field(g, rng, 0.1, 0.5), 0.0};
    const double m0 = integrate(st.phi);
    StepControl ctl;
    ctl.dt = 1e-3;
    for (int s = 0; s < 100; ++s) {
        st = step(st, u, k, model, ctl);
        ASSERT_LE(std::abs(integrate(st.phi) - m0) / std::abs(m0 + 1.0), 1e-12) << "step " << s;
    }
}

TEST(Step, EnergyTypeInequality) {
    // 1/2||phi^{n+1}||^2 - 1/2||phi^n||^2 + dt alpha1/2 ||grad phi^{n+1}||^2 <= dt C_meas
    const Grid2D g(32, 32, 1.0, 1.0);
    const Kernel k = build_gaussian(g, 20.0, 0.2);
    const auto model = validated(Potential::Logarithmic, Mobility::DegenerateQuadratic, 0.0, max_abs(k.a_field()));
    // Young's inequality on m (phi grad a - grad J * phi) . grad phi with |phi| <= 1, m <= 1.
    const double K = 1.0 * (k.grad_a_sup() + k.grad_l1_norm()) * std::sqrt(g.area());
    const double C = K * K / (2.0 * model.alpha1);
    std::mt19937_64 rng(13);
    ChState st{oracle::smooth_random_field(g, rng, 0.0, 0.7), 0.0};
    StepControl ctl;
    ctl.dt = 1e-3;
    for (int s = 0; s < 50; ++s) {
        const ChState nx = step(st, StaggeredVectorField(g), k, model, ctl);
        const double lhs = 0.5 * inner(nx.phi, nx.phi) - 0.5 * inner(st.phi, st.phi) +
                           ctl.dt * 0.5 * model.alpha1 * std::pow(l2_norm(grad_cc_to_face(nx.phi)), 2);
        EXPECT_LE(lhs, ctl.dt * C);
        st = nx;
    }
}

TEST(Step, CentralTransportIsSkewSymmetric) {
    const Grid2D g(24, 24, 1.0, 1.0);
    std::mt19937_64 rng(14);
    const StaggeredVectorField u = random_div_free(g, rng, 0.05);
    const ScalarField phi = oracle::random_field(g, rng, -0.5, 0.5);
    const double s = inner(div_face_to_cc(transport_flux(phi, u, Transport::Central)), phi);
    EXPECT_NEAR(s, 0.0, 1e-12);
}

TEST(Step, GuardBandViolationThrows) {
    const Grid2D g(8, 8, 1.0, 1.0);
    const Kernel k = build_gaussian(g, 0.0, 0.1);
    const auto model = validated(Potential::Logarithmic, Mobility::DegenerateQuadratic, 0.0, 0.0);
    ScalarField phi(g, 0.0);
    phi(0, 0) = 0.99;
    // A strong uniform source lifts every cell to the pure phase; diffusion cannot spread it away.
    StepOptions opts;
    opts.source = [&](double) { return ScalarField(g, 100.0); };
    StepControl ctl;
    ctl.dt = 0.01;
    EXPECT_THROW(step(ChState{phi, 0.0}, StaggeredVectorField(g), k, model, ctl, opts), GuardBandError);
}

TEST(AdaptDt, Examples) {
    StepControl ctl;
    ctl.dt_min = 1e-4;
    ctl.dt_max = 1e-2;
    ctl.dt = ctl.dt_max;
    for (int s = 0; s < 10; ++s) ctl = adapt_dt(ctl, StepOutcome::Success);
    EXPECT_EQ(ctl.dt, ctl.dt_max);

    ctl.dt = 2 * ctl.dt_min;
    ctl = adapt_dt(ctl, StepOutcome::GuardBand);
    EXPECT_EQ(ctl.dt, ctl.dt_min);
    EXPECT_THROW(adapt_dt(ctl, StepOutcome::GuardBand), AbortRun);

    ctl.dt = 1e-3;
    for (int s = 0; s < 9; ++s) ctl = adapt_dt(ctl, StepOutcome::Success);
    EXPECT_EQ(ctl.dt, 1e-3);
    ctl = adapt_dt(ctl, StepOutcome::Success);
    EXPECT_EQ(ctl.dt, 2e-3);
}

TEST(AdaptDt, ValidatesControl) {
    StepControl ctl;
    ctl.dt = 1.0;
    ctl.dt_max = 0.1;
    EXPECT_THROW(validate_step_control(ctl), ConfigError);
}
