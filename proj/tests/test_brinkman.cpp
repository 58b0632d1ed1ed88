#include "oracles.hpp"

#include <chb/brinkman.hpp>
#include <chb/errors.hpp>
#include <chb/mms.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace chb;

namespace {

StaggeredVectorField random_force(const Grid2D& g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d(-1, 1);
    StaggeredVectorField f(g);
    for (auto& v : f.xs()) v = d(rng);
    for (auto& v : f.ys()) v = d(rng);
    f.zero_boundary();
    return f;
}

BrinkmanProblem random_problem(const Grid2D& g, std::mt19937_64& rng) {
    const ScalarField phi = oracle::random_field(g, rng, -0.9, 0.9);
    return {viscosity_of_phi(phi, 1.0, 3.0), ScalarField(g, 0.5), random_force(g, rng)};
}

} // namespace

TEST(Viscosity, AffineLaw) {
    const Grid2D g(4, 4, 1.0, 1.0);
    EXPECT_EQ(viscosity_of_phi(ScalarField(g, -1.0), 1.0, 3.0)[0], 1.0);
    EXPECT_EQ(viscosity_of_phi(ScalarField(g, 1.0), 1.0, 3.0)[0], 3.0);
    EXPECT_EQ(viscosity_of_phi(ScalarField(g, 5.0), 1.0, 3.0)[0], 3.0);
    EXPECT_EQ(viscosity_of_phi(ScalarField(g, 0.3), 2.0, 2.0)[5], 2.0);
    EXPECT_THROW(viscosity_of_phi(ScalarField(g, 0.0), 0.0, 1.0), ConfigError);
    // Lipschitz constant (nu1 - nu0)/2 by finite-difference scan.
    double slope = 0.0;
    for (int k = 0; k < 400; ++k) {
        const double s0 = -1.2 + 2.4 * k / 400.0, s1 = s0 + 2.4 / 400.0;
        const double v0 = viscosity_of_phi(ScalarField(g, s0), 1.0, 3.0)[0];
        const double v1 = viscosity_of_phi(ScalarField(g, s1), 1.0, 3.0)[0];
        slope = std::max(slope, std::abs(v1 - v0) / (s1 - s0));
    }
    EXPECT_NEAR(slope, 1.0, 1e-9);
}

TEST(Forcing, Examples) {
    const Grid2D g(8, 8, 1.0, 1.0);
    std::mt19937_64 rng(21);
    const StaggeredVectorField h = random_force(g, rng);
    EXPECT_EQ(assemble_forcing(ScalarField(g, 2.0), ScalarField(g, 0.3), StaggeredVectorField(g)).max_abs(), 0.0);
    StaggeredVectorField d = assemble_forcing(ScalarField(g, 2.0), ScalarField(g, 0.3), h);
    d -= h;
    EXPECT_EQ(d.max_abs(), 0.0);

    const ScalarField mu = oracle::random_field(g, rng), phi = oracle::random_field(g, rng);
    const StaggeredVectorField f = assemble_forcing(mu, phi, h);
    const StaggeredVectorField gp = grad_cc_to_face(phi);
    for (int j = 0; j < 8; ++j) {
        for (int i = 1; i < 8; ++i) EXPECT_NEAR(f.x(i, j), 0.5 * (mu(i - 1, j) + mu(i, j)) * gp.x(i, j) + h.x(i, j), 1e-14);
    }
    for (int j = 1; j < 8; ++j) {
        for (int i = 0; i < 8; ++i) EXPECT_NEAR(f.y(i, j), 0.5 * (mu(i, j - 1) + mu(i, j)) * gp.y(i, j) + h.y(i, j), 1e-14);
    }
    EXPECT_THROW(assemble_forcing(mu, ScalarField(Grid2D(4, 4, 1.0, 1.0)), h), GridMismatch);
}

TEST(BodyForce, VortexIsDivergenceFreeAndVanishesOnWalls) {
    const Grid2D g(16, 16, 1.0, 1.0);
    const auto f = body_force(g, BodyForce::Vortex, 1.0, 0.0, 0.0);
    EXPECT_EQ(f.boundary_max_abs(), 0.0);
    EXPECT_GT(f.max_abs(), 0.1);
    EXPECT_THROW(parse_body_force("gravity"), ConfigError);
}

TEST(Brinkman, ZeroForcingGivesZeroSolution) {
    const Grid2D g(16, 16, 1.0, 1.0);
    const BrinkmanProblem prob{ScalarField(g, 1.0), ScalarField(g, 1.0), StaggeredVectorField(g)};
    const FlowSolution sol = solve(prob, 1e-10);
    EXPECT_EQ(sol.u.max_abs(), 0.0);
    EXPECT_EQ(max_abs(sol.pi), 0.0);
}

TEST(Brinkman, PureGradientForcingIsAbsorbedByPressure) {
    const Grid2D g(24, 24, 1.0, 1.0);
    const ScalarField psi =
        ScalarField::from_function(g, [](double x, double y) { return std::sin(3 * x) * std::cos(2 * y) + x * y; });
    std::mt19937_64 rng(22);
    const BrinkmanProblem prob{viscosity_of_phi(oracle::random_field(g, rng), 1.0, 2.0), ScalarField(g, 1.0),
                               grad_cc_to_face(psi)};
    const double tol = 1e-9;
    const FlowSolution sol = solve(prob, tol);
    EXPECT_LE(sol.u.max_abs(), 10 * tol);
    const double pm = mean(psi);
    for (std::size_t k = 0; k < psi.size(); ++k) EXPECT_NEAR(sol.pi[k], psi[k] - pm, 1e-7);
    EXPECT_NEAR(mean(sol.pi), 0.0, 1e-14);
}

TEST(Brinkman, SolutionMeetsTolerances) {
    const Grid2D g(32, 32, 1.0, 1.0);
    std::mt19937_64 rng(23);
    for (auto form : {ViscousForm::DivGrad, ViscousForm::SymGrad}) {
        const BrinkmanProblem prob = random_problem(g, rng);
        const double tol = 1e-8;
        const FlowSolution sol = solve(prob, tol, form);
        EXPECT_LE(sol.div_max, tol);
        EXPECT_LE(max_abs(div_face_to_cc(sol.u)), tol);
        EXPECT_LE(sol.residual, tol);
        EXPECT_EQ(sol.u.boundary_max_abs(), 0.0);
        EXPECT_NEAR(mean(sol.pi), 0.0, 1e-12);
    }
}

TEST(Brinkman, EnergyCheck) {
    const Grid2D g(32, 32, 1.0, 1.0);
    std::mt19937_64 rng(24);
    const BrinkmanProblem zero{ScalarField(g, 1.0), ScalarField(g, 1.0), StaggeredVectorField(g)};
    const auto e0 = energy_check(zero, solve(zero, 1e-10));
    EXPECT_EQ(e0.lhs, 0.0);
    EXPECT_EQ(e0.rhs, 0.0);

    BrinkmanProblem prob = random_problem(g, rng);
    const FlowSolution s1 = solve(prob, 1e-10);
    const auto e1 = energy_check(prob, s1);
    EXPECT_GT(e1.lhs, 0.0);
    EXPECT_LE(e1.lhs, e1.rhs + 1e-6);

    prob.force *= 2.0;
    const FlowSolution s2 = solve(prob, 1e-10);
    const auto e2 = energy_check(prob, s2);
    StaggeredVectorField d = s2.u;
    StaggeredVectorField twice = s1.u;
    twice *= 2.0;
    d -= twice;
    EXPECT_LE(d.max_abs(), 1e-8 * std::max(1.0, s2.u.max_abs()));
    EXPECT_NEAR(e2.lhs / e1.lhs, 4.0, 1e-6);
}

TEST(Brinkman, Superposition) {
    const Grid2D g(24, 24, 1.0, 1.0);
    std::mt19937_64 rng(25);
    const double tol = 1e-10;
    for (int trial = 0; trial < 3; ++trial) {
        BrinkmanProblem p1 = random_problem(g, rng);
        BrinkmanProblem p2 = p1;
        p2.force = random_force(g, rng);
        BrinkmanProblem p12 = p1;
        p12.force += p2.force;
        StaggeredVectorField d = solve(p12, tol).u;
        d -= solve(p1, tol).u;
        d -= solve(p2, tol).u;
        EXPECT_LE(d.max_abs(), 10 * tol * std::max(1.0, solve(p12, tol).u.max_abs()));
    }
}

TEST(Brinkman, KornTypeBoundStableUnderRefinement) {
    // ||u||_H1 / (||grad phi|| + ||h||) for the same continuous data on three grids.
    std::vector<double> ratios;
    for (int n : {32, 64, 128}) {
        const Grid2D g(n, n, 1.0, 1.0);
        const ScalarField phi = ScalarField::from_function(
            g, [](double x, double y) { return 0.6 * std::tanh(4 * (x - 0.5)) * std::cos(3 * y); });
        const ScalarField mu = map(phi, [](double v) { return 5.0 * v * v * v - v; });
        const StaggeredVectorField h = body_force(g, BodyForce::Vortex, 0.5, 0.0, 0.0);
        const BrinkmanProblem prob{viscosity_of_phi(phi, 1.0, 2.0), ScalarField(g, 1.0), assemble_forcing(mu, phi, h)};
        const FlowSolution sol = solve(prob, 1e-10);
        const double u_h1 = std::sqrt(velocity_gradient_sq(sol.u) + inner(sol.u, sol.u));
        ratios.push_back(u_h1 / (l2_norm(grad_cc_to_face(phi)) + l2_norm(h)));
    }
    for (double r : ratios) {
        EXPECT_GT(r, 0.0);
        EXPECT_LT(std::abs(r / ratios.front() - 1.0), 0.2);
    }
}

TEST(Brinkman, FactorizationIsReusedWhileCoefficientsAreUnchanged) {
    const Grid2D g(16, 16, 1.0, 1.0);
    std::mt19937_64 rng(26);
    BrinkmanProblem prob = random_problem(g, rng);
    BrinkmanSolver solver;
    BrinkmanOptions opts;
    solver.solve(prob, opts);
    prob.force = random_force(g, rng);
    const FlowSolution warm = solver.solve(prob, opts);
    EXPECT_EQ(solver.factorizations(), 1);
    const FlowSolution again = solver.solve(prob, opts, &warm.pi);
    EXPECT_LE(again.iterations, 1);
    prob.nu = viscosity_of_phi(oracle::random_field(g, rng), 1.0, 3.0);
    solver.solve(prob, opts);
    EXPECT_EQ(solver.factorizations(), 2);
}

TEST(Brinkman, InvalidCoefficientsThrow) {
    const Grid2D g(8, 8, 1.0, 1.0);
    EXPECT_THROW(solve({ScalarField(g, 0.0), ScalarField(g, 1.0), StaggeredVectorField(g)}, 1e-8), ConfigError);
    EXPECT_THROW(solve({ScalarField(g, 1.0), ScalarField(g, -1.0), StaggeredVectorField(g)}, 1e-8), ConfigError);
}

TEST(Brinkman, NonConvergenceReportsTrace) {
    const Grid2D g(32, 32, 1.0, 1.0);
    std::mt19937_64 rng(27);
    const BrinkmanProblem prob = random_problem(g, rng);
    BrinkmanSolver solver;
    BrinkmanOptions opts;
    opts.tol = 1e-12;
    opts.max_iter = 1;
    try {
        solver.solve(prob, opts);
        FAIL() << "expected SolverError";
    } catch (const SolverError& e) {
        EXPECT_NE(std::string(e.what()).find("trace"), std::string::npos);
    }
}

TEST(BrinkmanMms, SecondOrderVelocity) {
    for (auto form : {ViscousForm::DivGrad, ViscousForm::SymGrad}) {
        const double e32 = brinkman_mms_error(32, form), e64 = brinkman_mms_error(64, form);
        EXPECT_GE(e32 / e64, 3.2);
        EXPECT_LE(e32 / e64, 4.8);
    }
}
