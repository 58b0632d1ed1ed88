#include "oracles.hpp"

#include <chb/errors.hpp>
#include <chb/material.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace chb;

namespace {

MaterialModel make(Potential p, Mobility m, double theta = 1.0) {
    MaterialModel model;
    model.potential.variant = p;
    model.potential.theta = theta;
    model.mobility.variant = m;
    return model;
}

const MaterialModel kLogDeg = make(Potential::Logarithmic, Mobility::DegenerateQuadratic);

} // namespace

TEST(Potential, FirstDerivativeExamples) {
    EXPECT_EQ(f_prime(kLogDeg, 0.0), 0.0);
    EXPECT_NEAR(f_prime(kLogDeg, 0.5), std::log(3.0), 1e-15);
    const auto flory = make(Potential::FloryType, Mobility::LogisticCorrected);
    EXPECT_NEAR(f_prime(flory, 0.5), 0.0, 1e-15);
}

TEST(Potential, SecondDerivativeExamples) {
    EXPECT_NEAR(f_double_prime(kLogDeg, 0.0), 2.0, 1e-15);
    EXPECT_NEAR(f_double_prime(kLogDeg, 0.5), 8.0 / 3.0, 1e-14);
}

TEST(Potential, DerivativesMatchFiniteDifferences) {
    for (auto p : {Potential::Logarithmic, Potential::FloryType}) {
        auto model = make(p, Mobility::DegenerateQuadratic, 1.3);
        model.potential.theta_c = 2.0;
        const double lo = model.potential.lo(), hi = model.potential.hi();
        for (int k = 1; k < 20; ++k) {
            const double r = lo + (hi - lo) * k / 20.0;
            const double d1 = oracle::derivative([&](double x) { return f_value(model, x); }, r);
            const double d2 = oracle::derivative([&](double x) { return f_prime(model, x); }, r);
            EXPECT_NEAR(f_prime(model, r), d1, 1e-6 * (1 + std::abs(d1))) << r;
            EXPECT_NEAR(f_double_prime(model, r), d2, 1e-5 * (1 + std::abs(d2))) << r;
        }
    }
}

TEST(Potential, SymmetryOfLogPotential) {
    for (double r : {0.1, 0.3, 0.77, 0.999}) {
        EXPECT_NEAR(f_prime(kLogDeg, -r), -f_prime(kLogDeg, r), 1e-13);
        EXPECT_NEAR(f_double_prime(kLogDeg, -r), f_double_prime(kLogDeg, r), 1e-9 * f_double_prime(kLogDeg, r));
    }
}

TEST(Potential, DomainErrorsAtEndpoints) {
    EXPECT_THROW(f_prime(kLogDeg, 1.0), DomainError);
    EXPECT_THROW(f_prime(kLogDeg, -1.0), DomainError);
    EXPECT_THROW(f_double_prime(kLogDeg, 1.5), DomainError);
    const auto flory = make(Potential::FloryType, Mobility::LogisticCorrected);
    EXPECT_THROW(f_prime(flory, 0.0), DomainError);
    EXPECT_THROW(entropy_m(kLogDeg, 1.0), DomainError);
}

TEST(Potential, BlowUpAtEndpoints) {
    EXPECT_GT(f_prime(kLogDeg, 1.0 - 1e-12), 25.0);
    EXPECT_LT(f_prime(kLogDeg, -1.0 + 1e-12), -25.0);
}

TEST(Lambda, Examples) {
    for (double r : {-1.0, -0.5, 0.0, 0.3, 1.0}) EXPECT_DOUBLE_EQ(lambda(kLogDeg, r), 2.0);
    const auto constant = make(Potential::Logarithmic, Mobility::Constant);
    EXPECT_NEAR(lambda(constant, 0.5), 8.0 / 3.0, 1e-14);
}

TEST(Lambda, EqualsMobilityTimesSecondDerivativeInside) {
    for (auto p : {Potential::Logarithmic, Potential::FloryType}) {
        for (auto m : {Mobility::DegenerateQuadratic, Mobility::ReciprocalLogistic, Mobility::LogisticCorrected,
                       Mobility::Constant}) {
            const auto model = make(p, m, 0.8);
            const double lo = model.potential.lo(), hi = model.potential.hi();
            for (int k = 1; k < 10; ++k) {
                const double r = lo + (hi - lo) * k / 10.0;
                const double expect = mobility(model, r) * f1_double_prime(model, r);
                if (std::isinf(expect)) {
                    EXPECT_EQ(lambda(model, r), expect); // pole of the mobility
                } else {
                    EXPECT_NEAR(lambda(model, r), expect, 1e-12 * std::abs(expect));
                }
            }
        }
    }
}

TEST(Entropy, Examples) {
    EXPECT_EQ(entropy_m(kLogDeg, 0.0), 0.0);
    EXPECT_EQ(entropy_m_prime(kLogDeg, 0.0), 0.0);
    EXPECT_NEAR(entropy_m(kLogDeg, 0.5), 0.130812, 1e-6);
    for (double r : {-0.9, -0.5, 0.0, 0.5, 0.9}) {
        EXPECT_NEAR(mobility(kLogDeg, r) * entropy_m_dprime(kLogDeg, r), 1.0, 1e-12);
    }
}

TEST(Entropy, DerivativeChainMatchesFiniteDifferences) {
    for (auto m : {Mobility::DegenerateQuadratic, Mobility::Constant}) {
        const auto model = make(Potential::Logarithmic, m);
        for (double r : {-0.7, -0.2, 0.1, 0.6}) {
            EXPECT_NEAR(entropy_m_prime(model, r), oracle::derivative([&](double x) { return entropy_m(model, x); }, r),
                        1e-8);
            EXPECT_NEAR(entropy_m_dprime(model, r),
                        oracle::derivative([&](double x) { return entropy_m_prime(model, x); }, r), 1e-7);
            EXPECT_NEAR(entropy_m_tprime(model, r),
                        oracle::derivative([&](double x) { return entropy_m_dprime(model, x); }, r), 1e-6);
        }
    }
    const auto flory = make(Potential::FloryType, Mobility::LogisticCorrected);
    EXPECT_EQ(entropy_m(flory, 0.5), 0.0);
    EXPECT_EQ(entropy_m_prime(flory, 0.5), 0.0);
}

TEST(Validation, LogDegeneratePassesWithAlphaTwo) {
    const auto rep = validate_assumptions(kLogDeg, 0.0, 0.0);
    EXPECT_TRUE(rep.ok()) << rep.failures();
    EXPECT_NEAR(rep.alpha0, 2.0, 1e-9);
    EXPECT_NEAR(rep.alpha1, 2.0, 1e-9);
    EXPECT_GT(rep.eps0, 0.0);
}

TEST(Validation, LogConstantMeasuresAlphaTwoButIsNotDegenerate) {
    // F'' >= 2 gives alpha0 = alpha1 = 2, but a constant mobility neither
    // vanishes at the pure phases nor keeps lambda bounded.
    const auto rep = validate_assumptions(make(Potential::Logarithmic, Mobility::Constant), 0.0, 0.0);
    EXPECT_NEAR(rep.alpha0, 2.0, 1e-9);
    EXPECT_NEAR(rep.alpha1, 2.0, 1e-9);
    EXPECT_FALSE(rep.check("A1").pass);
    EXPECT_FALSE(rep.check("A2").pass);
    EXPECT_TRUE(rep.check("A3").pass);
    EXPECT_TRUE(rep.check("A4").pass);
}

TEST(Validation, FloryReciprocalFailsA2AndSaysSo) {
    const auto rep = validate_assumptions(make(Potential::FloryType, Mobility::ReciprocalLogistic), 0.0, 0.0);
    EXPECT_FALSE(rep.ok());
    EXPECT_FALSE(rep.check("A2").pass);
    EXPECT_NE(rep.failures().find("A2"), std::string::npos);
}

TEST(Validation, FloryLogisticPasses) {
    const auto rep = validate_assumptions(make(Potential::FloryType, Mobility::LogisticCorrected), 0.0, 0.0);
    EXPECT_TRUE(rep.ok()) << rep.failures();
    EXPECT_NEAR(rep.alpha0, 1.0, 1e-9);
}

TEST(Validation, ConcavePartLowersAlpha1) {
    auto model = kLogDeg;
    model.potential.theta_c = 4.7;
    EXPECT_FALSE(validate_assumptions(model, 0.0, 0.0).check("A4").pass);
    const auto rep = validate_assumptions(model, 21.0, 21.0);
    EXPECT_TRUE(rep.ok()) << rep.failures();
    EXPECT_NEAR(rep.alpha1, 2.0, 1e-9);
}

TEST(Validation, BadKernelRangeThrows) { EXPECT_THROW(validate_assumptions(kLogDeg, 1.0, 0.0), ConfigError); }

TEST(Transform, Examples) {
    const Grid2D g(4, 4, 1.0, 1.0);
    const auto psi = transform_to_symmetric(ScalarField(g, 0.5));
    EXPECT_EQ(max_abs(psi), 0.0);
    EXPECT_NEAR(transform_to_symmetric(ScalarField(g, 0.9))[0], 0.8, 1e-15);
    EXPECT_NEAR(transform_from_symmetric(ScalarField(g, 0.8))[3], 0.9, 1e-15);
    EXPECT_THROW(transform_to_symmetric(ScalarField(g, 1.0)), DomainError);
    EXPECT_THROW(transform_from_symmetric(ScalarField(g, -1.0)), DomainError);
}

TEST(Parsing, NamesRoundTrip) {
    EXPECT_EQ(parse_potential("log"), Potential::Logarithmic);
    EXPECT_EQ(parse_mobility("reciprocal"), Mobility::ReciprocalLogistic);
    EXPECT_THROW(parse_potential("quartic"), ConfigError);
    EXPECT_THROW(parse_mobility("fast"), ConfigError);
}
