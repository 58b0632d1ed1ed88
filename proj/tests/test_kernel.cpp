#include "oracles.hpp"

#include <chb/errors.hpp>
#include <chb/kernel.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace chb;

TEST(Kernel, SamplesAreEven) {
    const Grid2D g(8, 8, 1.0, 1.0);
    for (const auto& k : {build_gaussian(g, 2.0, 0.2), build_bump(g, 2.0, 0.4)}) {
        for (int j = -7; j <= 7; ++j) {
            for (int i = -7; i <= 7; ++i) {
                EXPECT_EQ(k.sample(i, j), k.sample(-i, -j));
                EXPECT_GE(k.sample(i, j), 0.0);
                EXPECT_EQ(k.grad_sample_x(i, j), -k.grad_sample_x(-i, -j));
            }
        }
    }
}

TEST(Kernel, RejectsBadParameters) {
    const Grid2D g(8, 8, 1.0, 1.0);
    EXPECT_THROW(build_gaussian(g, 1.0, 0.0), ConfigError);
    EXPECT_THROW(build_gaussian(g, -1.0, 0.1), ConfigError);
    EXPECT_THROW(parse_kernel_shape("newton"), ConfigError);
}

TEST(Kernel, ZeroAmplitudeGivesZeroFields) {
    const Grid2D g(8, 8, 1.0, 1.0);
    const Kernel k = build_gaussian(g, 0.0, 0.1);
    std::mt19937_64 rng(5);
    const ScalarField phi = oracle::random_field(g, rng);
    EXPECT_EQ(max_abs(k.convolve(phi)), 0.0);
    EXPECT_EQ(k.convolve_grad(phi).max_abs(), 0.0);
    EXPECT_EQ(max_abs(k.a_field()), 0.0);
}

TEST(Kernel, L1NormMatchesGaussianIntegral) {
    const Grid2D g(128, 128, 1.0, 1.0);
    const double eps = 1.0 / 16.0, amp = 3.0;
    const Kernel k = build_gaussian(g, amp, eps);
    const double exact = amp * std::numbers::pi * eps * eps;
    EXPECT_LT(std::abs(k.l1_norm() - exact) / exact, 0.02);
}

TEST(Kernel, FftMatchesDirectSum) {
    const Grid2D g(16, 16, 1.0, 1.0);
    const Kernel k = build_gaussian(g, 5.0, 0.2);
    std::mt19937_64 rng(6);
    const ScalarField phi = oracle::random_field(g, rng);
    ScalarField err = k.convolve(phi);
    const ScalarField ref = oracle::direct_convolution(phi, oracle::gaussian(5.0, 0.2));
    err -= ref;
    EXPECT_LT(l2_norm(err) / l2_norm(ref), 1e-10);
}

TEST(Kernel, NoPeriodicWrap) {
    // A point source in one corner must not reach the opposite corner more
    // strongly than the true (non-periodic) distance allows.
    const Grid2D g(16, 16, 1.0, 1.0);
    const Kernel k = build_gaussian(g, 1.0, 0.1);
    ScalarField delta(g, 0.0);
    delta(0, 0) = 1.0;
    const ScalarField c = k.convolve(delta);
    const double far = std::exp(-2.0 * std::pow(15 * g.h(), 2) / 0.01) * g.h() * g.h();
    EXPECT_NEAR(c(15, 15), far, 1e-15);
    EXPECT_NEAR(c(15, 0), std::exp(-std::pow(15 * g.h(), 2) / 0.01) * g.h() * g.h(), 1e-15);
}

TEST(Kernel, SelfAdjoint) {
    const Grid2D g(8, 8, 1.0, 1.0);
    const Kernel k = build_gaussian(g, 4.0, 0.3);
    std::mt19937_64 rng(7);
    for (int t = 0; t < 10; ++t) {
        const ScalarField a = oracle::random_field(g, rng), b = oracle::random_field(g, rng);
        EXPECT_NEAR(inner(k.convolve(a), b), inner(a, k.convolve(b)), 1e-12);
    }
}

TEST(Kernel, AFieldIsConvolutionOfOne) {
    const Grid2D g(16, 16, 1.0, 1.0);
    const Kernel k = build_gaussian(g, 2.0, 0.25);
    const ScalarField a = k.a_field();
    const ScalarField c1 = k.convolve(ScalarField(g, 1.0));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], c1[i], 1e-13);
    const ScalarField ref = oracle::direct_convolution(ScalarField(g, 1.0), oracle::gaussian(2.0, 0.25));
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], ref[i], 1e-12);
    // Maximal in the middle, smallest in the corners.
    EXPECT_GT(a(7, 7), a(0, 7));
    EXPECT_GT(a(0, 7), a(0, 0));
    EXPECT_NEAR(a(0, 0), a(15, 15), 1e-12);
}

TEST(Kernel, ConvolveGradConsistentWithDifferencedConvolution) {
    auto max_diff = [](int n) {
        const Grid2D g(n, n, 1.0, 1.0);
        const Kernel k = build_gaussian(g, 1.0, 0.15);
        const ScalarField phi = ScalarField::from_function(
            g, [](double x, double y) { return std::cos(std::numbers::pi * x) * std::sin(2.0 * y); });
        StaggeredVectorField d = grad_cc_to_face(k.convolve(phi));
        d -= k.convolve_grad(phi);
        d.zero_boundary();
        return d.max_abs();
    };
    const double e32 = max_diff(32), e64 = max_diff(64), e128 = max_diff(128);
    EXPECT_NEAR(e32 / e64, 4.0, 0.8);
    EXPECT_NEAR(e64 / e128, 4.0, 0.8);
}

TEST(Kernel, GridMismatchThrows) {
    const Kernel k = build_gaussian(Grid2D(8, 8, 1.0, 1.0), 1.0, 0.1);
    EXPECT_THROW(k.convolve(ScalarField(Grid2D(16, 16, 1.0, 1.0), 1.0)), GridMismatch);
}
