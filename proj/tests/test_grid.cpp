#include "oracles.hpp"

#include <chb/errors.hpp>
#include <chb/field_io.hpp>
#include <chb/grid.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

using namespace chb;

TEST(Grid, RejectsBadShapes) {
    EXPECT_THROW(Grid2D(3, 8, 1.0, 1.0), ConfigError);
    EXPECT_THROW(Grid2D(8, 8, 0.0, 1.0), ConfigError);
    EXPECT_THROW(Grid2D(8, 16, 1.0, 1.0), ConfigError); // non-square cells
    EXPECT_NO_THROW(Grid2D(8, 16, 1.0, 2.0));
}

TEST(Grid, IntegrateExamples) {
    const Grid2D g16(16, 16, 1.0, 1.0);
    EXPECT_DOUBLE_EQ(integrate(ScalarField(g16, 1.0)), 1.0);
    const Grid2D g(8, 4, 2.0, 1.0);
    EXPECT_NEAR(integrate(ScalarField(g, 3.5)), 3.5 * 2.0, 1e-14);
    const Grid2D g32(32, 32, 1.0, 1.0);
    const auto x = ScalarField::from_function(g32, [](double x, double) { return x; });
    EXPECT_NEAR(integrate(x), 0.5, 1e-15);
}

TEST(Grid, GradientExamples) {
    const Grid2D g(8, 8, 1.0, 1.0);
    const auto gc = grad_cc_to_face(ScalarField(g, 2.0));
    EXPECT_EQ(gc.max_abs(), 0.0);
    const auto gx = grad_cc_to_face(ScalarField::from_function(g, [](double x, double) { return x; }));
    for (int j = 0; j < g.ny(); ++j) {
        EXPECT_EQ(gx.x(0, j), 0.0);
        EXPECT_EQ(gx.x(g.nx(), j), 0.0);
        for (int i = 1; i < g.nx(); ++i) EXPECT_NEAR(gx.x(i, j), 1.0, 1e-12);
    }
    for (int j = 0; j <= g.ny(); ++j) {
        for (int i = 0; i < g.nx(); ++i) EXPECT_NEAR(gx.y(i, j), 0.0, 1e-15);
    }
}

TEST(Grid, DivergenceTelescopes) {
    const Grid2D g(12, 12, 1.0, 1.0);
    std::mt19937_64 rng(1);
    StaggeredVectorField F(g);
    std::uniform_real_distribution<double> d(-1, 1);
    for (auto& v : F.xs()) v = d(rng);
    for (auto& v : F.ys()) v = d(rng);
    F.zero_boundary();
    EXPECT_NEAR(integrate(div_face_to_cc(F)), 0.0, 1e-13);
    EXPECT_EQ(max_abs(div_face_to_cc(grad_cc_to_face(ScalarField(g, 0.7)))), 0.0);
}

TEST(Grid, DivergenceIsMinusAdjointOfGradient) {
    const Grid2D g(10, 10, 1.0, 1.0);
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 5; ++trial) {
        const ScalarField f = oracle::random_field(g, rng);
        StaggeredVectorField F(g);
        std::uniform_real_distribution<double> d(-1, 1);
        for (auto& v : F.xs()) v = d(rng);
        for (auto& v : F.ys()) v = d(rng);
        F.zero_boundary();
        EXPECT_NEAR(inner(grad_cc_to_face(f), F), -inner(f, div_face_to_cc(F)), 1e-10);
    }
}

TEST(Grid, NormsExamples) {
    const Grid2D g(16, 16, 1.0, 1.0);
    const Norms one = norms(ScalarField(g, 1.0));
    EXPECT_NEAR(one.l1, 1.0, 1e-14);
    EXPECT_NEAR(one.l2, 1.0, 1e-14);
    EXPECT_EQ(one.linf, 1.0);
    EXPECT_EQ(one.h1semi, 0.0);

    const Grid2D g8(8, 8, 1.0, 1.0);
    ScalarField cb(g8);
    for (int j = 0; j < 8; ++j) {
        for (int i = 0; i < 8; ++i) cb(i, j) = ((i + j) % 2 == 0) ? 1.0 : -1.0;
    }
    const Norms n = norms(cb);
    EXPECT_NEAR(n.l2, 1.0, 1e-14);
    EXPECT_EQ(n.linf, 1.0);
}

TEST(Grid, MismatchedGridsThrow) {
    const Grid2D a(8, 8, 1.0, 1.0), b(16, 16, 1.0, 1.0);
    ScalarField f(a, 1.0);
    EXPECT_THROW(f += ScalarField(b, 1.0), GridMismatch);
}

TEST(FieldIo, ChbfRoundTrip) {
    const Grid2D g(6, 4, 1.5, 1.0);
    std::mt19937_64 rng(3);
    const ScalarField f = oracle::random_field(g, rng);
    const ScalarField back = io::decode_chbf(io::encode_chbf(f));
    ASSERT_EQ(back.grid(), g);
    for (std::size_t k = 0; k < f.size(); ++k) EXPECT_EQ(back[k], f[k]);

    const auto path = std::filesystem::temp_directory_path() / "chb_roundtrip.chbf";
    io::write_chbf(path, f);
    const ScalarField disk = io::read_chbf(path);
    for (std::size_t k = 0; k < f.size(); ++k) EXPECT_EQ(disk[k], f[k]);
    std::filesystem::remove(path);
}

TEST(FieldIo, RejectsCorruptBuffers) {
    const Grid2D g(4, 4, 1.0, 1.0);
    auto buf = io::encode_chbf(ScalarField(g, 0.5));
    auto truncated = buf;
    truncated.pop_back();
    EXPECT_THROW(io::decode_chbf(truncated), IoError);
    buf[0] = 'X';
    EXPECT_THROW(io::decode_chbf(buf), IoError);
    EXPECT_THROW(io::read_chbf("/nonexistent/dir/file.chbf"), IoError);
}
