#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "soo/oracle.hpp"
#include "soo/rand.hpp"

using namespace soo;

namespace {

QuadraticProblem diag13(Vector b = {0, 0}, double c0 = 0.0) {
    return QuadraticProblem(SymMatrix::diagonal({1, 3}), std::move(b), c0);
}

}  // namespace

TEST(QuadraticProblem, Values) {
    const auto p = QuadraticProblem::isotropic(2);
    EXPECT_DOUBLE_EQ(p.value(Vector{3, 4}), 12.5);
    EXPECT_DOUBLE_EQ(diag13({0, 0}, 1.0).value(Vector{1, 1}), 3.0);
}

TEST(QuadraticProblem, MinimizerIsGlobal) {
    const QuadraticProblem p(SymMatrix::from_rows({{2, 0.5}, {0.5, 1}}), {1, -1}, 0.5);
    const Vector& xs = p.minimizer();
    EXPECT_LE(norm(p.gradient(xs)), 1e-9);
    EXPECT_LE(p.mu(), p.lip());
    std::mt19937_64 gen(1);
    std::normal_distribution<double> n(0.0, 3.0);
    for (int i = 0; i < 100; ++i) {
        Vector x = xs;
        for (auto& v : x) v += n(gen);
        EXPECT_GE(p.value(x), p.value(xs));
    }
}

TEST(QuadraticProblem, RejectsBadInput) {
    EXPECT_THROW(QuadraticProblem(SymMatrix::diagonal({1, 0}), {0, 0}), InvalidArgument);
    EXPECT_THROW(QuadraticProblem(SymMatrix::diagonal({1, -1}), {0, 0}), InvalidArgument);
    EXPECT_THROW(QuadraticProblem(SymMatrix::identity(2), {0, 0, 0}), DimensionError);
    EXPECT_THROW(QuadraticProblem::isotropic(2).value(Vector{1, 2, 3}), DimensionError);
}

TEST(NoisyGradient, Examples) {
    const auto iso = QuadraticProblem::isotropic(2);
    EXPECT_EQ(noisy_gradient(iso, Vector{1, 0}, Vector{0, 0}), (Vector{1, 0}));
    EXPECT_EQ(noisy_gradient(iso, Vector{0, 0}, Vector{0.3, -0.4}), (Vector{0.3, -0.4}));
    const Vector g = noisy_gradient(diag13({1, 0}), Vector{1, 1}, Vector{0, 0.5});
    EXPECT_DOUBLE_EQ(g[0], 2.0);
    EXPECT_DOUBLE_EQ(g[1], 3.5);
}

TEST(OrderOracle, Examples) {
    const auto iso = QuadraticProblem::isotropic(2);
    EXPECT_EQ(order_oracle(iso, Vector{2, 0}, Vector{1, 0}, Vector{0, 0}), OracleResponse::Positive);
    EXPECT_EQ(order_oracle(iso, Vector{1, 0}, Vector{2, 0}, Vector{0, 0}), OracleResponse::Negative);
    const double g = 0.1;
    EXPECT_EQ(order_oracle(iso, Vector{1, g}, Vector{1, -g}, Vector{0, -0.5}), OracleResponse::Negative);
}

TEST(OrderOracle, ZeroDifferenceIsPositive) {
    const auto iso = QuadraticProblem::isotropic(2);
    EXPECT_EQ(order_oracle(iso, Vector{1, 2}, Vector{1, 2}, Vector{0.1, 0.1}), OracleResponse::Positive);
    EXPECT_EQ(order_oracle(iso, Vector{0, 1}, Vector{1, 0}, Vector{0, 0}), OracleResponse::Positive);
}

TEST(OrderOracle, QuadraticExactnessAndAntisymmetry) {
    const QuadraticProblem p(SymMatrix::from_rows({{2, 0.5, 0}, {0.5, 1, 0.2}, {0, 0.2, 4}}), {1, -1, 0.5});
    RngStream s(9, 0);
    int mismatches = 0;
    for (double gamma : {1e-6, 0.1, 100.0}) {
        for (int t = 0; t < 10000; ++t) {
            Vector x0 = sample_gaussian(s, 3);
            for (auto& v : x0) v *= 5.0;
            const Vector e = sample_sphere(s, 3);
            const Vector xi = sample_noise(s, NoiseModel::sphere(3, 1.0));
            const double ip = dot(noisy_gradient(p, x0, xi), e);
            if (ip == 0.0) continue;
            Vector plus(3), minus(3);
            for (int i = 0; i < 3; ++i) {
                plus[i] = x0[i] + gamma * e[i];
                minus[i] = x0[i] - gamma * e[i];
            }
            const int got = to_int(order_oracle(p, plus, minus, xi));
            mismatches += got != (ip > 0 ? 1 : -1);
            EXPECT_EQ(to_int(order_oracle(p, minus, plus, xi)), -got);
        }
    }
    EXPECT_EQ(mismatches, 0);
}

TEST(OrderOracle, GenericObjectiveMatchesQuadratic) {
    const auto p = diag13({0.5, -0.5});
    const SmoothObjective f(2, [&](std::span<const double> x) { return p.value(x); });
    RngStream s(10, 0);
    for (int t = 0; t < 1000; ++t) {
        const Vector x = sample_gaussian(s, 2);
        const Vector y = sample_gaussian(s, 2);
        const Vector xi = sample_noise(s, NoiseModel::sphere(2, 1.0));
        EXPECT_EQ(order_oracle(f, x, y, xi), order_oracle(p, x, y, xi));
    }
}

TEST(OrderOracle, DimensionMismatch) {
    const auto iso = QuadraticProblem::isotropic(2);
    EXPECT_THROW(order_oracle(iso, Vector{1, 2, 3}, Vector{1, 2}, Vector{0, 0}), DimensionError);
    EXPECT_THROW(order_oracle(iso, Vector{1, 2}, Vector{1, 2}, Vector{0}), DimensionError);
}
