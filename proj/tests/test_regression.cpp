#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "bsdelab/regression.hpp"

using namespace bsdelab;

namespace {

// Plain monomials in raw coordinates, solved by Householder QR.
std::vector<double> direct_ols(const std::vector<double>& x, const std::vector<double>& y,
                               int degree) {
    const auto m = static_cast<Eigen::Index>(x.size());
    Eigen::MatrixXd design(m, degree + 1);
    for (Eigen::Index p = 0; p < m; ++p) {
        for (int j = 0; j <= degree; ++j) design(p, j) = std::pow(x[p], j);
    }
    const Eigen::VectorXd target = Eigen::Map<const Eigen::VectorXd>(y.data(), m);
    const Eigen::VectorXd beta = design.householderQr().solve(target);
    const Eigen::VectorXd fitted = design * beta;
    return {fitted.data(), fitted.data() + m};
}

}  // namespace

TEST(Basis, SizeIsBinomial) {
    EXPECT_EQ(RegressionBasis(1, 3).size(), 4u);
    EXPECT_EQ(RegressionBasis(2, 3).size(), 10u);
    EXPECT_EQ(RegressionBasis(3, 2).size(), 10u);
    EXPECT_EQ(RegressionBasis(4, 0).size(), 1u);
}

TEST(Basis, OnlyConstantSurvivesAtOrigin) {
    const RegressionBasis basis(3, 3);
    std::vector<double> phi(basis.size());
    const std::vector<double> zero(3, 0.0);
    basis.features(zero, phi);
    EXPECT_EQ(phi[0], 1.0);
    for (std::size_t i = 1; i < phi.size(); ++i) EXPECT_EQ(phi[i], 0.0);
}

TEST(Regression, AgreesWithDirectLeastSquares) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g;
    const std::size_t m = 2000;
    std::vector<double> x(m), y(m);
    for (std::size_t p = 0; p < m; ++p) {
        x[p] = 0.3 + 1.4 * g(rng);
        y[p] = std::tanh(x[p]) + 0.2 * g(rng);
    }
    const auto ours = condexp_regress(y, x, RegressionBasis(1, 3));
    const auto oracle = direct_ols(x, y, 3);
    for (std::size_t p = 0; p < m; ++p) EXPECT_NEAR(ours[p], oracle[p], 1e-9);
}

TEST(Regression, ReproducesPolynomialsExactly) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-2.0, 3.0);
    const std::size_t m = 500;
    std::vector<double> states(2 * m), y(m);
    for (std::size_t p = 0; p < m; ++p) {
        const double a = u(rng), b = u(rng);
        states[2 * p] = a;
        states[2 * p + 1] = b;
        y[p] = 1.0 - 2.0 * a + a * b - 0.5 * b * b;
    }
    const auto fitted = condexp_regress(y, states, RegressionBasis(2, 2));
    for (std::size_t p = 0; p < m; ++p) EXPECT_NEAR(fitted[p], y[p], 1e-9);
}

TEST(Regression, ResidualIsOrthogonalToBasis) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    const std::size_t m = 1000;
    std::vector<double> x(m), y(m);
    for (std::size_t p = 0; p < m; ++p) {
        x[p] = g(rng);
        y[p] = std::exp(x[p]) + g(rng);
    }
    const auto fitted = condexp_regress(y, x, RegressionBasis(1, 2));
    for (int j = 0; j <= 2; ++j) {
        double inner = 0.0;
        for (std::size_t p = 0; p < m; ++p) inner += (y[p] - fitted[p]) * std::pow(x[p], j);
        EXPECT_NEAR(inner / m, 0.0, 1e-9);
    }
}

TEST(Regression, DeterministicStatesFallBackToMean) {
    const std::size_t m = 300;
    std::vector<double> x(m, 0.7), y(m);
    for (std::size_t p = 0; p < m; ++p) y[p] = static_cast<double>(p % 7);
    const Regressor reg(x, m, RegressionBasis(1, 3));
    EXPECT_TRUE(reg.degenerate(0));
    const auto fitted = reg.fit(y);
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= m;
    for (double v : fitted) EXPECT_NEAR(v, mean, 1e-8);
}

TEST(Regression, SurfaceGradientMatchesFiniteDifference) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    const std::size_t m = 800;
    std::vector<double> x(m), y(m);
    for (std::size_t p = 0; p < m; ++p) {
        x[p] = 1.0 + 0.5 * g(rng);
        y[p] = std::sin(x[p]);
    }
    const Regressor reg(x, m, RegressionBasis(1, 4));
    const auto beta = reg.coefficients(y);
    for (double s : {0.5, 1.0, 1.6}) {
        const double h = 1e-6;
        const std::vector<double> up{s + h}, down{s - h}, at{s};
        const double fd = (reg.surface_value_at(beta, up) - reg.surface_value_at(beta, down)) / (2 * h);
        std::vector<double> grad(1);
        reg.surface_gradient_at(beta, at, grad);
        EXPECT_NEAR(grad[0], fd, 1e-6);
    }
}
