#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "bsdelab/fixtures.hpp"
#include "bsdelab/quadrature.hpp"

using namespace bsdelab;

namespace {

// Composite Simpson of E[f(mean + sd G)] on [-12, 12] standard deviations.
double simpson_normal(double mean, double sd, const std::function<double(double)>& f) {
    const int n = 20'000;
    const double a = -12.0, b = 12.0, h = (b - a) / n;
    double s = 0.0;
    for (int i = 0; i <= n; ++i) {
        const double g = a + i * h;
        const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
        s += w * f(mean + sd * g) * std::exp(-0.5 * g * g);
    }
    return s * h / 3.0 / std::sqrt(2.0 * std::numbers::pi);
}

}  // namespace

TEST(GaussHermite, IntegratesPolynomialsExactly) {
    const NormalRule rule = gauss_hermite(10);
    double total = 0.0;
    for (double w : rule.weights) total += w;
    EXPECT_NEAR(total, 1.0, 1e-14);
    // E[G^2k] = (2k - 1)!!
    const double moments[] = {1.0, 1.0, 3.0, 15.0, 105.0, 945.0};
    for (int k = 0; k < 6; ++k) {
        const double m = normal_expectation(rule, 0.0, 1.0, [k](double g) { return std::pow(g, 2 * k); });
        EXPECT_NEAR(m, moments[k], 1e-10 * moments[k]) << k;
    }
    EXPECT_NEAR(normal_expectation(rule, 0.0, 1.0, [](double g) { return g * g * g; }), 0.0, 1e-13);
}

TEST(GaussHermite, MatchesSimpsonOnEntireIntegrands) {
    const NormalRule rule = gauss_hermite(64);
    const std::function<double(double)> fs[] = {
        [](double x) { return std::cos(3.0 * x); },
        [](double x) { return std::exp(std::sin(x)); },
    };
    for (const auto& f : fs) {
        for (auto [mean, sd] : {std::pair{0.5, 1.0}, {0.3, 0.6}, {-1.0, 0.2}}) {
            EXPECT_NEAR(normal_expectation(rule, mean, sd, f), simpson_normal(mean, sd, f), 1e-11);
        }
    }
}

TEST(Trapezoid, MatchesSimpsonWherePolesSlowGaussHermite) {
    const NormalRule rule = normal_trapezoid(0.2, 9.0);
    double total = 0.0;
    for (double w : rule.weights) total += w;
    EXPECT_NEAR(total, 1.0, 1e-14);
    const std::function<double(double)> fs[] = {
        [](double x) { return std::exp(std::tanh(x)); },
        [](double x) { return std::exp(std::tanh(x)) / std::pow(std::cosh(x), 2); },
        [](double x) { return std::cos(3.0 * x); },
    };
    for (const auto& f : fs) {
        for (auto [mean, sd] : {std::pair{0.5, 1.0}, {0.3, 0.6}, {-1.0, 0.2}}) {
            EXPECT_NEAR(normal_expectation(rule, mean, sd, f), simpson_normal(mean, sd, f), 1e-11);
        }
    }
}

TEST(GaussHermite, ExactLognormalMean) {
    const NormalRule rule = gauss_hermite(40);
    EXPECT_NEAR(normal_expectation(rule, 0.1, 0.7, [](double x) { return std::exp(x); }),
                std::exp(0.1 + 0.5 * 0.49), 1e-13);
}

TEST(Fixtures, QuadratureReferencesMatchSimpson) {
    const FixtureRegistry registry;
    const Fixture f = registry.make("tanh-quadratic");
    // Y_0 = log E[exp(2 alpha tanh(x0 + W_1))] / (2 alpha) with alpha = 0.5.
    const double e = simpson_normal(0.5, 1.0, [](double x) { return std::exp(std::tanh(x)); });
    EXPECT_NEAR(f.reference.y0, std::log(e), 1e-10);
    const double de = simpson_normal(0.5, 1.0, [](double x) {
        return std::exp(std::tanh(x)) / std::pow(std::cosh(x), 2);
    });
    EXPECT_NEAR(f.reference.grad_y0, de / e, 1e-10);

    const Fixture ou = registry.make("fbsde-tanh");
    const double m = 0.3 * std::exp(-0.5), v = 0.16 * (1.0 - std::exp(-1.0));
    const double eo = simpson_normal(m, std::sqrt(v), [](double x) { return std::exp(std::tanh(x)); });
    EXPECT_NEAR(ou.reference.y0, std::log(eo), 1e-10);
}

TEST(Fixtures, ClosedFormReferencesAreConsistent) {
    const FixtureRegistry registry;
    const std::vector<double> x{0.7};
    const Fixture ch = registry.make("cole-hopf-bm");
    EXPECT_DOUBLE_EQ(ch.reference.y(0.25, x), 0.7 + 0.5 * 0.75);
    const Fixture gbm = registry.make("gbm-linear");
    EXPECT_DOUBLE_EQ(gbm.reference.z(0.0, x), 0.2 * 0.7);
    EXPECT_DOUBLE_EQ(registry.make("additive-linear").reference.grad_y0, std::exp(-0.1));
}
