#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <vector>

#include "bsdelab/bmo.hpp"
#include "bsdelab/error.hpp"
#include "bsdelab/fixtures.hpp"
#include "bsdelab/forward.hpp"
#include "bsdelab/sensitivity.hpp"

using namespace bsdelab;
using Wide = boost::multiprecision::cpp_bin_float_50;

namespace {

// Ψ(x) = sqrt(1 + log((2x - 1)/(2(x - 1))) / x^2) - 1 at 50 digits.
double psi_oracle(const Wide& x) {
    using boost::multiprecision::log;
    using boost::multiprecision::sqrt;
    const Wide inner = 1 + log((2 * x - 1) / (2 * (x - 1))) / (x * x);
    return static_cast<double>(sqrt(inner) - 1);
}

PathSet bm_paths(std::size_t steps, std::size_t paths, std::uint64_t seed = 1) {
    const FixtureRegistry registry;
    return simulate_base(make_config(registry.make("cole-hopf-bm"), steps, paths, seed));
}

}  // namespace

TEST(Psi, MatchesHighPrecisionClosedForm) {
    EXPECT_NEAR(psi(2.0), std::sqrt(1.0 + 0.25 * std::log(1.5)) - 1.0, 1e-15);
    for (double x : {1.0001, 1.1, 1.5, 2.0, 3.7, 10.0, 1e3}) {
        EXPECT_NEAR(psi(x), psi_oracle(Wide(x)), 1e-14 * std::max(1.0, psi_oracle(Wide(x)))) << x;
    }
    for (double e : {1e-8, 1e-30, 1e-200}) {
        const Wide x = Wide(1) + Wide(e);
        EXPECT_NEAR(psi_excess(e), psi_oracle(x), 1e-13 * psi_oracle(x)) << e;
    }
}

TEST(Psi, LogExcessFormAgreesAndExtends) {
    for (double e : {1e-300, 1e-5, 0.3, 2.0, 50.0}) {
        EXPECT_NEAR(psi_log_excess(std::log(e)), psi_excess(e), 1e-14 * psi_excess(e));
    }
    // Past the double range of r - 1 the threshold keeps growing like sqrt(-L).
    EXPECT_NEAR(psi_log_excess(-1e4), std::sqrt(1e4 - std::log(2.0) + 1.0) - 1.0, 1e-6);
}

TEST(Psi, StrictlyDecreasing) {
    double previous = INFINITY;
    for (int i = 0; i < 200; ++i) {
        const double x = 1.0 + std::pow(10.0, -12.0 + 15.0 * i / 199.0);
        const double v = psi(x);
        EXPECT_LT(v, previous) << x;
        previous = v;
    }
}

TEST(Psi, DomainErrorAtOrBelowOne) {
    for (double x : {1.0, 0.5, -3.0, std::nan("")}) {
        try {
            (void)psi(x);
            ADD_FAILURE() << x;
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::DomainError);
        }
    }
}

TEST(FindR, ConjugateAndFeasibleEverywhere) {
    for (double alpha : {0.0, 0.25, 0.5, 1.0, 2.0, 50.0}) {
        for (double d : {0.0, 0.04, 0.5, 1.0, 5.0, 10.0, 100.0}) {
            const HolderExponents h = find_r(alpha, d, 10.0);
            EXPECT_NEAR(1.0 / h.r() + 1.0 / h.q, 1.0, 1e-12) << alpha << " " << d;
            EXPECT_GT(h.slack, 0.0) << alpha << " " << d;
            EXPECT_LE(h.r(), 10.0);
            EXPECT_GT(psi_log_excess(h.log_r_excess), 2.0 * alpha * d);
        }
    }
}

TEST(FindR, BisectionIsTight) {
    const HolderExponents h = find_r(0.5, 1.0, 10.0);
    EXPECT_GT(psi_log_excess(h.log_r_excess), 1.0);
    EXPECT_LE(psi_log_excess(h.log_r_excess + 2e-8), 1.0);
    EXPECT_EQ(find_r(0.0, 3.0, 4.0).r(), 4.0);
}

TEST(FindR, RejectsInvalidInput) {
    EXPECT_THROW((void)find_r(-1.0, 1.0, 10.0), Error);
    EXPECT_THROW((void)find_r(1.0, INFINITY, 10.0), Error);
    EXPECT_THROW((void)find_r(1.0, 1.0, 1.0), Error);
}

TEST(Bmo, UnitIntegrandHasUnitNorm) {
    const PathSet paths = bm_paths(50, 500);
    const Array3 z({500, 51, 1}, 1.0);
    const BmoEstimate est = estimate_bmo2(z, paths, RegressionBasis(1, 3));
    EXPECT_NEAR(est.norm, 1.0, 1e-9);
    EXPECT_EQ(est.argmax_node, 0u);
    EXPECT_EQ(est.clipped, 0u);
}

TEST(Bmo, RampIntegrand) {
    // Z_t = t gives sup_t int_t^1 s^2 ds = 1/3.
    const PathSet paths = bm_paths(100, 500);
    Array3 z({500, 101, 1});
    for (std::size_t p = 0; p < 500; ++p) {
        for (std::size_t k = 0; k <= 100; ++k) z(p, k, 0) = paths.grid.node(k);
    }
    const BmoEstimate est = estimate_bmo2(z, paths, RegressionBasis(1, 3));
    EXPECT_NEAR(est.norm, std::sqrt(1.0 / 3.0), 0.02 * std::sqrt(1.0 / 3.0));
}

TEST(Bmo, NonFiniteIntegrandRejected) {
    const PathSet paths = bm_paths(10, 200);
    Array3 z({200, 11, 1}, 1.0);
    z(3, 4, 0) = NAN;
    EXPECT_THROW((void)estimate_bmo2(z, paths, RegressionBasis(1, 3)), Error);
}

TEST(Girsanov, ZeroIntegrandGivesUnitWeights) {
    const PathSet paths = bm_paths(20, 1000);
    const auto w = girsanov_weights(Array3({1000, 21, 1}, 0.0), paths);
    for (double v : w.weights) EXPECT_EQ(v, 1.0);
    EXPECT_EQ(w.mean, 1.0);
    EXPECT_EQ(w.variance, 0.0);
}

TEST(Girsanov, UnitIntegrandMoments) {
    const PathSet paths = bm_paths(20, 50'000, 3);
    const auto w = girsanov_weights(Array3({50'000, 21, 1}, 1.0), paths);
    EXPECT_NEAR(w.mean, 1.0, 4.0 * w.mean_standard_error);
    EXPECT_NEAR(w.variance, std::exp(1.0) - 1.0, 5.0 * w.variance_standard_error);
    // The weight is exp(W_1 - 1/2) exactly.
    EXPECT_NEAR(w.weights[7], std::exp(paths.brownian_at(7, 20)[0] - 0.5), 1e-12);
}

TEST(Girsanov, ExponentOverflowReported) {
    const PathSet paths = bm_paths(20, 100);
    try {
        (void)girsanov_weights(Array3({100, 21, 1}, 100.0), paths);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OverflowInExponent);
    }
}

TEST(MomentBound, BetaAndFiniteRatio) {
    const FixtureRegistry registry;
    const auto config = make_config(registry.make("additive-linear"), 20, 2000, 1);
    const PathSet paths = simulate_base(config);
    const auto sol = solve_config(config, paths);
    const auto zeta = terminal_values(config.terminal, paths);
    const HolderExponents ex = find_r(0.0, 0.0, 10.0);
    const auto mb = moment_bound_diagnostic(sol, zeta, Array2(), paths.grid, ex, 1.0, 1.0);
    EXPECT_EQ(mb.beta, 3.0);
    EXPECT_TRUE(std::isfinite(mb.ratio));
    EXPECT_GT(mb.ratio, 0.0);
    EXPECT_TRUE(mb.pass);
    EXPECT_NE(bmo_report(estimate_bmo2(sol.z, paths, RegressionBasis(1, 3)), ex,
                         girsanov_weights(Array3({2000, 21, 1}, 0.0), paths), mb)
                  .find("moment_ratio"),
              std::string::npos);
}

TEST(MomentBound, ZeroSidesGiveZeroRatio) {
    const PathSet paths = bm_paths(10, 200);
    BsdeSolution sol;
    sol.y = Array2({200, 11});
    sol.z = Array3({200, 11, 1});
    const std::vector<double> zeta(200, 0.0);
    const auto mb = moment_bound_diagnostic(sol, zeta, Array2(), paths.grid, find_r(0.5, 0.1, 10.0),
                                            1.0, 0.0);
    EXPECT_EQ(mb.ratio, 0.0);
}
