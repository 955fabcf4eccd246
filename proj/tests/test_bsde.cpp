#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "bsdelab/bsde.hpp"
#include "bsdelab/error.hpp"
#include "bsdelab/fixtures.hpp"
#include "bsdelab/forward.hpp"
#include "bsdelab/parallel.hpp"
#include "bsdelab/sensitivity.hpp"

using namespace bsdelab;

namespace {

struct Solved {
    Fixture fixture;
    ExperimentConfig config;
    PathSet paths;
    BsdeSolution solution;
};

Solved solve(const Fixture& fixture, std::size_t paths, std::uint64_t seed = 1) {
    ExperimentConfig config = make_config(fixture, 50, paths, seed);
    PathSet bundle = simulate_base(config);
    BsdeSolution sol = solve_config(config, bundle);
    return {fixture, std::move(config), std::move(bundle), std::move(sol)};
}

TerminalCondition constant_terminal(double c) {
    TerminalCondition t;
    t.value = [c](std::span<const double>) { return c; };
    t.gradient = [](std::span<const double>, std::span<double> g) { std::fill(g.begin(), g.end(), 0.0); };
    t.bound = std::abs(c);
    return t;
}

double max_node_rel_l2_z(const Solved& s) {
    double worst = 0.0;
    for (std::size_t k = 0; k < 50; ++k) {
        double num = 0.0, den = 0.0;
        for (std::size_t p = 0; p < s.paths.paths(); ++p) {
            const double ref = s.fixture.reference.z(s.paths.grid.node(k), s.paths.states.slice(p, k));
            num += std::pow(s.solution.z(p, k, 0) - ref, 2);
            den += ref * ref;
        }
        worst = std::max(worst, std::sqrt(num / den));
    }
    return worst;
}

}  // namespace

TEST(Lsmc, MartingaleOfBrownianMotion) {
    const FixtureRegistry registry;
    FixtureOverrides o;
    o.alpha = 0.0;
    // At 1e4 paths the worst of 50 nodes sits near 8%: the Y projection error
    // accumulated from later nodes enters Z through its slope. 4e4 paths halve it.
    const Solved s = solve(registry.make("cole-hopf-bm", o), 40'000);
    EXPECT_LT(max_node_rel_l2_z(s), 0.05);
    for (std::size_t k = 0; k <= 50; k += 5) {
        double err = 0.0;
        for (std::size_t p = 0; p < 40'000; ++p) {
            err += std::pow(s.solution.y(p, k) - s.paths.brownian_at(p, k)[0], 2);
        }
        EXPECT_LT(std::sqrt(err / 4e4), 0.05) << "node " << k;
    }
}

TEST(Lsmc, DiscountedConstantFollowsTheOde) {
    const FixtureRegistry registry;
    Fixture f = registry.make("additive-linear");
    f.terminal = constant_terminal(1.0);
    const Solved s = solve(f, 10'000);
    EXPECT_NEAR(s.solution.y0(), std::exp(-0.1), 0.01 * std::exp(-0.1));
}

TEST(Lsmc, ColeHopfWithinThreeStandardErrors) {
    const FixtureRegistry registry;
    const Solved s = solve(registry.make("cole-hopf-bm"), 40'000);
    EXPECT_LE(std::abs(s.solution.y0() - 0.5), 3.0 * s.solution.y0_standard_error);
    EXPECT_LT(max_node_rel_l2_z(s), 0.05);
}

TEST(Lsmc, StructuralInvariants) {
    const FixtureRegistry registry;
    const Solved s = solve(registry.make("tanh-quadratic"), 2000);
    const auto xi = terminal_values(s.config.terminal, s.paths);
    for (std::size_t p = 0; p < 2000; ++p) {
        EXPECT_EQ(s.solution.y(p, 50), xi[p]);
        EXPECT_EQ(s.solution.z(p, 50, 0), s.solution.z(p, 49, 0));
    }
    for (double v : s.solution.y.flat()) ASSERT_TRUE(std::isfinite(v));
    for (double v : s.solution.z.flat()) ASSERT_TRUE(std::isfinite(v));
    EXPECT_EQ(s.solution.residuals.size(), 50u);
}

TEST(Lsmc, BoundedTerminalKeepsYBounded) {
    const FixtureRegistry registry;
    for (const char* name : {"tanh-quadratic", "fbsde-tanh"}) {
        const Solved s = solve(registry.make(name), 5000);
        const double k = *s.fixture.terminal.bound;
        double max_g = 0.0, max_y = 0.0;
        for (double z : s.solution.z.flat()) max_g = std::max(max_g, z * z);
        for (double y : s.solution.y.flat()) max_y = std::max(max_y, std::abs(y));
        EXPECT_LE(max_y, k + s.fixture.generator.quad_coeff * max_g * s.fixture.horizon * 1.1) << name;
    }
}

TEST(Lsmc, IdenticalAcrossWorkerCounts) {
    const FixtureRegistry registry;
    const Fixture f = registry.make("fbsde-tanh");
    BsdeSolution one, many;
    {
        ScopedWorkerCount scope(1);
        one = solve(f, 5000).solution;
    }
    {
        ScopedWorkerCount scope(4);
        many = solve(f, 5000).solution;
    }
    EXPECT_EQ(one.y, many.y);
    EXPECT_EQ(one.z, many.z);
}

TEST(Lsmc, TruncationStabilisesAboveObservedPercentile) {
    const FixtureRegistry registry;
    const Solved s = solve(registry.make("cole-hopf-bm"), 5000);
    std::vector<double> abs_z;
    for (std::size_t p = 0; p < 5000; ++p) {
        for (std::size_t k = 0; k < 50; ++k) abs_z.push_back(std::abs(s.solution.z(p, k, 0)));
    }
    std::sort(abs_z.begin(), abs_z.end());
    const double n_star = abs_z[abs_z.size() * 99 / 100];
    const RegressionBasis basis(1, 3);
    auto truncated = [&](double level) {
        return solve_lsmc(s.config.generator, s.config.terminal, s.paths, basis, Truncation(level), 2);
    };
    double previous = INFINITY;
    for (double n : {n_star, 2.0 * n_star, 4.0 * n_star}) {
        const auto a = truncated(n), b = truncated(2.0 * n);
        double gap = 0.0;
        for (std::size_t i = 0; i < a.y.size(); ++i) gap = std::max(gap, std::abs(a.y.flat()[i] - b.y.flat()[i]));
        EXPECT_LE(gap, previous);
        previous = gap;
    }
}

TEST(Lsmc, UnstableDriverRaisesBlowup) {
    const FixtureRegistry registry;
    Fixture f = registry.make("additive-linear");
    f.generator = QuadraticGenerator::discounting(-400.0, 0.0, 1);
    f.terminal = constant_terminal(1.0);
    const auto config = make_config(f, 50, 500, 1, 3, 1);
    const PathSet paths = simulate_base(config);
    try {
        (void)solve_config(config, paths);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Blowup);
    }
}

TEST(ColeHopf, ExactSolverMatchesClosedForm) {
    // A polynomial surface for exp(W_T) degrades in the tails and near the
    // horizon, where dividing by a small fitted level amplifies the slope error.
    // Z is checked on the bulk |x| <= 2 sd at nodes where the fit resolves it.
    const FixtureRegistry registry;
    const Fixture f = registry.make("cole-hopf-bm");
    const auto config = make_config(f, 50, 20'000, 2);
    const PathSet paths = simulate_base(config);
    const auto sol = cole_hopf_solve(0.5, f.terminal, f.model, paths, RegressionBasis(1, 5));
    EXPECT_NEAR(sol.y0(), 0.5, 3.0 * sol.y0_standard_error);
    for (std::size_t k : {5u, 25u, 45u}) {
        const double t = paths.grid.node(k);
        double y_err = 0.0, z_err = 0.0;
        std::size_t bulk = 0;
        for (std::size_t p = 0; p < 20'000; ++p) {
            const double x = paths.states.slice(p, k)[0];
            y_err += std::pow(sol.y(p, k) - (x + 0.5 * (1.0 - t)), 2);
            if (std::abs(x) <= 2.0 * std::sqrt(t)) {
                z_err += std::pow(sol.z(p, k, 0) - 1.0, 2);
                ++bulk;
            }
        }
        EXPECT_LT(std::sqrt(y_err / 2e4), 0.1) << "node " << k;
        if (k <= 25) {
            EXPECT_LT(std::sqrt(z_err / static_cast<double>(bulk)), 0.05) << "node " << k;
        }
    }
}

TEST(ColeHopf, ExponentOverflowIsReported) {
    const FixtureRegistry registry;
    const Fixture f = registry.make("cole-hopf-bm");
    const auto config = make_config(f, 10, 200, 1);
    const PathSet paths = simulate_base(config);
    try {
        (void)cole_hopf_solve(500.0, f.terminal, f.model, paths, RegressionBasis(1, 3));
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OverflowInExponent);
    }
}

TEST(LinearBsde, ConstantFreeTermIntegratesBackwards) {
    const FixtureRegistry registry;
    const auto config = make_config(registry.make("additive-linear"), 20, 1000, 1);
    const PathSet paths = simulate_base(config);
    LinearDriver driver;
    driver.a = Array2({1000, 21}, 0.5);
    const std::vector<double> zeta(1000, 0.0);
    const auto sol = solve_linear_bsde(driver, zeta, paths, RegressionBasis(1, 3), 1, 5);
    for (std::size_t k = 0; k <= 20; ++k) {
        const double expected = k < 5 ? 0.0 : 0.5 * (1.0 - paths.grid.node(k));
        EXPECT_NEAR(sol.y(17, k), expected, 1e-12) << k;
        if (k < 5) {
            EXPECT_EQ(sol.z(17, k, 0), 0.0);
        }
    }
}

TEST(LinearBsde, ShapeMismatchIsRejected) {
    const FixtureRegistry registry;
    const auto config = make_config(registry.make("additive-linear"), 20, 1000, 1);
    const PathSet paths = simulate_base(config);
    const std::vector<double> zeta(999, 0.0);
    EXPECT_THROW(solve_linear_bsde({}, zeta, paths, RegressionBasis(1, 3), 1), Error);
}

TEST(Lsmc, SolutionCsvHasHeaderAndRows) {
    const FixtureRegistry registry;
    const Solved s = solve(registry.make("additive-linear"), 100);
    const std::string csv = solution_csv(s.solution);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "path,node,Y,Z_1");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 100 * 51);
}
