#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "bsdelab/error.hpp"
#include "bsdelab/fixtures.hpp"
#include "bsdelab/forward.hpp"
#include "bsdelab/malliavin.hpp"
#include "bsdelab/sensitivity.hpp"

using namespace bsdelab;

namespace {

struct Solved {
    Fixture fixture;
    ExperimentConfig config;
    PathSet paths;
    RegressionBasis basis{1, 3};
    BsdeSolution base;
};

Solved make(const Fixture& f, std::size_t steps, std::size_t paths, std::uint64_t seed = 1) {
    Solved s{f, make_config(f, steps, paths, seed), {}, RegressionBasis(1, 3), {}};
    s.paths = simulate_base(s.config);
    s.base = solve_config(s.config, s.paths);
    return s;
}

MalliavinDerivative from_bsde(const Solved& s, const std::vector<std::size_t>& thetas) {
    return malliavin_from_bsde(s.base, s.config.model, s.config.generator, s.config.terminal,
                               s.paths, s.basis, thetas);
}

}  // namespace

TEST(Malliavin, ZeroBeforeTheta) {
    const FixtureRegistry registry;
    const Solved s = make(registry.make("tanh-quadratic"), 20, 1000);
    const auto d = from_bsde(s, {7});
    for (std::size_t p = 0; p < 1000; p += 50) {
        for (std::size_t k = 0; k < 7; ++k) {
            EXPECT_EQ(d.dy(0, p, k), 0.0);
            EXPECT_EQ(d.dz(0, p, k, 0), 0.0);
            EXPECT_EQ(d.dx(0, p, k, 0), 0.0);
        }
        EXPECT_NE(d.dy(0, p, 7), 0.0);
    }
}

TEST(Malliavin, ConstantTerminalHasNoDerivative) {
    const FixtureRegistry registry;
    Fixture f = registry.make("tanh-quadratic");
    f.terminal.value = [](std::span<const double>) { return 0.3; };
    f.terminal.gradient = [](std::span<const double>, std::span<double> g) { g[0] = 0.0; };
    const Solved s = make(f, 20, 1000);
    const auto d = from_bsde(s, {0, 10});
    for (const auto& slice : d.slices) {
        for (double v : slice.dy.flat()) EXPECT_LE(std::abs(v), 1e-6);
        for (double v : slice.dz.flat()) EXPECT_LE(std::abs(v), 1e-6);
    }
}

TEST(Malliavin, ColeHopfDerivativeIsOne) {
    const FixtureRegistry registry;
    const Solved s = make(registry.make("cole-hopf-bm"), 50, 10'000);
    const auto d = from_bsde(s, {0});
    for (std::size_t k = 0; k <= 50; k += 5) {
        double mean = 0.0;
        for (std::size_t p = 0; p < 10'000; ++p) mean += d.dy(0, p, k);
        EXPECT_NEAR(mean / 1e4, 1.0, 0.02) << k;
    }
}

TEST(Malliavin, GbmForwardDerivativeMatchesClosedForm) {
    // D_θ X_t = 0.2 X_t on the Euler scheme up to O(dt) discretisation error.
    const FixtureRegistry registry;
    const Solved s = make(registry.make("gbm-linear"), 50, 2000);
    const Array3 dx = dtheta_forward(s.paths, s.config.model, 10);
    for (std::size_t p = 0; p < 2000; p += 101) {
        EXPECT_NEAR(dx(p, 0, 0), 0.2 * s.paths.states(p, 10, 0), 1e-12);
        EXPECT_NEAR(dx(p, 40, 0) / s.paths.states(p, 50, 0), 0.2, 0.01);
    }
}

TEST(Malliavin, TraceAndRoutesAgreeOnClosedFormFixtures) {
    const FixtureRegistry registry;
    for (const char* name : {"additive-linear", "cole-hopf-bm", "gbm-linear"}) {
        const Solved s = make(registry.make(name), 30, 20'000);
        std::vector<std::size_t> thetas{0, 5, 10, 15, 20, 25, 29};
        const auto bsde_route = from_bsde(s, thetas);
        const auto var = solve_variational_bsde(s.base, s.paths, s.config.generator, s.config.terminal,
                                                s.basis);
        const auto rep_route = representation_from_variational(var, s.paths, s.config.model, thetas);
        EXPECT_TRUE(rep_route.dz_advisory);
        EXPECT_LT(route_distance(bsde_route, rep_route), 0.05) << name;
        const auto trace = trace_check(s.base, bsde_route, s.fixture.z_bound);
        EXPECT_LT(trace.aggregate, 0.05) << name;
        EXPECT_EQ(trace.nodes.size(), thetas.size());
    }
}

TEST(Malliavin, ErrorsAreTyped) {
    const FixtureRegistry registry;
    const Solved s = make(registry.make("additive-linear"), 10, 300);
    EXPECT_THROW((void)dtheta_forward(s.paths, s.config.model, 10), Error);

    MalliavinDerivative empty;
    empty.node_count = 11;
    try {
        (void)trace_check(s.base, empty);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingDiagonal);
    }

    SdeModel degenerate = s.config.model;
    degenerate.drift_jacobian = [](double, std::span<const double>, std::span<double> out) {
        out[0] = -10.0;  // 1 - 10 dt = 0: the tangent dies after one step
    };
    const auto config = make_config(registry.make("additive-linear"), 10, 300, 1);
    PathSet paths = simulate_sde(degenerate, config.initial_point, config.grid,
                                 simulate_brownian(1, 300, config.grid, 1));
    try {
        (void)dtheta_forward(paths, degenerate, 3);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::SingularVariation);
        EXPECT_NE(std::string(e.what()).find("path 0"), std::string::npos);
    }
}

TEST(Malliavin, SobolevNormIncludesDerivativeEnergy) {
    const FixtureRegistry registry;
    const Solved s = make(registry.make("cole-hopf-bm"), 20, 2000);
    std::vector<std::size_t> thetas(20);
    for (std::size_t i = 0; i < 20; ++i) thetas[i] = i;
    const auto d = from_bsde(s, thetas);
    // E|Y_T|^2 = 1 and sum_θ |D_θ Y_T|^2 dθ = T = 1, so the norm is sqrt(2).
    EXPECT_NEAR(sobolev_norm(s.base, d, s.paths.grid, 20, 2.0), std::sqrt(2.0), 0.05);
}

TEST(Malliavin, CsvListsOnlyNodesFromTheta) {
    const FixtureRegistry registry;
    const Solved s = make(registry.make("additive-linear"), 10, 200);
    const auto d = from_bsde(s, {8});
    const std::string csv = malliavin_csv(d);
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "path,theta_node,node,DY,DZ_1");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 200 * 3);
}
