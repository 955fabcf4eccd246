#include <gtest/gtest.h>

#include <cmath>

#include "bsdelab/error.hpp"
#include "bsdelab/fixtures.hpp"
#include "bsdelab/forward.hpp"
#include "bsdelab/parallel.hpp"

using namespace bsdelab;

TEST(Brownian, IncrementsHaveVarianceDt) {
    const TimeGrid grid = build_grid(1.0, 20);
    const auto inc = simulate_brownian(7, 20'000, grid, 1);
    double sum = 0.0, sq = 0.0;
    for (double v : inc.values.flat()) {
        sum += v;
        sq += v * v;
    }
    const double n = static_cast<double>(inc.values.size());
    EXPECT_NEAR(sum / n, 0.0, 4.0 * std::sqrt(grid.dt() / n));
    EXPECT_NEAR(sq / n / grid.dt(), 1.0, 0.02);
}

TEST(Brownian, PathStreamsIgnoreWorkerCountAndBundleSize) {
    const TimeGrid grid = build_grid(1.0, 10);
    BrownianIncrements one, many;
    {
        ScopedWorkerCount scope(1);
        one = simulate_brownian(42, 3000, grid, 2);
    }
    {
        ScopedWorkerCount scope(6);
        many = simulate_brownian(42, 3000, grid, 2);
    }
    EXPECT_EQ(one.values, many.values);
    const auto prefix = simulate_brownian(42, 100, grid, 2);
    for (std::size_t p = 0; p < 100; ++p) {
        for (std::size_t k = 0; k < 10; ++k) EXPECT_EQ(prefix.values(p, k, 1), one.values(p, k, 1));
    }
    const auto other = simulate_brownian(43, 100, grid, 2);
    EXPECT_NE(other.values(0, 0, 0), one.values(0, 0, 0));
}

TEST(Forward, AdditiveNoiseReproducesBrownianMotion) {
    const FixtureRegistry registry;
    const auto config = make_config(registry.make("cole-hopf-bm"), 25, 500, 3);
    const PathSet paths = simulate_base(config);
    for (std::size_t p = 0; p < 500; p += 37) {
        for (std::size_t k = 0; k <= 25; k += 5) {
            EXPECT_NEAR(paths.states(p, k, 0), paths.brownian_at(p, k)[0], 1e-12);
            EXPECT_EQ(paths.variation(p, k, 0), 1.0);
        }
    }
}

TEST(Forward, LinearTangentEqualsStateRatio) {
    // For dX = mu X dt + s X dW the Euler tangent is exactly X / x0.
    const FixtureRegistry registry;
    FixtureOverrides o;
    o.initial_point = std::vector<double>{1.7};
    const auto config = make_config(registry.make("gbm-linear", o), 50, 400, 9);
    const PathSet paths = simulate_base(config);
    for (std::size_t p = 0; p < 400; ++p) {
        for (std::size_t k = 0; k <= 50; k += 7) {
            EXPECT_NEAR(paths.variation(p, k, 0), paths.states(p, k, 0) / 1.7, 1e-12);
        }
    }
}

TEST(Forward, TangentMatchesFiniteDifferenceOfFlow) {
    const FixtureRegistry registry;
    const auto config = make_config(registry.make("fbsde-tanh"), 40, 300, 5);
    const double h = 1e-6;
    const PathSet base = simulate_base(config);
    const PathSet up = shift_initial(config, 0, h);
    const PathSet down = shift_initial(config, 0, -h);
    for (std::size_t p = 0; p < 300; p += 11) {
        const double fd = (up.states(p, 40, 0) - down.states(p, 40, 0)) / (2.0 * h);
        EXPECT_NEAR(fd, base.variation(p, 40, 0), 1e-8);
    }
    EXPECT_EQ(up.increments, base.increments);
}

TEST(Forward, NonFiniteStateNamesThePath) {
    const FixtureRegistry registry;
    Fixture f = registry.make("additive-linear");
    f.model.drift = [](double t, std::span<const double> x, std::span<double> out) {
        out[0] = t > 0.5 ? INFINITY : 0.0 * x[0];
    };
    const auto config = make_config(f, 10, 200, 1);
    try {
        (void)simulate_base(config);
        ADD_FAILURE();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonFiniteState);
        EXPECT_NE(std::string(e.what()).find("path"), std::string::npos);
    }
}

TEST(Forward, PathDumpHasOneRowPerEntry) {
    const FixtureRegistry registry;
    const auto config = make_config(registry.make("additive-linear"), 4, 100, 1);
    const std::string csv = path_dump_csv(simulate_base(config));
    const auto rows = std::count(csv.begin(), csv.end(), '\n');
    EXPECT_EQ(rows, 1 + 100 * 5);
}
